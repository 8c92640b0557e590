import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predictivity import disease_model as dm
from predictivity import estimators as est
from predictivity import partition_retention as pr
from predictivity import simulator as sim
from predictivity.errors import ContractError, DegenerateModelError, DomainError

ONE = dm.WORKED_EXAMPLE_ONE


def interaction_model(noise=48):
    """SNP 0 has a marginal effect; SNP 1 acts only through SNP 0."""
    f = dm.genotype_dist(0.3)
    g = np.array([-1.0, 0.0, 0.0])
    g[1] = 0.5 * f[0] / f[1]
    g[2] = -(f[0] * g[0] + f[1] * g[1]) / f[2]
    g /= np.abs(g).max()
    h = np.array([1.0, -1.0, -1.0])
    t = {(u1, u2): 0.5 + 0.2 * g[u1] + 0.3 * g[u1] * h[u2] for u1 in range(3) for u2 in range(3)}
    return dm.DiseaseModel((0.3, 0.3) + (0.2,) * noise, (0, 1), t)


def balanced_sample(seed, n=60, m=5, levels=3):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, levels, size=(2 * n, m))
    return est.LabeledSample(np.r_[np.ones(n), -np.ones(n)], x)


def test_interaction_model_has_no_marginal_effect_of_snp1():
    t = dm.conditional_tables(interaction_model(0))
    d = t.f_u_given_d.reshape(3, 3).sum(axis=0)
    h = t.f_u_given_h.reshape(3, 3).sum(axis=0)
    assert np.allclose(d, h, atol=1e-12)


def test_single_variable_group():
    s = sim.draw_case_control(ONE, 100, 1)
    trace = pr.backward_drop(s, [0])
    assert trace.retained == (0,) and trace.steps == [] and trace.singleton
    flat = est.LabeledSample([1, -1, 1, -1], [[0], [0], [1], [1]])
    assert pr.backward_drop(flat, [0]).retained == ()


def test_empty_group_and_constant_outcome():
    s = sim.draw_case_control(ONE, 20, 1)
    with pytest.raises(ContractError):
        pr.backward_drop(s, [])
    with pytest.raises(DegenerateModelError):
        pr.backward_drop(est.LabeledSample([1, 1], [[0], [1]]), [0])


def test_trace_uses_marginalized_scores():
    s = sim.draw_case_control(ONE, 150, 2)
    trace = pr.backward_drop(s, [0, 1, 2, 3])
    for step in trace.steps:
        assert step.i_after > step.i_before
    assert trace.i_final == pytest.approx(est.i_score(s, list(trace.retained)), rel=1e-12)


def test_tie_goes_to_lowest_column():
    # columns 1 and 2 play symmetric roles, so dropping either gives the same I exactly
    rng = np.random.default_rng(0)
    n = 40
    y = np.r_[np.ones(n), -np.ones(n)]
    x0 = (y > 0).astype(int)
    x1 = rng.integers(0, 3, size=2 * n)
    x2 = rng.integers(0, 3, size=2 * n)
    x = np.vstack([np.c_[x0, x1, x2], np.c_[x0, x2, x1]])
    s = est.LabeledSample(np.r_[y, y], x)
    trace = pr.backward_drop(s, [2, 0, 1])
    assert trace.steps[0].dropped == 1
    assert trace.retained == (0,)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_backward_drop_reaches_local_maximum(seed, k):
    s = balanced_sample(seed, m=6)
    group = list(range(k))
    trace = pr.backward_drop(s, group)
    for step in trace.steps:
        assert step.i_after > step.i_before
    kept = list(trace.retained)
    if len(kept) > 1:
        final = est.i_score(s, kept)
        for v in kept:
            assert est.i_score(s, [u for u in kept if u != v]) <= final + 1e-9


def test_influential_variable_survives():
    model = ONE
    survived = 0
    for rep in range(100):
        s = sim.draw_case_control(model, 1000, sim.stream(7, rep))
        survived += 0 in pr.backward_drop(s, range(6)).retained
    assert survived / 100 > 0.95


def test_noise_group_scores_far_below_signal_group():
    flat = dm.DiseaseModel.from_values((0.2,) * 6, (0,), (0.5, 0.5, 0.5))
    sizes, noise, signal = [], [], []
    for rep in range(60):
        s = sim.draw_case_control(flat, 200, sim.stream(8, rep))
        trace = pr.backward_drop(s, range(6))
        sizes.append(len(trace.retained))
        noise.append(trace.i_final)
        s = sim.draw_case_control(ONE, 200, sim.stream(8, rep))
        signal.append(pr.backward_drop(s, range(6)).i_final)
    assert np.median(sizes) < 6
    assert np.median(noise) * 10 < np.median(signal)


def test_random_groups():
    (group,) = pr.random_groups(6, 6, 1, seed=3)
    assert sorted(group) == list(range(6))
    assert pr.random_groups(50, 5, 20, 9) == pr.random_groups(50, 5, 20, 9)
    with pytest.raises(DomainError):
        pr.random_groups(4, 5, 1, 0)
    groups = pr.random_groups(100, 6, 5000, seed=1)
    assert all(len(set(g)) == 6 for g in groups)
    counts = np.bincount(np.concatenate(groups), minlength=100)
    p = 6 / 100
    assert np.all(np.abs(counts - 5000 * p) <= 4 * np.sqrt(5000 * p * (1 - p)))


def test_config_validation_and_defaults():
    cfg = pr.RetentionConfig()
    assert (cfg.group_size, cfg.rounds, cfg.top_fraction) == (6, 1, 0.05)
    assert cfg.mix_for(6) == 3
    assert cfg.groups_for(100, 6) == 334
    for bad in (dict(group_size=0), dict(num_groups=0), dict(rounds=-1), dict(top_fraction=0.0), dict(mix_count=7), dict(stages=())):
        with pytest.raises(DomainError):
            pr.RetentionConfig(**bad)


def test_single_group_equals_backward_drop():
    s = sim.draw_case_control(ONE, 100, 4)
    cfg = pr.RetentionConfig(group_size=4, num_groups=1, rounds=0, seed=5)
    result = pr.retention_scores(s, cfg, keep_trace=True)
    (group,) = pr.random_groups(6, 4, 1, 5, (0, 0))
    trace = pr.backward_drop(s, group)
    assert result.trace[0].retained == trace.retained
    assert set(np.flatnonzero(result.survivals)) == set(trace.retained)
    unseen = set(range(6)) - set(group)
    assert all(result.frequency[v] == 0 and not result.evaluated[v] for v in unseen)


def test_frequencies_bounded_and_permutation_invariant():
    s = sim.draw_case_control(ONE.with_noise_snps((0.2,) * 10), 120, 6)
    cfg = pr.RetentionConfig(num_groups=150, seed=2)
    a = pr.staged_selection(s, cfg)
    perm = np.random.default_rng(1).permutation(len(s.y))
    b = pr.staged_selection(est.LabeledSample(s.y[perm], s.x[perm], s.variable_names), cfg)
    assert np.all((a.frequency >= 0) & (a.frequency <= 1))
    assert np.array_equal(a.appearances, b.appearances)
    assert np.array_equal(a.survivals, b.survivals)


def test_worker_count_invariance(monkeypatch):
    s = sim.draw_case_control(ONE.with_noise_snps((0.2,) * 10), 100, 3)
    cfg = pr.RetentionConfig(num_groups=80, seed=4)
    serial = pr.staged_selection(s, cfg)
    monkeypatch.setenv("PREDICTIVITY_WORKERS", "2")
    parallel = pr.staged_selection(s, cfg)
    assert np.array_equal(serial.survivals, parallel.survivals)
    assert serial.modules == parallel.modules


def test_resuscitate_boundaries():
    s = sim.draw_case_control(ONE.with_noise_snps((0.2,) * 14), 100, 5)
    cfg = pr.RetentionConfig(num_groups=100, rounds=0, seed=1)
    base = pr.retention_scores(s, cfg)
    assert np.array_equal(pr.staged_selection(s, cfg).survivals, base.survivals)
    full_mix = pr.RetentionConfig(num_groups=50, mix_count=6, top_fraction=0.4, seed=1)
    top = pr._top_set(base, 0.4)
    after = pr.resuscitate(s, base, full_mix)
    rest = [v for v in range(20) if v not in top]
    assert np.array_equal(after.appearances[rest], base.appearances[rest])
    empty = pr.RetentionResult(np.ones(20, int), np.zeros(20, int), np.zeros(20), [])
    with pytest.raises(ContractError):
        pr.resuscitate(s, empty, cfg)


def test_resuscitation_rescues_interacting_variable():
    model = interaction_model()
    rose = 0
    for trial in range(20):
        s = sim.draw_case_control(model, 500, 5000 + trial)
        cfg = pr.RetentionConfig(num_groups=600, seed=trial)
        first = pr.retention_scores(s, cfg)
        after = pr.resuscitate(s, first, cfg)
        rose += after.frequency[1] > first.frequency[1]
    assert rose >= 16


def test_staged_is_deterministic_and_single_stage_matches():
    model = ONE.with_noise_snps((0.2,) * 994)
    s = sim.draw_case_control(model, 300, 12)
    cfg = pr.RetentionConfig(stages=(1, 2, 6), seed=3)
    a, b = pr.staged_selection(s, cfg), pr.staged_selection(s, cfg)
    assert np.array_equal(a.survivals, b.survivals) and a.modules == b.modules
    assert a.top(1) == [0]
    small = sim.draw_case_control(ONE.with_noise_snps((0.2,) * 10), 100, 13)
    one = pr.RetentionConfig(num_groups=60, rounds=0, seed=2)
    assert np.array_equal(pr.staged_selection(small, one).survivals, pr.retention_scores(small, one).survivals)


def test_staged_stops_when_nothing_survives():
    s = est.LabeledSample([1, -1, 1, -1], [[0, 0], [0, 0], [1, 1], [1, 1]])
    # every cell is balanced, so I = 0 and no variable is ever retained
    with pytest.warns(RuntimeWarning, match="no variable survived"):
        result = pr.staged_selection(s, pr.RetentionConfig(group_size=1, stages=(1, 2), num_groups=4, rounds=0))
    assert result.survivals.sum() == 0


def test_staged_recovers_two_locus_model():
    model = dm.WORKED_EXAMPLE_TWO.with_noise_snps((0.2,) * 994)
    hits = 0
    for trial in range(20):
        s = sim.draw_case_control(model, 1000, 4000 + trial)
        result = pr.staged_selection(s, pr.RetentionConfig(stages=(1, 2, 6), seed=trial))
        hits += {0, 1} <= set(result.top(10))
    assert hits >= 15


def test_noise_added_to_influential_set_lowers_i():
    extra, base = [], []
    for rep in range(300):
        s = sim.draw_case_control(dm.WORKED_EXAMPLE_TWO, 200, sim.stream(31, rep))
        base.append(est.i_score(s, [0, 1]))
        extra.append(est.i_score(s, [0, 1, 2]))
    diff = np.array(extra) - np.array(base)
    assert diff.mean() + 3 * diff.std(ddof=1) / np.sqrt(len(diff)) < 0
