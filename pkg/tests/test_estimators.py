import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predictivity import disease_model as dm
from predictivity import estimators as est
from predictivity import exact_binomial as eb
from predictivity import simulator as sim
from predictivity.errors import ContractError, DataError, DegenerateModelError

ONE = dm.WORKED_EXAMPLE_ONE


def counts_from(cells):
    nd = sum(a for a, _ in cells.values())
    nh = sum(b for _, b in cells.values())
    return est.CellCounts(dict(cells), nd, nh)


def test_cell_counts_toy(toy_sample):
    counts = est.cell_counts(toy_sample, ["x"])
    assert counts.cells == {(1,): (2, 0), (0,): (0, 2)}
    assert (counts.n_d, counts.n_h) == (2, 2)


def test_cell_counts_errors(toy_sample):
    with pytest.raises(ContractError):
        est.cell_counts(toy_sample, [])
    with pytest.raises(DataError):
        est.cell_counts(toy_sample, ["nope"])
    with pytest.raises(DataError):
        est.LabeledSample.from_labels(["d", "x"], [[0], [1]])
    with pytest.raises(ContractError):
        est.CellCounts({(0,): (1, 1)}, 2, 1)


def test_scores_toy(toy_sample):
    assert est.i_score(toy_sample, ["x"]) == pytest.approx(2.0)
    assert est.j_score(toy_sample, ["x"]) == pytest.approx(1.0)
    counts = est.cell_counts(toy_sample, ["x"])
    assert est.i_score_from_counts(counts) == pytest.approx(2.0)
    assert est.theta_e_train(counts) == 0.0


def test_scores_with_balanced_cells():
    s = est.LabeledSample([1, -1, 1, -1], [[0], [0], [1], [1]])
    assert est.i_score(s, [0]) == pytest.approx(0.0, abs=1e-15)
    assert est.theta_e_train(est.cell_counts(s, [0])) == 0.5
    one_cell = est.LabeledSample([1, -1, 1, -1], [[0], [0], [0], [0]])
    assert est.j_score(one_cell, [0]) == pytest.approx(0.0, abs=1e-15)


def test_i_score_standardization_invariance():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 3, size=(50, 2))
    y = rng.normal(size=50)
    a = est.i_score(est.LabeledSample(y, x), [0, 1])
    b = est.i_score(est.LabeledSample(3 * y + 7, x), [0, 1])
    assert a == pytest.approx(b, rel=1e-12)


def test_constant_outcome_is_degenerate():
    s = est.LabeledSample([1.0, 1.0], [[0], [1]])
    with pytest.raises(DegenerateModelError):
        est.i_score(s, [0])


def test_unbalanced_rejected():
    s = est.LabeledSample([1, 1, -1], [[0], [1], [1]])
    counts = est.cell_counts(s, [0])
    for fn in (est.theta_e_train, est.i_score_from_counts):
        with pytest.raises(ContractError, match="subsample"):
            fn(counts)
    report = est.estimate(s, [0])
    assert report.theta_e_train is None and report.flags


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(1, 3), st.integers(2, 4), st.integers(0, 10_000))
def test_balanced_i_equals_cell_form(n, k, levels, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, levels, size=(2 * n, k))
    y = np.r_[np.ones(n), -np.ones(n)]
    s = est.LabeledSample(y, x)
    counts = est.cell_counts(s, range(k))
    assert est.i_score(s, range(k)) == pytest.approx(est.i_score_from_counts(counts), abs=1e-12)
    # subject order and value relabelling leave I unchanged
    perm = rng.permutation(2 * n)
    relabelled = (x + 1) % levels
    assert est.i_score(est.LabeledSample(y[perm], x[perm]), range(k)) == pytest.approx(est.i_score(s, range(k)), abs=1e-9)
    assert est.i_score(est.LabeledSample(y, relabelled), range(k)) == pytest.approx(est.i_score(s, range(k)), abs=1e-9)
    assert est.cell_counts(est.LabeledSample(y[perm], x[perm]), range(k)) == counts
    assert 0.0 <= est.theta_e_train(counts) <= 0.5


def test_bias_training_examples():
    fd, fh, mult = ONE.cell_distribution()
    assert est.bias_training(fd, fh, 100, mult) == pytest.approx(-0.058, abs=1e-3)
    row1, _, n = sim.study_rows(6)[0]
    fd6, fh6, mult6 = row1.cell_distribution()
    assert est.bias_training(fd6, fh6, n, mult6) == pytest.approx(-0.111, abs=1e-3)


def test_bias_training_equal_laws():
    f = np.array([0.5, 0.3, 0.2])
    want = -0.5 * sum(p * eb.neg_rel_bias(50, 50 * p, 1.0) for p in f)
    got = est.bias_training(f, f, 50)
    assert got == pytest.approx(want) and got < 0
    assert est.bias_oos(f, f, 50) == 0.0


def test_bias_oos_examples():
    fd, fh, mult = ONE.cell_distribution()
    assert est.bias_oos(fd, fh, 100, mult) == pytest.approx(0.132, abs=1e-3)
    row2, _, n = sim.study_rows(6)[1]
    assert est.bias_oos(*row2.cell_distribution()[:2], n, row2.cell_distribution()[2]) == pytest.approx(0.046, abs=1e-3)


def test_bias_oos_matches_per_cell_definition():
    # 0.5 sum min (r - 1) a, written out cell by cell
    fd = np.array([0.5, 0.3, 0.2])
    fh = np.array([0.2, 0.3, 0.5])
    want = sum(
        0.5 * min(a, b) * (max(a, b) / min(a, b) - 1) * eb.tie_half_prob(40, 40 * max(a, b), max(a, b) / min(a, b))
        for a, b in zip(fd, fh)
    )
    assert est.bias_oos(fd, fh, 40) == pytest.approx(want, abs=1e-14)


def test_corrected_coverage_warning(toy_sample):
    result = est.theta_e_train_corrected(est.cell_counts(toy_sample, ["x"]))
    assert result.value == 0.0 and result.coverage_warning


def test_corrected_forms():
    counts = counts_from({(0,): (6, 2), (1,): (2, 6), (2,): (2, 2)})
    raw = est.theta_e_train(counts)
    inverse = est.theta_e_train_corrected(counts, form="inverse").value
    literal = est.theta_e_train_corrected(counts, form="literal").value
    assert literal < raw < inverse
    b = [eb.neg_rel_bias(10, 6, 3.0), eb.neg_rel_bias(10, 2, 1.0)]
    want = 0.5 * (2 / (1 - b[0]) * 2 + 2 / (1 - b[1])) / 10
    assert inverse == pytest.approx(want)


def test_corrected_oracle_mode():
    truth = est.TabulatedTruth({(0,): (0.6, 0.2), (1,): (0.2, 0.6), (2,): (0.2, 0.2)})
    counts = counts_from({(0,): (6, 2), (1,): (2, 6), (2,): (2, 2)})
    value = est.theta_e_train_corrected(counts, truth, mode="oracle").value
    b = [eb.neg_rel_bias(10, 6.0, 3.0), eb.neg_rel_bias(10, 2.0, 1.0)]
    assert value == pytest.approx(0.5 * (4 / (1 - b[0]) + 2 / (1 - b[1])) / 10)
    with pytest.raises(ContractError):
        est.theta_e_train_corrected(counts, None, mode="oracle")
    with pytest.raises(ValueError):
        est.theta_e_train_corrected(counts, form="additive")


def test_corrected_floor_on_divisor():
    # a rare cell: lambda = 100 * 0.0004 = 0.04 gives b = 0.96, so 1 - b sits under the floor
    truth = est.TabulatedTruth({(0,): (0.0004, 0.0004), (1,): (0.9996, 0.9996)})
    counts = counts_from({(0,): (1, 1), (1,): (99, 99)})
    b_rare = eb.neg_rel_bias(100, 0.04, 1.0)
    assert 1 - b_rare < est.INVERSE_FLOOR
    b_common = eb.neg_rel_bias(100, 99.96, 1.0)
    want = 0.5 * (1 / est.INVERSE_FLOOR + 99 / (1 - b_common)) / 100
    assert est.theta_e_train_corrected(counts, truth, mode="oracle").value == pytest.approx(want)


def test_oos_matches_bayes_rule_without_ties():
    truth = est.TabulatedTruth({(0,): (0.6, 0.2), (1,): (0.3, 0.5), (2,): (0.1, 0.3)})
    counts = counts_from({(0,): (5, 1), (1,): (2, 4), (2,): (1, 3)})
    assert est.theta_e_oos_oracle(counts, truth) == pytest.approx(0.5 * (0.2 + 0.3 + 0.1))


def test_oos_all_tied_and_unseen():
    truth = est.TabulatedTruth({(0,): (0.6, 0.2), (1,): (0.3, 0.5), (2,): (0.1, 0.3)})
    tied = counts_from({(0,): (2, 2), (1,): (1, 1)})
    assert est.theta_e_oos_oracle(tied, truth) == pytest.approx(0.5)
    # undecided cells called healthy cost their f_d mass
    assert est.theta_e_oos_oracle(tied, truth, ties="healthy") == pytest.approx(0.5)
    partial = counts_from({(0,): (3, 1), (1,): (1, 1)})
    assert est.theta_e_oos_oracle(partial, truth, ties="healthy") == pytest.approx(0.5 * (0.2 + 0.3 + 0.1))
    assert est.theta_e_oos_oracle(partial, truth, ties="diseased") == pytest.approx(0.5 * (0.2 + 0.5 + 0.3))
    with pytest.raises(ContractError):
        est.theta_e_oos_oracle(partial, None)


def test_oos_corrected_subtracts_bias():
    sample = sim.draw_case_control(ONE, 100, 5)
    counts = est.cell_counts(sample, range(6))
    fd, fh, mult = ONE.cell_distribution()
    want = est.theta_e_oos_oracle(counts, ONE) - est.bias_oos(fd, fh, 100, mult)
    assert est.theta_e_oos_corrected(counts, ONE) == pytest.approx(want)


def test_holdout_trivial_cases(toy_sample):
    counts = est.cell_counts(toy_sample, ["x"])
    assert est.holdout_error(counts, toy_sample) == 0.0
    unseen = est.LabeledSample([1, -1], [[5], [5]], ("x",))
    assert est.holdout_error(counts, unseen) == 0.5
    assert est.holdout_error(counts, unseen, ties="healthy") == 0.5


def test_holdout_estimates_out_of_sample_error():
    train = sim.draw_case_control(ONE, 100, 11)
    test = sim.draw_case_control(ONE, 10_000, 12)
    counts = est.cell_counts(train, range(6))
    target = est.theta_e_oos_oracle(counts, ONE)
    got = est.holdout_error(counts, test)
    se = np.sqrt(target * (1 - target) / 20_000)
    assert abs(got - target) < 3 * se + 2e-3


def test_i_score_weighted():
    counts = counts_from({(0,): (7, 1), (1,): (1, 5), (2,): (2, 4)})
    n = counts.n_d
    i = est.i_score_from_counts(counts)
    assert est.i_score_weighted(counts, dm.CostPriorSpec()) == pytest.approx(i / (2 * n))
    spec = dm.CostPriorSpec(pi_d=0.4, c_d=0.0, c_h=2.0)
    assert est.i_score_weighted(counts, spec) == pytest.approx(sum((0.6 * 2 * b / n) ** 2 for _, b in counts.cells.values()))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=8), st.floats(0.05, 0.95), st.floats(0, 3), st.floats(0, 3))
def test_i_score_weighted_brute_force(cells, pi_d, c_d, c_h):
    cells = {(i,): c for i, c in enumerate(cells)}
    nd = sum(a for a, _ in cells.values())
    nh = sum(b for _, b in cells.values())
    if nd == 0 or nh == 0:
        return
    spec = dm.CostPriorSpec(pi_d=pi_d, c_d=c_d, c_h=c_h)
    want = 0.0
    for a, b in cells.values():
        want += (pi_d * c_d * a / nd - (1 - pi_d) * c_h * b / nh) ** 2
    assert est.i_score_weighted(est.CellCounts(cells, nd, nh), spec) == pytest.approx(want, abs=1e-12)


def test_expected_i_and_small_bias():
    truth_d = np.array([0.5, 0.3, 0.2])
    truth_h = np.array([0.2, 0.3, 0.5])
    n, reps = 60, 3000
    rng = np.random.default_rng(3)
    nd = rng.multinomial(n, truth_d, size=reps)
    nh = rng.multinomial(n, truth_h, size=reps)
    i_vals = 0.5 * np.sum((nd - nh) ** 2, axis=1) / n
    theta_i = 0.5 * np.sum((truth_d - truth_h) ** 2)
    want = n * theta_i + 1 - 0.5 * np.sum(truth_d**2 + truth_h**2)
    assert abs(i_vals.mean() - want) < 3 * i_vals.std(ddof=1) / np.sqrt(reps)
    assert abs(want / n - theta_i) < 1 / n


def test_noise_variable_degrades_i():
    model = ONE
    extra = []
    base = []
    for rep in range(500):
        s = sim.draw_case_control(model, 100, sim.stream(99, rep))
        base.append(est.i_score(s, [0]))
        extra.append(est.i_score(s, [0, 1]))
    diff = np.array(extra) - np.array(base)
    assert diff.mean() + 3 * diff.std(ddof=1) / np.sqrt(len(diff)) < 0


def test_j_near_chi_square_scale_under_independence():
    rng = np.random.default_rng(4)
    k, n0 = 4, 400
    vals = []
    for _ in range(400):
        x = rng.integers(0, k, size=(n0, 1))
        y = rng.choice([-1.0, 1.0], size=n0)
        vals.append(est.j_score(est.LabeledSample(y, x), [0]))
    vals = np.array(vals)
    assert abs(vals.mean() - (k - 1) / n0) < 3 * vals.std(ddof=1) / np.sqrt(len(vals))


def test_estimate_report_with_truth():
    sample = sim.draw_case_control(ONE, 150, 21)
    report = est.estimate(sample, list(sample.variable_names), truth=ONE, costs=dm.CostPriorSpec())
    assert report.theta_e == pytest.approx(dm.theta_e(ONE))
    assert report.bias_e < 0 < report.bias_eo
    assert 0 <= report.theta_e_train <= 0.5
    assert report.i_score_weighted is not None
    keys = dict(report.items())
    assert keys["mode"] == "plugin" and keys["form"] == "inverse"


def test_estimate_subset_marginalizes_truth():
    sample = sim.draw_case_control(ONE, 150, 22)
    report = est.estimate(sample, ["snp0", "snp3"], truth=ONE)
    # the extra SNP carries no signal, so the subset's Bayes error is the model's
    assert report.theta_e == pytest.approx(dm.theta_e(ONE), abs=1e-12)
    with pytest.raises(ContractError):
        est.estimate(sample, ["snp0"], truth=ONE.with_noise_snps([0.1]))
