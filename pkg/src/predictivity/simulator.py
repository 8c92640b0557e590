"""Seeded case-control sampling and the bias-study replication harness.

Random streams use numpy's counter-based Philox bit generator, keyed through
``SeedSequence([seed, *key])``.  Replicate ``i`` of a study draws its case
arm from key ``(i, 0)`` and its control arm from key ``(i, 1)``, so results
do not depend on execution order or worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import disease_model as dm
from . import estimators as est
from .errors import DomainError
from .exact_binomial import neg_rel_bias, tie_half_prob

__all__ = [
    "stream",
    "draw_case_control",
    "SimConfig",
    "RepSummary",
    "replicate_bias_study",
    "study_rows",
    "CurveTable",
    "figure_curves",
    "FIGURE_R",
    "WORKERS_ENV",
]

WORKERS_ENV = "PREDICTIVITY_WORKERS"
FIGURE_R = (1.016, 1.062, 1.25, 5.0, 40.0)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *key)``."""
    if seed < 0 or any(k < 0 for k in key):
        raise DomainError("seed and stream keys must be nonnegative integers")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def _draw_arm(model: dm.DiseaseModel, probs_u: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    x = np.zeros((n, model.n_snps), dtype=np.int8)
    k = len(model.influential)
    u_index = rng.choice(len(probs_u), size=n, p=probs_u / probs_u.sum())
    for pos, col in enumerate(model.influential):
        x[:, col] = (u_index // 3 ** (k - 1 - pos)) % 3
    for col in model.noise:
        x[:, col] = rng.choice(3, size=n, p=dm.genotype_dist(model.maf[col]))
    return x


def draw_case_control(model: dm.DiseaseModel, n: int, rng) -> est.LabeledSample:
    """Draw ``n`` cases from ``f(x | d)`` and ``n`` controls from ``f(x | h)``.

    ``rng`` is either an integer seed, in which case the two arms use streams
    ``(seed, 0)`` and ``(seed, 1)``, or a ``Generator`` used for both arms in
    turn.  Cases come first in the returned sample.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    tables = dm.conditional_tables(model)
    if isinstance(rng, (int, np.integer)):
        rng_d, rng_h = stream(int(rng), 0), stream(int(rng), 1)
    else:
        rng_d = rng_h = rng
    x_d = _draw_arm(model, tables.f_u_given_d, n, rng_d)
    x_h = _draw_arm(model, tables.f_u_given_h, n, rng_h)
    y = np.concatenate([np.full(n, est.CASE), np.full(n, est.CONTROL)])
    names = tuple(f"snp{j}" for j in range(model.n_snps))
    return est.LabeledSample(y, np.vstack([x_d, x_h]), names)


@dataclass(frozen=True)
class SimConfig:
    """One bias-study configuration.

    ``mode`` and ``form`` select the training-error correction; ``ties`` is
    how the out-of-sample rule resolves tied and unseen cells.  The defaults
    are the settings under which the reference study columns are reproduced:
    plug-in inverse correction, and undecided cells called healthy.
    ``ties="half"`` gives the estimator whose expected bias is exactly
    ``B_eo``.
    """

    model: dm.DiseaseModel
    n: int
    reps: int = 25
    seed: int = 0
    mode: str = est.DEFAULT_MODE
    form: str = est.DEFAULT_FORM
    ties: str = "healthy"

    def __post_init__(self):
        if self.n < 1 or self.reps < 1:
            raise DomainError("n and reps must be >= 1")


@dataclass
class RepSummary:
    """One row of a bias study, columns in printed order."""

    theta_e: float
    b: float
    b_o: float
    mean_b: float
    sd_b: float
    mean_b1: float
    sd_b1: float
    mean_bo: float
    sd_bo: float
    theta_I0: float
    bound: float
    reps: int = 0
    flags: list[str] = field(default_factory=list)

    def row(self) -> tuple[float, ...]:
        return (
            self.theta_e, self.b, self.b_o, self.mean_b, self.sd_b, self.mean_b1,
            self.sd_b1, self.mean_bo, self.sd_bo, self.theta_I0, self.bound,
        )


def _one_rep(config: SimConfig, theta: float, rep: int) -> tuple[float, float, float]:
    sample = draw_case_control(config.model, config.n, stream(config.seed, rep))
    counts = est.cell_counts(sample, range(config.model.n_snps))
    train = est.theta_e_train(counts)
    corrected = est.theta_e_train_corrected(counts, config.model, mode=config.mode, form=config.form).value
    oos = est.theta_e_oos_oracle(counts, config.model, ties=config.ties)
    return train - theta, corrected - theta, oos - theta


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def replicate_bias_study(config: SimConfig, workers: int | None = None) -> RepSummary:
    """Analytic bias columns plus Monte Carlo means and sds over ``config.reps`` samples.

    Biases are estimate minus ``theta_e``.  ``b`` is reported as the
    magnitude ``-B_e`` of the training bias, ``b_o`` as ``B_eo``.
    """
    model = config.model
    params = dm.oracle_params(model)
    fd, fh, mult = model.cell_distribution()
    b = -est.bias_training(fd, fh, config.n, mult)
    b_o = est.bias_oos(fd, fh, config.n, mult)

    workers = _worker_count() if workers is None else workers
    reps = range(config.reps)
    if workers > 1 and config.reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(_one_rep, [config] * config.reps, [params.theta_e] * config.reps, reps))
    else:
        draws = [_one_rep(config, params.theta_e, rep) for rep in reps]
    arr = np.array(draws)
    flags = []
    if config.reps == 1:
        sds = np.zeros(3)
        flags.append("reps=1: standard deviations reported as 0")
    else:
        sds = arr.std(axis=0, ddof=1)
    means = arr.mean(axis=0)
    return RepSummary(
        theta_e=params.theta_e,
        b=b,
        b_o=b_o,
        mean_b=float(means[0]),
        sd_b=float(sds[0]),
        mean_b1=float(means[1]),
        sd_b1=float(sds[1]),
        mean_bo=float(means[2]),
        sd_bo=float(sds[2]),
        theta_I0=params.theta_I0,
        bound=params.bound_on_theta_e,
        reps=config.reps,
        flags=flags,
    )


def study_rows(table: int) -> list[tuple[dm.DiseaseModel, int, int]]:
    """``(model, reps, n)`` for each configuration of bias table 4 or 6."""
    from . import reference_values as ref

    if table == 4:
        return [(dm.DiseaseModel.from_values(maf, (0,), t), m, n) for maf, t, m, n in ref.TABLE4_ROWS]
    if table == 6:
        return [
            (dm.DiseaseModel.from_values(maf, (0, 1), t, order=dm.FIRST_FASTEST_ORDER), m, n)
            for maf, t, m, n in ref.TABLE6_ROWS
        ]
    raise DomainError(f"no bias study table {table}")


@dataclass
class CurveTable:
    columns: tuple[str, ...]
    rows: list[tuple]


def figure_curves(figure: int, n: int = 500, grid=None, points: int = 60) -> CurveTable:
    """Curve data behind figures 1-4.

    Figures 1 and 2 give ``b`` and ``a`` against ``log10(lambda)`` at ``n``
    for each ``r`` in :data:`FIGURE_R`, with ``lambda`` log-spaced over
    ``[0.01, 100]`` unless ``grid`` is given.  Figures 3 and 4 trace
    ``(theta_e, theta_I0)`` for each one- or two-locus penetrance of the
    catalogs as the common MAF runs over :func:`~predictivity.disease_model.maf_grid`
    (or ``grid``), followed by the bound curve ``theta_I0 = 4 (0.5 - theta_e)^2``.
    """
    if figure in (1, 2):
        lambdas = np.logspace(-2, 2, points) if grid is None else np.asarray(grid, dtype=float)
        fn = neg_rel_bias if figure == 1 else tie_half_prob
        rows = [
            (r, math.log10(lam), lam, fn(n, float(lam), r))
            for r in FIGURE_R
            for lam in lambdas
        ]
        return CurveTable(("r", "log10_lambda", "lambda", "b" if figure == 1 else "a"), rows)
    if figure in (3, 4):
        mafs = dm.maf_grid(points) if grid is None else np.asarray(grid, dtype=float)
        if figure == 3:
            catalog, infl, order = dm.SINGLE_LOCUS_PENETRANCE, (0,), None
        else:
            catalog, infl, order = dm.TWO_LOCUS_PENETRANCE, (0, 1), dm.LISTED_ORDER
        rows = []
        for name, values in catalog.items():
            for p in mafs:
                model = dm.DiseaseModel.from_values((float(p),) * 6, infl, values, order=order)
                theta_i0, _ = dm.theta_I_family(model)
                rows.append((name, float(p), dm.theta_e(model), theta_i0))
        for te in np.linspace(0.0, 0.5, points):
            rows.append(("bound", float("nan"), float(te), 4.0 * (0.5 - te) ** 2))
        return CurveTable(("curve", "maf", "theta_e", "theta_I0"), rows)
    raise DomainError(f"unknown figure {figure!r}; expected 1, 2, 3 or 4")
