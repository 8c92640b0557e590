"""Sample statistics over sparse cell tables.

The sufficient statistic for everything here is the table of per-cell class
counts ``(n_dx, n_hx)`` over the joint values ``x`` of a variable subset.
Cells are kept in a sparse mapping; absent cells mean ``(0, 0)``.

Estimators of the Bayes error ``theta_e``:

- ``theta_e_train``: the plug-in training estimate (biased low);
- ``theta_e_train_corrected``: per-cell bias correction using ``b(n, lam, r)``;
- ``theta_e_oos_oracle``: expected error of the sample's majority rule under
  the true laws (biased high), available only when the truth is known;
- ``holdout_error``: the same rule scored on an independent sample.

Functions that need the true class-conditional laws accept a *truth* object
with ``cell_probs(keys) -> (f_d, f_h)`` and ``cell_distribution() -> (f_d,
f_h, multiplicity)``; :class:`~predictivity.disease_model.DiseaseModel` and
:class:`TabulatedTruth` both qualify.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .disease_model import CostPriorSpec
from .errors import ContractError, DataError, DegenerateModelError, DomainError
from .exact_binomial import BinomialPair, neg_rel_bias, prob_less_half_ties

__all__ = [
    "LabeledSample",
    "CellCounts",
    "TabulatedTruth",
    "marginal_truth",
    "EstimateReport",
    "cell_counts",
    "i_score",
    "j_score",
    "i_score_from_counts",
    "theta_e_train",
    "bias_training",
    "theta_e_train_corrected",
    "theta_e_oos_oracle",
    "bias_oos",
    "theta_e_oos_corrected",
    "holdout_error",
    "i_score_weighted",
    "estimate",
    "DEFAULT_FORM",
    "DEFAULT_MODE",
    "INVERSE_FLOOR",
]

CASE, CONTROL = 1.0, -1.0

# Smallest divisor allowed in the inverse correction form.
INVERSE_FLOOR = 0.05


@dataclass
class LabeledSample:
    """Outcomes and discrete explanatory variables, one row per subject.

    ``y`` uses +1 for a case (d) and -1 for a control (h); arbitrary real
    outcomes are also accepted by the I and J scores.
    """

    y: np.ndarray
    x: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x)
        if self.x.ndim == 1:
            self.x = self.x.reshape(-1, 1)
        if self.x.ndim != 2 or len(self.y) != self.x.shape[0]:
            raise ContractError(f"x has shape {self.x.shape} but y has {len(self.y)} entries")
        if len(self.y) == 0:
            raise ContractError("sample is empty")
        if not self.variable_names:
            self.variable_names = tuple(f"v{j}" for j in range(self.x.shape[1]))
        self.variable_names = tuple(self.variable_names)
        if len(self.variable_names) != self.x.shape[1]:
            raise ContractError("one variable name per column is required")

    @classmethod
    def from_labels(cls, labels: Sequence[str], x, variable_names=()) -> "LabeledSample":
        """Build from ``'d'``/``'h'`` labels."""
        codes = {"d": CASE, "h": CONTROL}
        try:
            y = np.array([codes[str(lab)] for lab in labels])
        except KeyError as exc:
            raise DataError(f"unknown label {exc.args[0]!r}; expected 'd' or 'h'") from None
        return cls(y, x, tuple(variable_names))

    @property
    def n_vars(self) -> int:
        return self.x.shape[1]

    @property
    def is_two_class(self) -> bool:
        return bool(np.all((self.y == CASE) | (self.y == CONTROL)))

    @property
    def n_d(self) -> int:
        return int((self.y == CASE).sum())

    @property
    def n_h(self) -> int:
        return int((self.y == CONTROL).sum())

    def labels(self) -> list[str]:
        if not self.is_two_class:
            raise ContractError("sample has real-valued outcomes")
        return ["d" if v == CASE else "h" for v in self.y]

    def resolve(self, subset) -> tuple[int, ...]:
        """Turn a subset given by names or indices into column indices."""
        if isinstance(subset, (str, int, np.integer)):
            subset = [subset]
        cols = []
        for s in subset:
            if isinstance(s, str):
                if s not in self.variable_names:
                    raise DataError(f"unknown variable {s!r}")
                cols.append(self.variable_names.index(s))
            else:
                if not 0 <= int(s) < self.n_vars:
                    raise DataError(f"variable index {s} out of range")
                cols.append(int(s))
        if not cols:
            raise ContractError("variable subset is empty")
        if len(set(cols)) != len(cols):
            raise ContractError(f"variable subset {subset} has duplicates")
        return tuple(cols)

    def standardized_y(self) -> np.ndarray:
        sd = self.y.std()
        if sd == 0:
            raise DegenerateModelError("outcome is constant")
        return (self.y - self.y.mean()) / sd


@dataclass
class CellCounts:
    """Sparse per-cell class counts for one variable subset."""

    cells: dict[tuple, tuple[int, int]]
    n_d: int
    n_h: int
    subset: tuple[int, ...] = ()

    def __post_init__(self):
        nd = sum(c[0] for c in self.cells.values())
        nh = sum(c[1] for c in self.cells.values())
        if (nd, nh) != (self.n_d, self.n_h):
            raise ContractError(f"cell totals ({nd}, {nh}) disagree with class sizes ({self.n_d}, {self.n_h})")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(keys, n_dx, n_hx)`` with keys as an integer matrix, rows sorted."""
        keys = sorted(self.cells)
        nd = np.array([self.cells[k][0] for k in keys], dtype=float)
        nh = np.array([self.cells[k][1] for k in keys], dtype=float)
        return np.array(keys, dtype=np.int64).reshape(len(keys), -1), nd, nh

    @property
    def balanced_n(self) -> int:
        if self.n_d != self.n_h:
            raise ContractError(
                f"estimator requires equal class sizes, got n_d={self.n_d}, n_h={self.n_h}; "
                "subsample or reweight before calling"
            )
        return self.n_d

    def __eq__(self, other):
        if not isinstance(other, CellCounts):
            return NotImplemented
        return (self.cells, self.n_d, self.n_h) == (other.cells, other.n_d, other.n_h)


def cell_counts(sample: LabeledSample, subset) -> CellCounts:
    """Tabulate case and control counts over the joint values of ``subset``."""
    if not sample.is_two_class:
        raise DataError("cell counts need two-class labels (+1 case, -1 control)")
    cols = sample.resolve(subset)
    keys, inverse = np.unique(sample.x[:, cols], axis=0, return_inverse=True)
    inverse = inverse.ravel()
    is_d = sample.y == CASE
    nd = np.bincount(inverse[is_d], minlength=len(keys))
    nh = np.bincount(inverse[~is_d], minlength=len(keys))
    cells = {tuple(k.tolist()): (int(a), int(b)) for k, a, b in zip(keys, nd, nh)}
    return CellCounts(cells, int(is_d.sum()), int((~is_d).sum()), cols)


def _cell_sums(sample: LabeledSample, subset) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-cell sums of standardized y, per-cell sizes, and n_0."""
    cols = sample.resolve(subset)
    y = sample.standardized_y()
    _, inverse = np.unique(sample.x[:, cols], axis=0, return_inverse=True)
    inverse = inverse.ravel()
    return np.bincount(inverse, weights=y), np.bincount(inverse), len(y)


def i_score(sample: LabeledSample, subset) -> float:
    """``I = n0^-1 sum_x (n_x ybar_x)^2`` on the standardized outcome.

    With equal class sizes and labels +-1 this equals
    ``0.5 n^-1 sum_x (n_dx - n_hx)^2``.
    """
    sums, _, n0 = _cell_sums(sample, subset)
    return float(np.dot(sums, sums)) / n0


def j_score(sample: LabeledSample, subset) -> float:
    """Explained over total variance, ``n0^-1 sum_x n_x ybar_x^2``."""
    sums, sizes, n0 = _cell_sums(sample, subset)
    return float(np.sum(sums * sums / sizes)) / n0


def i_score_from_counts(counts: CellCounts) -> float:
    """Balanced-design I score ``0.5 n^-1 sum_x (n_dx - n_hx)^2``."""
    n = counts.balanced_n
    return 0.5 * sum((a - b) ** 2 for a, b in counts.cells.values()) / n


def theta_e_train(counts: CellCounts) -> float:
    """Training estimate ``0.5 sum_x min(n_dx, n_hx) / n``."""
    n = counts.balanced_n
    return 0.5 * sum(min(a, b) for a, b in counts.cells.values()) / n


@lru_cache(maxsize=65536)
def _b(n: int, lam: float, r: float) -> float:
    return neg_rel_bias(n, lam, r)


@lru_cache(maxsize=65536)
def _a(n: int, p_hi: float, p_lo: float) -> float:
    return prob_less_half_ties(BinomialPair(n, p_hi, p_lo))


def _per_cell_b(n: int, hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """``b(n, n hi, hi / lo)`` for probability pairs with ``lo > 0``."""
    out = np.empty(len(hi))
    for i, (h, l) in enumerate(zip(hi.tolist(), lo.tolist())):
        out[i] = _b(n, min(n * h, float(n)), max(h / l, 1.0))
    return out


def bias_training(f_d, f_h, n: int, multiplicity=None) -> float:
    """Exact bias ``B_e = -0.5 sum_x min(f_d, f_h) b(n, lam(x), r(x))`` of the training estimate.

    ``lam(x) = n max(f_d, f_h)`` and ``r(x) = max / min``; cells where one
    class has probability zero contribute nothing.
    """
    fd = np.asarray(f_d, dtype=float)
    fh = np.asarray(f_h, dtype=float)
    mult = np.ones_like(fd) if multiplicity is None else np.asarray(multiplicity, dtype=float)
    hi, lo = np.maximum(fd, fh), np.minimum(fd, fh)
    keep = lo > 0
    b = _per_cell_b(int(n), hi[keep], lo[keep])
    return -0.5 * float(np.sum(mult[keep] * lo[keep] * b))


def bias_oos(f_d, f_h, n: int, multiplicity=None) -> float:
    """Exact bias ``B_eo = 0.5 sum_x min(f_d, f_h) (r(x) - 1) a(n, lam(x), r(x))`` of the out-of-sample estimate.

    Written as ``0.5 sum_x (max - min) a`` so cells with a zero class
    probability (infinite ``r``) are handled directly.
    """
    fd = np.asarray(f_d, dtype=float)
    fh = np.asarray(f_h, dtype=float)
    mult = np.ones_like(fd) if multiplicity is None else np.asarray(multiplicity, dtype=float)
    hi, lo = np.maximum(fd, fh), np.minimum(fd, fh)
    keep = hi > lo
    a = np.array([_a(int(n), h, l) for h, l in zip(hi[keep].tolist(), lo[keep].tolist())])
    return 0.5 * float(np.sum(mult[keep] * (hi[keep] - lo[keep]) * a))


@dataclass
class CorrectedEstimate:
    value: float
    coverage_warning: bool = False


DEFAULT_FORM = "inverse"
DEFAULT_MODE = "plugin"
_FORMS = ("inverse", "literal")

# Fraction of an undecided cell's error charged to each class: (to f_d, to f_h).
_TIE_WEIGHTS = {"half": (0.5, 0.5), "healthy": (1.0, 0.0), "diseased": (0.0, 1.0)}


def theta_e_train_corrected(
    counts: CellCounts,
    truth=None,
    mode: str = DEFAULT_MODE,
    form: str = DEFAULT_FORM,
) -> CorrectedEstimate:
    """Bias-corrected training estimate over cells with ``min(n_dx, n_hx) > 0``.

    Each such cell's ``0.5 min(n_dx, n_hx) / n`` is rescaled using
    ``b = b(n, lam(x), r(x))``: the ``inverse`` form divides by
    ``max(1 - b, 0.05)``, undoing the expected per-cell shortfall of the
    minimum; the ``literal`` form multiplies by ``1 - b``, which moves the
    estimate further down and is kept for comparison only.

    In ``plugin`` mode ``lam(x) = max(n_dx, n_hx)`` and
    ``r(x) = max / min`` come from the counts.  In ``oracle`` mode they come
    from the true laws, ``truth.cell_probs``.
    """
    if form not in _FORMS:
        raise ValueError(f"form must be one of {_FORMS}, got {form!r}")
    if mode not in ("oracle", "plugin"):
        raise ValueError(f"mode must be 'oracle' or 'plugin', got {mode!r}")
    n = counts.balanced_n
    keys, nd, nh = counts.arrays()
    lo_count = np.minimum(nd, nh)
    keep = lo_count > 0
    if not keep.any():
        return CorrectedEstimate(0.0, coverage_warning=True)
    if mode == "oracle":
        if truth is None:
            raise ContractError("oracle mode needs the true cell probabilities")
        fd, fh = truth.cell_probs(keys[keep])
        hi, lo = np.maximum(fd, fh), np.minimum(fd, fh)
        b = np.zeros(len(hi))
        pos = lo > 0
        b[pos] = _per_cell_b(n, hi[pos], lo[pos])
    else:
        hi_c = np.maximum(nd, nh)[keep]
        b = np.array([_b(n, h, h / l) for h, l in zip(hi_c.tolist(), lo_count[keep].tolist())])
    if form == "literal":
        factor = 1.0 - b
    else:
        factor = 1.0 / np.maximum(1.0 - b, INVERSE_FLOOR)
    return CorrectedEstimate(0.5 * float(np.sum(lo_count[keep] * factor)) / n)


def theta_e_oos_oracle(counts: CellCounts, truth, ties: str = "half") -> float:
    """Out-of-sample error of the sample's majority rule under the true laws.

    The rule decides h where ``n_dx < n_hx`` and d where ``n_dx > n_hx``.
    Undecided cells (ties, including cells never observed) are resolved by
    ``ties``: ``"half"`` picks either class with probability 1/2, while
    ``"healthy"`` and ``"diseased"`` always pick that class.  Unseen cells are
    handled in closed form, so only observed cells need the true probabilities.
    """
    if truth is None:
        raise ContractError("the out-of-sample estimator needs the true distributions")
    if ties not in _TIE_WEIGHTS:
        raise ValueError(f"ties must be one of {tuple(_TIE_WEIGHTS)}, got {ties!r}")
    w_d, w_h = _TIE_WEIGHTS[ties]
    keys, nd, nh = counts.arrays()
    fd, fh = truth.cell_probs(keys)
    wrong_d = np.where(nd < nh, 1.0, np.where(nd == nh, w_d, 0.0))
    wrong_h = np.where(nd > nh, 1.0, np.where(nd == nh, w_h, 0.0))
    observed = float(np.sum(fd * wrong_d + fh * wrong_h))
    unseen = w_d * (1.0 - float(fd.sum())) + w_h * (1.0 - float(fh.sum()))
    return 0.5 * (observed + max(unseen, 0.0))


def theta_e_oos_corrected(counts: CellCounts, truth) -> float:
    """Out-of-sample estimate minus its exact bias ``B_eo``."""
    n = counts.balanced_n
    fd, fh, mult = truth.cell_distribution()
    return theta_e_oos_oracle(counts, truth) - bias_oos(fd, fh, n, mult)


def holdout_error(train: CellCounts, test: LabeledSample, subset=None, ties: str = "half") -> float:
    """Class-balanced error of the training majority rule on a test sample.

    Test rows in cells that are tied or unseen in training score 0.5 under
    ``ties="half"``; ``"healthy"`` / ``"diseased"`` decide that class instead.
    """
    if ties not in _TIE_WEIGHTS:
        raise ValueError(f"ties must be one of {tuple(_TIE_WEIGHTS)}, got {ties!r}")
    if not test.is_two_class:
        raise DataError("test sample needs two-class labels")
    if test.n_d == 0 or test.n_h == 0:
        raise ContractError("test sample must contain both classes")
    cols = test.resolve(train.subset if subset is None else subset)
    undecided = {"half": 0.0, "healthy": CONTROL, "diseased": CASE}[ties]
    rule = {k: (CASE if a > b else (CONTROL if a < b else undecided)) for k, (a, b) in train.cells.items()}
    decision = np.array([rule.get(tuple(row), undecided) for row in test.x[:, cols].tolist()])
    err = np.where(decision == 0.0, 0.5, (decision != test.y).astype(float))
    is_d = test.y == CASE
    return 0.5 * (err[is_d].mean() + err[~is_d].mean())


def i_score_weighted(counts: CellCounts, spec: CostPriorSpec) -> float:
    """Plug-in ``sum_x (pi_d c_d fhat_d(x) - pi_h c_h fhat_h(x))^2``."""
    if counts.n_d == 0 or counts.n_h == 0:
        raise ContractError("both classes must be present")
    wd = spec.pi_d * spec.c_d / counts.n_d
    wh = spec.pi_h * spec.c_h / counts.n_h
    return float(sum((wd * a - wh * b) ** 2 for a, b in counts.cells.values()))


class TabulatedTruth:
    """Known class-conditional laws given as a mapping ``cell -> (f_d, f_h)``."""

    def __init__(self, probs: Mapping[tuple, tuple[float, float]]):
        self.probs = {tuple(k): (float(a), float(b)) for k, (a, b) in probs.items()}
        for side in (0, 1):
            total = sum(v[side] for v in self.probs.values())
            if abs(total - 1.0) > 1e-9:
                raise DomainError(f"class-conditional law sums to {total}, not 1")

    def cell_probs(self, keys):
        pairs = [self.probs.get(tuple(k), (0.0, 0.0)) for k in np.asarray(keys).tolist()]
        arr = np.array(pairs, dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    def cell_distribution(self):
        arr = np.array(list(self.probs.values()), dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1], np.ones(len(arr))


def marginal_truth(model, cols) -> TabulatedTruth:
    """True laws of a disease model restricted to the SNP columns ``cols``."""
    m = model.n_snps
    if m > 12:
        raise ContractError(f"marginalizing a {m}-SNP model enumerates 3^{m} genotypes; too many")
    geno = np.array(list(itertools.product(range(3), repeat=m)), dtype=np.int64)
    fd, fh = model.cell_probs(geno)
    keys, inverse = np.unique(geno[:, list(cols)], axis=0, return_inverse=True)
    inverse = inverse.ravel()
    md = np.bincount(inverse, weights=fd, minlength=len(keys))
    mh = np.bincount(inverse, weights=fh, minlength=len(keys))
    return TabulatedTruth({tuple(k.tolist()): (a, b) for k, a, b in zip(keys, md, mh)})


@dataclass
class EstimateReport:
    """Every estimate available for one sample and variable subset."""

    subset: tuple[str, ...]
    n_d: int
    n_h: int
    n_cells: int
    i_score: float
    j_score: float
    theta_I_plugin: float
    bound_plugin: float
    theta_e_train: float | None = None
    theta_e_train_corrected: float | None = None
    theta_e_oos: float | None = None
    theta_e_oos_corrected: float | None = None
    bias_e: float | None = None
    bias_eo: float | None = None
    theta_e: float | None = None
    i_score_weighted: float | None = None
    mode: str = DEFAULT_MODE
    form: str = DEFAULT_FORM
    flags: list[str] = field(default_factory=list)

    def items(self) -> list[tuple[str, object]]:
        return [(k, v) for k, v in self.__dict__.items()]


def estimate(
    sample: LabeledSample,
    subset,
    truth=None,
    costs: CostPriorSpec | None = None,
    form: str = DEFAULT_FORM,
    mode: str | None = None,
) -> EstimateReport:
    """Compute every applicable statistic for ``subset`` of ``sample``.

    Balance-dependent estimators are skipped (and flagged) when the classes
    differ in size.  Oracle-only quantities are filled when ``truth`` is given.
    ``mode`` is the correction mode; it defaults to plugin.
    """
    mode = DEFAULT_MODE if mode is None else mode
    from .disease_model import error_bound

    counts = cell_counts(sample, subset)
    cols = counts.subset
    if truth is not None and hasattr(truth, "n_snps"):
        if truth.n_snps != sample.n_vars:
            raise ContractError(f"model has {truth.n_snps} SNPs but the sample has {sample.n_vars} variables")
        if cols != tuple(range(truth.n_snps)):
            truth = marginal_truth(truth, cols)
    i = i_score(sample, cols)
    n_half = len(sample.y) / 2.0
    report = EstimateReport(
        subset=tuple(sample.variable_names[c] for c in cols),
        n_d=counts.n_d,
        n_h=counts.n_h,
        n_cells=len(counts.cells),
        i_score=i,
        j_score=j_score(sample, cols),
        theta_I_plugin=i / n_half,
        bound_plugin=error_bound(i / n_half),
        mode=mode,
        form=form,
    )
    if costs is not None:
        report.i_score_weighted = i_score_weighted(counts, costs)
    if counts.n_d != counts.n_h:
        report.flags.append("unbalanced: training and out-of-sample estimators skipped")
        return report
    n = counts.n_d
    report.theta_e_train = theta_e_train(counts)
    corrected = theta_e_train_corrected(counts, truth, mode=report.mode, form=form)
    report.theta_e_train_corrected = corrected.value
    if corrected.coverage_warning:
        report.flags.append("coverage: no cell has both classes")
    if truth is not None:
        fd, fh, mult = truth.cell_distribution()
        report.theta_e = 0.5 * float(np.sum(mult * np.minimum(fd, fh)))
        report.bias_e = bias_training(fd, fh, n, mult)
        report.bias_eo = bias_oos(fd, fh, n, mult)
        report.theta_e_oos = theta_e_oos_oracle(counts, truth)
        report.theta_e_oos_corrected = report.theta_e_oos - report.bias_eo
    return report
