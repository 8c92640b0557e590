"""Generative SNP case-control model and its exact oracle parameters.

A :class:`DiseaseModel` is a group of independent SNPs with given minor
allele frequencies.  A subset of them (the influential SNPs ``U``) determines
the probability ``t(u) = P(healthy | u)``; the remaining SNPs ``V`` are noise.

Every oracle parameter is computed on the ``3**len(influential)`` tuple space.
Noise SNPs enter only through the closed-form factor ``sum_v f_V(v)**2``,
because ``f_d(x) = f_{U|d}(u) f_V(v)`` factorises.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DegenerateModelError, DomainError

__all__ = [
    "DiseaseModel",
    "ConditionalTables",
    "OracleParams",
    "CostPriorSpec",
    "InequalityReport",
    "genotype_dist",
    "snp_noise_factor",
    "conditional_tables",
    "theta_e",
    "theta_I_family",
    "error_bound",
    "oracle_params",
    "weighted_cost",
    "max_sumsq_bound",
    "verify_inequality",
    "maf_grid",
    "LEX_ORDER",
    "FIRST_FASTEST_ORDER",
    "LISTED_ORDER",
    "SINGLE_LOCUS_PENETRANCE",
    "TWO_LOCUS_PENETRANCE",
    "WORKED_EXAMPLE_ONE",
    "WORKED_EXAMPLE_TWO",
]

# Two-locus genotype orders (u1, u2) used by the penetrance catalogs.
LEX_ORDER = tuple(itertools.product(range(3), repeat=2))  # u2 varies fastest
FIRST_FASTEST_ORDER = tuple((u1, u2) for u2, u1 in LEX_ORDER)  # u1 varies fastest
LISTED_ORDER = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1), (2, 1), (1, 2), (2, 2))

# t(u) = P(h | u) for u = 0, 1, 2 with one influential SNP.
SINGLE_LOCUS_PENETRANCE = {
    "t1": (0.97, 0.4, 0.2),
    "t2": (0.97, 0.5, 0.3),
    "t3": (0.97, 0.6, 0.4),
    "t4": (0.90, 0.4, 0.2),
    "t5": (0.90, 0.5, 0.3),
    "t6": (0.85, 0.4, 0.2),
    "t7": (0.90, 0.6, 0.4),
    "t8": (0.85, 0.5, 0.3),
    "t9": (0.80, 0.4, 0.2),
    "t10": (0.85, 0.6, 0.4),
    "t11": (0.80, 0.5, 0.3),
    "t12": (0.80, 0.6, 0.4),
}

# t(u1, u2) for two influential SNPs, values listed in LISTED_ORDER.
TWO_LOCUS_PENETRANCE = {
    "t1": (0.99, 0.20, 0.15, 0.10, 0.08, 0.02, 0.010, 0.004, 0.001),
    "t2": (0.98, 0.20, 0.15, 0.15, 0.10, 0.01, 0.005, 0.005, 0.001),
    "t3": (0.95, 0.40, 0.30, 0.20, 0.10, 0.02, 0.010, 0.005, 0.002),
    "t4": (0.90, 0.40, 0.30, 0.20, 0.10, 0.02, 0.010, 0.005, 0.002),
    "t5": (0.95, 0.60, 0.40, 0.40, 0.20, 0.02, 0.010, 0.005, 0.001),
    "t6": (0.95, 0.60, 0.50, 0.30, 0.10, 0.05, 0.020, 0.015, 0.010),
    "t7": (0.99, 0.75, 0.75, 0.70, 0.70, 0.01, 0.008, 0.008, 0.002),
    "t8": (0.90, 0.60, 0.50, 0.30, 0.10, 0.05, 0.020, 0.015, 0.010),
    "t9": (0.95, 0.75, 0.70, 0.60, 0.50, 0.40, 0.350, 0.300, 0.200),
}


def genotype_dist(p: float) -> np.ndarray:
    """Hardy-Weinberg genotype probabilities ``((1-p)^2, 2p(1-p), p^2)``.

    >>> genotype_dist(0.2).round(4).tolist()
    [0.64, 0.32, 0.04]
    """
    if not (0.0 <= p <= 0.5):
        raise DomainError(f"minor allele frequency must lie in [0, 0.5], got {p!r}")
    q = 1.0 - p
    return np.array([q * q, 2.0 * p * q, p * p])


def snp_noise_factor(p: float) -> float:
    """``sum_v f(v)^2`` for one SNP: ``p^4 + (2p(1-p))^2 + (1-p)^4``."""
    g = genotype_dist(p)
    return float(np.dot(g, g))


@dataclass(frozen=True)
class DiseaseModel:
    """A group of independent SNPs with a penetrance table on the influential ones.

    Args:
        maf: Minor allele frequency of every SNP in the group, each in [0, 0.5].
        influential: Indices into ``maf`` of the SNPs that drive the outcome.
        penetrance: ``t(u) = P(h | u)`` for every genotype tuple ``u`` of the
            influential SNPs (tuples ordered like ``influential``).
    """

    maf: tuple[float, ...]
    influential: tuple[int, ...]
    penetrance: Mapping[tuple[int, ...], float] = field(hash=False)

    def __post_init__(self):
        maf = tuple(float(p) for p in self.maf)
        infl = tuple(int(i) for i in self.influential)
        object.__setattr__(self, "maf", maf)
        object.__setattr__(self, "influential", infl)
        for p in maf:
            genotype_dist(p)
        if not infl:
            raise DomainError("at least one influential SNP is required")
        if len(set(infl)) != len(infl) or min(infl) < 0 or max(infl) >= len(maf):
            raise DomainError(f"influential indices {infl} invalid for {len(maf)} SNPs")
        table = {tuple(int(d) for d in u): float(t) for u, t in dict(self.penetrance).items()}
        expected = set(itertools.product(range(3), repeat=len(infl)))
        if set(table) != expected:
            missing = sorted(expected - set(table))
            extra = sorted(set(table) - expected)
            raise DomainError(f"penetrance must cover all 3^{len(infl)} tuples; missing {missing}, extra {extra}")
        for u, t in table.items():
            if not (0.0 <= t <= 1.0):
                raise DomainError(f"t{u} = {t} outside [0, 1]")
        object.__setattr__(self, "penetrance", table)

    @classmethod
    def from_values(cls, maf, influential, values, order=None) -> "DiseaseModel":
        """Build from a flat list of penetrances.

        ``order`` lists the genotype tuples matching ``values``; by default
        the lexicographic order ``00, 01, 02, 10, ...``.
        """
        k = len(tuple(influential))
        if order is None:
            order = list(itertools.product(range(3), repeat=k))
        order = [tuple(u) for u in order]
        if len(order) != len(values):
            raise DomainError(f"{len(values)} penetrance values for {len(order)} genotype tuples")
        return cls(tuple(maf), tuple(influential), dict(zip(order, values)))

    @property
    def n_snps(self) -> int:
        return len(self.maf)

    @property
    def noise(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.n_snps) if j not in self.influential)

    def tuples(self) -> list[tuple[int, ...]]:
        """Influential genotype tuples in lexicographic order."""
        return list(itertools.product(range(3), repeat=len(self.influential)))

    def with_noise_snps(self, mafs: Sequence[float]) -> "DiseaseModel":
        """Append further non-influential SNPs to the group."""
        return DiseaseModel(self.maf + tuple(mafs), self.influential, self.penetrance)

    def cell_probs(self, genotypes) -> tuple[np.ndarray, np.ndarray]:
        """``f_d(x)`` and ``f_h(x)`` for rows of full-group genotypes.

        ``genotypes`` is an integer array of shape ``(cells, n_snps)`` with
        columns in SNP order.
        """
        geno = np.asarray(genotypes, dtype=np.int64)
        if geno.ndim != 2 or geno.shape[1] != self.n_snps:
            raise DomainError(f"expected genotype rows of width {self.n_snps}")
        tables = conditional_tables(self)
        u_index = np.zeros(len(geno), dtype=np.int64)
        for col in self.influential:
            u_index = u_index * 3 + geno[:, col]
        f_v = np.ones(len(geno))
        for col in self.noise:
            f_v *= genotype_dist(self.maf[col])[geno[:, col]]
        return tables.f_u_given_d[u_index] * f_v, tables.f_u_given_h[u_index] * f_v

    def cell_distribution(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Class-conditional probabilities over all cells of positive mass.

        Cells that share ``u`` and the same noise probability ``f_V(v)`` are
        merged; the third array holds each merged cell's multiplicity.
        Returns ``(f_d, f_h, multiplicity)``.
        """
        tables = conditional_tables(self)
        f_v = np.ones(1)
        for col in self.noise:
            g = genotype_dist(self.maf[col])
            f_v = np.outer(f_v, g[g > 0]).ravel()
        # products of the same factors in different orders differ in the last ulp
        values, counts = np.unique(np.round(f_v, 15), return_counts=True)
        f_d = np.outer(tables.f_u_given_d, values).ravel()
        f_h = np.outer(tables.f_u_given_h, values).ravel()
        mult = np.tile(counts, len(tables.f_u_given_d)).astype(float)
        keep = (f_d > 0) | (f_h > 0)
        return f_d[keep], f_h[keep], mult[keep]


@dataclass(frozen=True)
class ConditionalTables:
    """Outcome prevalence and class-conditional laws of the influential tuple."""

    tuples: tuple[tuple[int, ...], ...]
    f_u: np.ndarray
    f_y_d: float
    f_u_given_d: np.ndarray
    f_u_given_h: np.ndarray
    noise_factor: float

    @property
    def f_y_h(self) -> float:
        return 1.0 - self.f_y_d

    @property
    def likelihood_ratios(self) -> np.ndarray:
        """``f_{U|Y}(u|h) / f_{U|Y}(u|d)``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.f_u_given_h / self.f_u_given_d


def conditional_tables(model: DiseaseModel) -> ConditionalTables:
    """Bayes-invert the penetrance table into ``f_{U|Y}`` for both classes."""
    tuples = model.tuples()
    per_snp = [genotype_dist(model.maf[j]) for j in model.influential]
    f_u = np.array([math.prod(per_snp[i][g] for i, g in enumerate(u)) for u in tuples])
    t = np.array([model.penetrance[u] for u in tuples])
    f_y_h = float(np.dot(t, f_u))
    f_y_d = 1.0 - f_y_h
    if f_y_h <= 0.0 or f_y_d <= 0.0:
        raise DegenerateModelError(f"outcome class has zero probability (f_Y(h) = {f_y_h})")
    noise = math.prod(snp_noise_factor(model.maf[j]) for j in model.noise)
    return ConditionalTables(
        tuples=tuple(tuples),
        f_u=f_u,
        f_y_d=f_y_d,
        f_u_given_d=(1.0 - t) * f_u / f_y_d,
        f_u_given_h=t * f_u / f_y_h,
        noise_factor=noise,
    )


def theta_e(model: DiseaseModel) -> float:
    """Bayes error ``0.5 sum_u min(f_{U|d}(u), f_{U|h}(u))`` with equal priors and costs."""
    tables = conditional_tables(model)
    return 0.5 * float(np.minimum(tables.f_u_given_d, tables.f_u_given_h).sum())


def theta_I_family(model: DiseaseModel) -> tuple[float, float]:
    """Return ``(theta_I0, theta_I)``.

    ``theta_I0`` is half the squared distance between the influential-tuple
    laws; ``theta_I`` multiplies it by the noise factor of the other SNPs.
    """
    tables = conditional_tables(model)
    diff = tables.f_u_given_d - tables.f_u_given_h
    theta_i0 = 0.5 * float(np.dot(diff, diff))
    return theta_i0, theta_i0 * tables.noise_factor


def error_bound(theta: float) -> float:
    """Upper bound ``0.5 - sqrt(theta / 4)`` on the Bayes error, floored at 0."""
    if theta < 0 or math.isnan(theta):
        raise DomainError(f"theta must be nonnegative, got {theta!r}")
    return max(0.0, 0.5 - math.sqrt(theta / 4.0))


@dataclass(frozen=True)
class OracleParams:
    theta_e: float
    theta_c: float
    theta_I: float
    theta_I0: float
    bound_on_theta_e: float
    f_y_d: float
    noise_factor: float


def oracle_params(model: DiseaseModel) -> OracleParams:
    """All exact predictivity parameters of a model in one record."""
    tables = conditional_tables(model)
    te = theta_e(model)
    ti0, ti = theta_I_family(model)
    return OracleParams(
        theta_e=te,
        theta_c=1.0 - te,
        theta_I=ti,
        theta_I0=ti0,
        bound_on_theta_e=error_bound(ti0),
        f_y_d=tables.f_y_d,
        noise_factor=tables.noise_factor,
    )


@dataclass(frozen=True)
class CostPriorSpec:
    """Prior class probabilities and misclassification costs."""

    pi_d: float = 0.5
    c_d: float = 1.0
    c_h: float = 1.0
    pi_h: float | None = None

    def __post_init__(self):
        pi_h = 1.0 - self.pi_d if self.pi_h is None else float(self.pi_h)
        object.__setattr__(self, "pi_h", pi_h)
        if not (0.0 <= self.pi_d <= 1.0) or abs(self.pi_d + pi_h - 1.0) > 1e-12:
            raise DomainError(f"priors must be probabilities summing to 1 (pi_d={self.pi_d}, pi_h={pi_h})")
        if self.c_d < 0 or self.c_h < 0:
            raise DomainError("costs must be nonnegative")

    @property
    def total(self) -> float:
        """``C = pi_d c_d + pi_h c_h``, the cost of always being wrong."""
        return self.pi_d * self.c_d + self.pi_h * self.c_h

    @classmethod
    def parse(cls, text: str) -> "CostPriorSpec":
        """Parse ``"pi_d=0.3,c_d=2,c_h=1"``."""
        fields = {}
        for part in text.replace(";", ",").split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, value = part.partition("=")
            if not sep or key.strip() not in {"pi_d", "pi_h", "c_d", "c_h"}:
                raise DataError(f"bad cost/prior field {part!r}")
            fields[key.strip()] = float(value)
        if "pi_d" not in fields and "pi_h" in fields:
            fields["pi_d"] = 1.0 - fields["pi_h"]
        return cls(**fields)


def weighted_cost(dist, spec: CostPriorSpec) -> tuple[float, float]:
    """Expected cost of the Bayes rule and the weighted squared-difference parameter.

    ``dist`` is a :class:`DiseaseModel` or a pair ``(f_d, f_h)`` of arrays.
    Returns ``(theta_C, sum_x (pi_d c_d f_d - pi_h c_h f_h)^2)``.
    """
    wd = spec.pi_d * spec.c_d
    wh = spec.pi_h * spec.c_h
    if isinstance(dist, DiseaseModel):
        tables = conditional_tables(dist)
        fd, fh = tables.f_u_given_d, tables.f_u_given_h
        scale = tables.noise_factor
    else:
        fd, fh = (np.asarray(a, dtype=float) for a in dist)
        scale = 1.0
    diff = wd * fd - wh * fh
    theta_c = float(np.minimum(wd * fd, wh * fh).sum())
    return theta_c, float(np.dot(diff, diff)) * scale


def max_sumsq_bound(a: float) -> float:
    """Largest ``sum x_i^2`` over vectors with ``sum |x_i| = 1`` and ``sum x_i = a``."""
    if abs(a) > 1.0 + 1e-12:
        raise DomainError(f"|a| = {abs(a)} exceeds 1")
    return (1.0 + a * a) / 2.0


@dataclass(frozen=True)
class InequalityReport:
    a: float
    sum_sq: float
    bound: float
    slack: float
    holds: bool
    equality: bool


def verify_inequality(x) -> InequalityReport:
    """Check ``sum x^2 <= (1 + a^2) / 2`` after scaling ``x`` to unit l1 norm.

    ``equality`` is structural: at most one positive and at most one negative
    nonzero component, which is exactly when the bound is attained.
    """
    x = np.asarray(x, dtype=float)
    norm = np.abs(x).sum()
    if norm == 0:
        raise DomainError("zero vector has no l1 normalization")
    x = x / norm
    a = float(x.sum())
    sum_sq = float(np.dot(x, x))
    bound = max_sumsq_bound(a)
    return InequalityReport(
        a=a,
        sum_sq=sum_sq,
        bound=bound,
        slack=bound - sum_sq,
        holds=sum_sq <= bound + 1e-12,
        equality=int((x > 0).sum()) <= 1 and int((x < 0).sum()) <= 1,
    )


def maf_grid(points: int = 60, low: float = 0.001, high: float = 0.3) -> np.ndarray:
    """Log-spaced minor allele frequencies for the theta_I0 versus theta_e curves."""
    return np.logspace(math.log10(low), math.log10(high), points)


WORKED_EXAMPLE_ONE = DiseaseModel.from_values((0.2,) * 6, (0,), (0.97, 0.60, 0.40))
WORKED_EXAMPLE_TWO = DiseaseModel.from_values(
    (0.2,) * 6, (0, 1), (0.95, 0.75, 0.7, 0.60, 0.50, 0.20, 0.15, 0.10, 0.05), order=LISTED_ORDER
)
