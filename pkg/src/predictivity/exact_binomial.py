"""Exact functionals of a pair of independent binomial counts.

For independent ``Z ~ Bin(n, p_z)`` and ``W ~ Bin(n, p_w)`` this module
evaluates

- ``E(min(Z, W)) = sum_{k>=1} Pr(Z >= k) Pr(W >= k)``
- ``Pr(Z < W) + 0.5 Pr(Z = W)``

over the full support, with no truncation or normal approximation, and
derives from them the two per-cell bias functions used by the error-rate
estimators:

``b(n, lam, r)``
    relative shortfall of ``E(min(Z, W))`` below ``n p_w``, where
    ``lam = n p_z`` and ``r = p_z / p_w >= 1``.
``a(n, lam, r)``
    ``Pr(Z < W) + 0.5 Pr(Z = W)`` on the same parametrisation.

Probabilities are accumulated in log space through ``gammaln`` and the
tail sums are taken from the side that keeps small tails accurate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = [
    "BinomialPair",
    "BiasPoint",
    "binomial_pmf",
    "expected_min",
    "prob_less_half_ties",
    "neg_rel_bias",
    "tie_half_prob",
    "bias_grid",
]

# Negative b below this is reported, smaller excursions are rounding noise.
NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BinomialPair:
    """Two independent binomials sharing the trial count ``n``."""

    n: int
    p_z: float
    p_w: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        for name in ("p_z", "p_w"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class BiasPoint:
    """One cell of a bias table."""

    n: int
    lam: float
    r: float
    b: float
    a: float


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Probability mass of ``Bin(n, p)`` on ``0..n``."""
    k = np.arange(n + 1)
    if p == 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p == 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(logc + k * math.log(p) + (n - k) * math.log1p(-p))


def _upper_tail(pmf: np.ndarray) -> np.ndarray:
    """``Pr(X >= k)`` for ``k = 0..n``, summed from the top."""
    return np.cumsum(pmf[::-1])[::-1]


def expected_min(pair: BinomialPair) -> float:
    """Exact ``E(min(Z, W))`` for an independent binomial pair.

    Uses ``E(min) = sum_{k=1..n} Pr(Z >= k) Pr(W >= k)``, which is O(n).

    >>> expected_min(BinomialPair(1, 0.5, 0.5))
    0.25
    """
    n = pair.n
    sz = _upper_tail(binomial_pmf(n, pair.p_z))
    sw = _upper_tail(binomial_pmf(n, pair.p_w))
    value = float(np.dot(sz[1:], sw[1:]))
    return min(value, n * min(pair.p_z, pair.p_w))


def prob_less_half_ties(pair: BinomialPair) -> float:
    """``Pr(Z < W) + 0.5 Pr(Z = W)`` for an independent binomial pair."""
    pz = binomial_pmf(pair.n, pair.p_z)
    pw = binomial_pmf(pair.n, pair.p_w)
    # Written as 1/2 + (Pr(Z<W) - Pr(Z>W)) / 2; the two terms are computed the
    # same way, so an exchangeable pair gives exactly 1/2.
    less = float(np.dot(pw, np.cumsum(pz) - pz))
    greater = float(np.dot(pz, np.cumsum(pw) - pw))
    value = 0.5 + 0.5 * (less - greater)
    return min(max(value, 0.0), 1.0)


def _pair_from_lambda(n: int, lam: float, r: float) -> BinomialPair:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not lam >= 0 or math.isinf(lam):
        raise DomainError(f"lambda must be a nonnegative real, got {lam!r}")
    if lam > n:
        raise DomainError(f"lambda={lam} exceeds n={n}")
    if not r >= 1 or math.isinf(r):
        raise DomainError(f"r must be a finite real >= 1, got {r!r}")
    p_z = lam / n
    p_w = p_z / r
    if p_w == 0.0:
        raise DomainError("p_w = lambda / (n r) is zero; the relative bias is undefined")
    return BinomialPair(int(n), p_z, p_w)


def neg_rel_bias(n: int, lam: float, r: float) -> float:
    """Negative relative bias ``b(n, lam, r)`` of ``min(Z, W)`` against ``n p_w``.

    ``p_z = lam / n`` and ``p_w = p_z / r``.  The result lies in ``[0, 1]``:
    values near 1 mean the smaller count is almost always lost to the
    minimum, values near 0 mean the two counts are well separated.

    Raises:
        DomainError: if ``lam > n``, ``r < 1`` or ``p_w = 0``.
    """
    pair = _pair_from_lambda(n, lam, r)
    mean_w = pair.n * pair.p_w
    b = (mean_w - expected_min(pair)) / mean_w
    if b < 0.0:
        if b < -NEGATIVE_TOLERANCE:
            warnings.warn(
                f"b({n}, {lam}, {r}) = {b:.3e} < 0 before clamping", RuntimeWarning, stacklevel=2
            )
        b = 0.0
    return min(b, 1.0)


def tie_half_prob(n: int, lam: float, r: float) -> float:
    """``a(n, lam, r) = Pr(Z < W) + 0.5 Pr(Z = W)`` with ``p_z = lam/n``, ``p_w = p_z/r``."""
    return prob_less_half_ties(_pair_from_lambda(n, lam, r))


def bias_grid(
    n_list: Iterable[int], lambda_list: Sequence[float], r_list: Sequence[float]
) -> list[BiasPoint]:
    """Evaluate ``b`` and ``a`` over a cross-product grid.

    Ordering is ``n`` outermost, then ``lambda``, then ``r`` (row-major in
    the printed table layout).  A failing cell re-raises with its
    coordinates attached.
    """
    points = []
    for n in n_list:
        for lam in lambda_list:
            for r in r_list:
                try:
                    b = neg_rel_bias(n, lam, r)
                    a = tie_half_prob(n, lam, r)
                except DomainError as exc:
                    raise DomainError(f"cell (n={n}, lambda={lam}, r={r}): {exc}") from exc
                points.append(BiasPoint(int(n), float(lam), float(r), b, a))
    return points
