"""Partition Retention: backward dropping inside many random variable groups.

Each group is reduced by repeatedly removing the member whose removal raises
the I score most, stopping when no single removal raises it.  Variables that
survive a large share of the groups they appear in are the candidates.

I is computed from a table of per-cell sums of the standardized outcome.
Removing a variable marginalizes that table over one axis, so a whole
backward pass touches the raw rows only once.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DomainError
from .estimators import LabeledSample
from .simulator import WORKERS_ENV, stream

__all__ = [
    "RetentionConfig",
    "Module",
    "DropStep",
    "DropTrace",
    "RetentionResult",
    "backward_drop",
    "random_groups",
    "retention_scores",
    "resuscitate",
    "staged_selection",
    "default_num_groups",
]

# Largest cell space handled as a dense array; larger groups use sparse codes.
DENSE_LIMIT = 1 << 20


def default_num_groups(m: int, k: int) -> int:
    """Enough groups for about 20 expected appearances per variable."""
    return max(1, math.ceil(20 * m / k))


@dataclass(frozen=True)
class RetentionConfig:
    group_size: int = 6
    num_groups: int | None = None
    rounds: int = 1
    top_fraction: float = 0.05
    mix_count: int | None = None
    stages: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 1:
            raise DomainError("group_size must be >= 1")
        if self.num_groups is not None and self.num_groups < 1:
            raise DomainError("num_groups must be >= 1")
        if self.rounds < 0:
            raise DomainError("rounds must be >= 0")
        if not 0 < self.top_fraction <= 1:
            raise DomainError("top_fraction must lie in (0, 1]")
        if self.mix_count is not None and not 0 <= self.mix_count <= self.group_size:
            raise DomainError("mix_count must lie in [0, group_size]")
        if self.stages is not None:
            if not self.stages or any(int(s) < 1 for s in self.stages):
                raise DomainError("stages must be a nonempty list of group sizes >= 1")
            object.__setattr__(self, "stages", tuple(int(s) for s in self.stages))
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")

    def groups_for(self, m: int, k: int) -> int:
        return self.num_groups if self.num_groups is not None else default_num_groups(m, k)

    def mix_for(self, k: int) -> int:
        return min(k, self.mix_count if self.mix_count is not None else k // 2)


@dataclass(frozen=True)
class DropStep:
    dropped: int
    i_before: float
    i_after: float


@dataclass
class DropTrace:
    """Backward pass over one group.  ``singleton`` marks a lone survivor."""

    group: tuple[int, ...]
    steps: list[DropStep]
    retained: tuple[int, ...]
    i_final: float
    singleton: bool = False


@dataclass(frozen=True)
class Module:
    variables: tuple[int, ...]
    i_score: float
    count: int


@dataclass
class RetentionResult:
    """Per-variable survival counts plus the distinct retained sets.

    ``frequency`` is survivals over appearances; variables that never appeared
    have frequency 0 and ``evaluated`` False.  ``mean_i`` is the average I of
    the retained sets a variable belonged to, used to break frequency ties.
    ``stage_reached`` is the last stage at which the variable was scored.
    """

    appearances: np.ndarray
    survivals: np.ndarray
    i_total: np.ndarray
    modules: list[Module]
    variable_names: tuple[str, ...] = ()
    stage_reached: np.ndarray | None = None
    trace: list[DropTrace] | None = None
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.stage_reached is None:
            self.stage_reached = np.zeros(len(self.appearances), dtype=np.int64)

    @property
    def evaluated(self) -> np.ndarray:
        return self.appearances > 0

    @property
    def frequency(self) -> np.ndarray:
        return np.divide(
            self.survivals, self.appearances,
            out=np.zeros(len(self.appearances)), where=self.appearances > 0,
        )

    @property
    def mean_i(self) -> np.ndarray:
        return np.divide(
            self.i_total, self.survivals,
            out=np.zeros(len(self.survivals)), where=self.survivals > 0,
        )

    def ranking(self) -> np.ndarray:
        """Variable indices, best first: stage reached, frequency, mean I, index."""
        idx = np.arange(len(self.appearances))
        return np.lexsort((idx, -self.mean_i, -self.frequency, -self.stage_reached))

    def top(self, count: int) -> list[int]:
        return [int(v) for v in self.ranking()[:count]]


class _Scorer:
    """I scores of column subsets of one sample."""

    def __init__(self, sample: LabeledSample):
        x = np.asarray(sample.x)
        if x.size and (not np.issubdtype(x.dtype, np.integer) or x.min() < 0):
            raise ContractError("variables must be coded as nonnegative integers")
        self.x = x.astype(np.int64)
        self.z = sample.standardized_y()
        self.n0 = len(self.z)
        self.radix = self.x.max(axis=0) + 1 if x.size else np.ones(x.shape[1], dtype=np.int64)

    def table(self, group: tuple[int, ...]):
        shape = tuple(int(self.radix[g]) for g in group)
        size = math.prod(shape)
        if size <= DENSE_LIMIT:
            codes = np.ravel_multi_index(tuple(self.x[:, g] for g in group), shape)
            return np.bincount(codes, weights=self.z, minlength=size).reshape(shape)
        keys, inverse = np.unique(self.x[:, list(group)], axis=0, return_inverse=True)
        return keys, np.bincount(inverse.ravel(), weights=self.z)

    def score(self, table) -> float:
        sums = table[1] if isinstance(table, tuple) else table
        return float(np.sum(sums * sums)) / self.n0

    @staticmethod
    def drop(table, axis: int):
        if not isinstance(table, tuple):
            return table.sum(axis=axis)
        keys, sums = table
        reduced = np.delete(keys, axis, axis=1)
        if reduced.shape[1] == 0:
            return np.zeros((1, 0), dtype=keys.dtype), np.array([sums.sum()])
        new_keys, inverse = np.unique(reduced, axis=0, return_inverse=True)
        return new_keys, np.bincount(inverse.ravel(), weights=sums)


def _backward(scorer: _Scorer, group) -> DropTrace:
    members = sorted(set(int(g) for g in group))
    if not members:
        raise ContractError("group is empty")
    if len(members) != len(group):
        raise ContractError(f"group {tuple(group)} has duplicates")
    table = scorer.table(tuple(members))
    current = scorer.score(table)
    steps = []
    while len(members) > 1:
        reduced = [scorer.drop(table, pos) for pos in range(len(members))]
        scores = np.array([scorer.score(t) for t in reduced])
        best = int(np.argmax(scores))  # first maximum, so the lowest column index
        if not scores[best] > current:
            break
        steps.append(DropStep(members[best], current, float(scores[best])))
        del members[best]
        table, current = reduced[best], float(scores[best])
    if len(members) == 1 and current <= 0:
        return DropTrace(tuple(group), steps, (), current)
    return DropTrace(tuple(group), steps, tuple(members), current, singleton=len(members) == 1)


def backward_drop(sample: LabeledSample, group) -> DropTrace:
    """Backward dropping on one group of column indices (or names).

    Every recorded step strictly raised I, and no single removal from the
    retained set raises it further.  Exact ties go to the lowest column index.
    A single variable is kept when its I is positive.
    """
    cols = sample.resolve(group) if len(group) else ()
    return _backward(_Scorer(sample), cols)


def random_groups(m: int, k: int, B: int, seed: int, key: tuple[int, ...] = ()) -> list[tuple[int, ...]]:
    """``B`` groups of ``k`` distinct variables from ``range(m)``.

    Group ``g`` is drawn from its own stream ``(seed, *key, g)``.
    """
    if k > m:
        raise DomainError(f"group size {k} exceeds the number of variables {m}")
    if k < 1 or B < 1:
        raise DomainError("k and B must be >= 1")
    return [tuple(int(v) for v in stream(seed, *key, g).choice(m, size=k, replace=False)) for g in range(B)]


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run_chunk(sample: LabeledSample, groups) -> list[DropTrace]:
    scorer = _Scorer(sample)
    return [_backward(scorer, g) for g in groups]


def _run_groups(sample: LabeledSample, groups) -> list[DropTrace]:
    workers = _worker_count()
    if workers == 1 or len(groups) < 2 * workers:
        return _run_chunk(sample, groups)
    size = math.ceil(len(groups) / workers)
    chunks = [groups[i:i + size] for i in range(0, len(groups), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [sample] * len(chunks), chunks))
    return [t for part in parts for t in part]


def _tally(traces, m: int, names, keep_trace: bool) -> RetentionResult:
    appearances = np.zeros(m, dtype=np.int64)
    survivals = np.zeros(m, dtype=np.int64)
    i_total = np.zeros(m)
    seen: dict[tuple[int, ...], list] = {}
    flags = []
    for t in traces:
        appearances[list(t.group)] += 1
        if t.retained:
            survivals[list(t.retained)] += 1
            i_total[list(t.retained)] += t.i_final
            entry = seen.setdefault(t.retained, [t.i_final, 0])
            entry[1] += 1
    n_single = sum(t.singleton for t in traces)
    if n_single:
        flags.append(f"{n_single} groups reduced to a single retained variable")
    modules = [Module(k, v[0], v[1]) for k, v in seen.items()]
    modules.sort(key=lambda mod: (-mod.i_score, mod.variables))
    return RetentionResult(
        appearances, survivals, i_total, modules, tuple(names),
        trace=list(traces) if keep_trace else None, flags=flags,
    )


def _merge(a: RetentionResult, b: RetentionResult) -> RetentionResult:
    modules = {mod.variables: mod for mod in a.modules}
    for mod in b.modules:
        old = modules.get(mod.variables)
        modules[mod.variables] = mod if old is None else Module(mod.variables, mod.i_score, old.count + mod.count)
    merged = sorted(modules.values(), key=lambda mod: (-mod.i_score, mod.variables))
    trace = None if a.trace is None or b.trace is None else a.trace + b.trace
    return RetentionResult(
        a.appearances + b.appearances, a.survivals + b.survivals, a.i_total + b.i_total,
        merged, a.variable_names, a.stage_reached.copy(), trace, a.flags + b.flags,
    )


def _score_groups(sample, groups, keep_trace) -> RetentionResult:
    return _tally(_run_groups(sample, groups), sample.n_vars, sample.variable_names, keep_trace)


def retention_scores(
    sample: LabeledSample, config: RetentionConfig, keep_trace: bool = False, key: tuple[int, ...] = (0, 0)
) -> RetentionResult:
    """Backward dropping over ``config.num_groups`` random groups of ``config.group_size``."""
    m, k = sample.n_vars, config.group_size
    groups = random_groups(m, k, config.groups_for(m, k), config.seed, key)
    return _score_groups(sample, groups, keep_trace)


def _top_set(result: RetentionResult, fraction: float, pool=None) -> list[int]:
    pool = set(range(len(result.appearances))) if pool is None else {int(v) for v in pool}
    ranked = [int(v) for v in result.ranking() if v in pool and result.survivals[v] > 0]
    return ranked[: max(1, math.ceil(fraction * len(pool)))]


def resuscitate(
    sample: LabeledSample,
    result: RetentionResult,
    config: RetentionConfig,
    round_index: int = 1,
    pool=None,
    key_prefix: tuple[int, ...] = (0,),
    keep_trace: bool = False,
) -> RetentionResult:
    """One resuscitation round, merged into ``result``.

    Each new group takes ``mix_count`` variables from the top ``top_fraction``
    by retention frequency and fills the rest from the other variables, so
    weak variables get tested alongside strong partners.  Counts from all
    rounds are pooled, so frequencies stay appearance-weighted.
    """
    pool = list(range(sample.n_vars)) if pool is None else [int(v) for v in pool]
    top = _top_set(result, config.top_fraction, pool)
    if not top:
        raise ContractError("no variable survived; nothing to resuscitate with")
    top_members = set(top)
    rest = [v for v in pool if v not in top_members]
    k = min(config.group_size, len(pool))
    n_top = min(config.mix_for(k), len(top))
    n_rest = min(k - n_top, len(rest))
    n_top = min(k - n_rest, len(top))
    groups = []
    top_arr, rest_arr = np.array(top), np.array(rest, dtype=np.int64)
    for g in range(config.groups_for(len(pool), k)):
        rng = stream(config.seed, *key_prefix, round_index, g)
        chosen = list(rng.choice(top_arr, size=n_top, replace=False))
        if n_rest:
            chosen += list(rng.choice(rest_arr, size=n_rest, replace=False))
        groups.append(tuple(int(v) for v in chosen))
    return _merge(result, _score_groups(sample, groups, keep_trace))


def _one_stage(sample, config, k, pool, stage, keep_trace) -> RetentionResult:
    pool_arr = np.asarray(pool, dtype=np.int64)
    k = min(k, len(pool_arr))
    groups = [
        tuple(int(pool_arr[i]) for i in g)
        for g in random_groups(len(pool_arr), k, config.groups_for(len(pool_arr), k), config.seed, (stage, 0))
    ]
    result = _score_groups(sample, groups, keep_trace)
    stage_cfg = replace(config, group_size=k)
    for r in range(1, config.rounds + 1):
        result = resuscitate(sample, result, stage_cfg, r, pool_arr, (stage,), keep_trace)
    return result


def staged_selection(sample: LabeledSample, config: RetentionConfig, keep_trace: bool = False) -> RetentionResult:
    """Run every stage of ``config.stages`` (default: one stage at ``group_size``).

    Each stage scores its pool with fresh random groups plus ``rounds``
    resuscitation rounds.  The next pool is the best
    ``max(2k, ceil(top_fraction * pool))`` variables among survivors, with
    ``k`` the next stage's group size.  Earlier-stage counts are kept for
    variables that drop out of the pool.
    """
    stages = config.stages or (config.group_size,)
    pool = list(range(sample.n_vars))
    result = None
    for s, k in enumerate(stages):
        stage_result = _one_stage(sample, config, k, pool, s, keep_trace)
        if result is None:
            result = stage_result
        else:
            fresh = stage_result.appearances > 0
            for name in ("appearances", "survivals", "i_total"):
                getattr(result, name)[fresh] = getattr(stage_result, name)[fresh]
            result.modules = stage_result.modules
            result.trace = stage_result.trace if keep_trace else None
            result.flags += stage_result.flags
        result.stage_reached[np.asarray(pool)] = s
        if s + 1 == len(stages):
            break
        in_pool = set(pool)
        survivors = [int(v) for v in result.ranking() if v in in_pool and result.survivals[v] > 0]
        if not survivors:
            msg = f"stage {s}: no variable survived; stopping early"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            result.flags.append(msg)
            break
        size = max(2 * stages[s + 1], math.ceil(config.top_fraction * len(pool)))
        pool = sorted(int(v) for v in survivors[:size])
    return result
