"""Permutation core: rankings, orderings, right-invariant distances and
transitivity analysis of pairwise preference sets.

Conventions: item indices are 0-based everywhere inside the library; ranks run
from 1 (most preferred) to n. A ranking vector r has r[i] = rank of item i.
An ordering vector x lists item indices from best to worst, so
x[k-1] = i <=> r[i] = k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRICS = ("footrule", "spearman", "kendall", "cayley", "hamming")


class DimensionMismatchError(ValueError):
    """Two permutations of different lengths were compared."""


def as_ranking(r) -> np.ndarray:
    """Validate and return r as an int ranking array (values 1..n)."""
    r = np.asarray(r, dtype=np.int64)
    n = r.size
    if n < 2:
        raise ValueError("a ranking needs at least 2 items")
    if not np.array_equal(np.sort(r), np.arange(1, n + 1)):
        raise ValueError(f"not a permutation of 1..{n}: {r}")
    return r


def invert(r: np.ndarray) -> np.ndarray:
    """Ordering of a ranking (or vice versa, shifting between the two codings).

    For a ranking r (ranks 1..n) returns the ordering x (0-based items,
    best first). Applying ranking_of afterwards recovers r.
    """
    r = np.asarray(r, dtype=np.int64)
    x = np.empty_like(r)
    x[r - 1] = np.arange(r.size)
    return x


def ranking_of(x: np.ndarray) -> np.ndarray:
    """Ranking corresponding to an ordering x (inverse of invert)."""
    x = np.asarray(x, dtype=np.int64)
    r = np.empty_like(x)
    r[x] = np.arange(1, x.size + 1)
    return r


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a o b)[i] = a[b[i]-1], treating both as rank vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[b - 1]


def _kendall(a: np.ndarray, b: np.ndarray) -> int:
    # Number of discordant pairs, counted as inversions of b read in the
    # item order induced by a (merge-count, O(n log n)).
    order = np.argsort(a)
    seq = b[order]
    return _count_inversions(list(seq))


def _count_inversions(seq: list) -> int:
    if len(seq) <= 1:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    seq[:] = merged + left[i:] + right[j:]
    return inv


def _cayley(a: np.ndarray, b: np.ndarray) -> int:
    # Minimum transpositions = n - number of cycles of a o b^{-1}.
    n = a.size
    perm = np.empty(n, dtype=np.int64)
    perm[b - 1] = a - 1  # maps rank-position of b to rank of a (0-based)
    seen = np.zeros(n, dtype=bool)
    cycles = 0
    for i in range(n):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return n - cycles


def distance(metric: str, a: np.ndarray, b: np.ndarray) -> int:
    """Right-invariant distance between two rankings."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size != b.size:
        raise DimensionMismatchError(f"lengths differ: {a.size} vs {b.size}")
    if metric == "footrule":
        return int(np.abs(a - b).sum())
    if metric == "spearman":
        d = a - b
        return int((d * d).sum())
    if metric == "kendall":
        return _kendall(a, b)
    if metric == "cayley":
        return _cayley(a, b)
    if metric == "hamming":
        return int((a != b).sum())
    raise ValueError(f"unknown metric {metric!r}")


def distances_to(metric: str, rows: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """d(rows[j], rho) for a (N, n) matrix of rankings, vectorized where easy."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    rho = np.asarray(rho, dtype=np.int64)
    if metric == "footrule":
        return np.abs(rows - rho).sum(axis=1)
    if metric == "spearman":
        d = rows - rho
        return (d * d).sum(axis=1)
    if metric == "hamming":
        return (rows != rho).sum(axis=1)
    return np.array([distance(metric, row, rho) for row in rows])


def max_distance(metric: str, n: int) -> int:
    """Largest achievable distance from the identity at size n."""
    if metric == "footrule":
        return (n * n) // 2
    if metric == "spearman":
        return n * (n * n - 1) // 3
    if metric == "kendall":
        return n * (n - 1) // 2
    if metric == "cayley":
        return n - 1
    if metric == "hamming":
        return n
    raise ValueError(f"unknown metric {metric!r}")


def mallows_log_density(r, rho, alpha: float, metric: str, logz: float) -> float:
    """Log density of r under the distance-based ranking model with
    consensus rho, concentration alpha and precomputed log partition value."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    r = np.asarray(r, dtype=np.int64)
    n = r.size
    return -(alpha / n) * distance(metric, r, rho) - logz


@dataclass(frozen=True)
class PreferenceSet:
    """All pairwise preferences reported by one assessor.

    preferred[m] was chosen over other[m] in comparison m; both are 0-based
    item indices, and no unordered pair occurs twice.
    """

    assessor_id: int
    preferred: np.ndarray
    other: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.preferred, dtype=np.int64)
        o = np.asarray(self.other, dtype=np.int64)
        object.__setattr__(self, "preferred", p)
        object.__setattr__(self, "other", o)
        if p.shape != o.shape or p.ndim != 1:
            raise ValueError("preferred/other must be 1-d arrays of equal length")
        if np.any(p == o):
            raise ValueError("self-comparison in preference set")
        keys = {frozenset(pair) for pair in zip(p.tolist(), o.tolist())}
        if len(keys) != p.size:
            raise ValueError(
                f"duplicate unordered pair for assessor {self.assessor_id}"
            )

    @property
    def n_pairs(self) -> int:
        return self.preferred.size

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.preferred.tolist(), self.other.tolist()))


@dataclass(frozen=True)
class Dataset:
    """Preference sets of N assessors over n_items items."""

    n_items: int
    preference_sets: tuple[PreferenceSet, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "preference_sets", tuple(self.preference_sets)
        )
        if len(self.preference_sets) < 1:
            raise ValueError("dataset needs at least one assessor")
        if self.n_items < 2:
            raise ValueError("dataset needs at least two items")
        for ps in self.preference_sets:
            hi = max(ps.preferred.max(initial=-1), ps.other.max(initial=-1))
            if hi >= self.n_items:
                raise ValueError(
                    f"item index {hi} out of range for n_items={self.n_items}"
                )
            if ps.n_pairs > self.n_items * (self.n_items - 1) // 2:
                raise ValueError("more pairs than available for assessor")

    @property
    def n_assessors(self) -> int:
        return len(self.preference_sets)

    @property
    def total_pairs(self) -> int:
        return sum(ps.n_pairs for ps in self.preference_sets)


@dataclass
class TransitivityReport:
    is_transitive: bool
    closure: set[tuple[int, int]] | None = None
    cycle_witness: list[int] | None = None


def analyze_transitivity(ps: PreferenceSet, n: int) -> TransitivityReport:
    """Check the preference digraph for cycles.

    If acyclic, returns the full reachability closure as (winner, loser)
    pairs; otherwise returns one witness cycle (item sequence, first item
    repeated at the end is implied).
    """
    adj: dict[int, list[int]] = {}
    for a, b in ps.pairs():
        adj.setdefault(a, []).append(b)

    # Iterative DFS with colors; a back edge yields a witness cycle.
    color = {}  # 0 absent/white implied, 1 grey, 2 black
    for start in list(adj):
        if color.get(start):
            continue
        stack = [(start, iter(adj.get(start, ())))]
        color[start] = 1
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color.get(nxt, 0) == 1:
                    cycle = path[path.index(nxt):]
                    return TransitivityReport(False, cycle_witness=cycle)
                if color.get(nxt, 0) == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(adj.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                path.pop()
                stack.pop()

    closure: set[tuple[int, int]] = set()
    for start in adj:
        seen = set()
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        closure.update((start, t) for t in seen)
    return TransitivityReport(True, closure=closure)
