"""Set partitions and the partition lattice.

Partitions of the ground set ``{0, ..., d-1}`` are stored as restricted
growth strings (RGS): ``rgs[i]`` is the block label of element ``i``, labels
appear in order of first occurrence. The all-singletons partition is the
bottom element and the single-block partition is the top element.

Lattice elements are kept in a fixed linear extension: ascending number of
blocks, ties broken by lexicographic RGS. Under that order the top element
comes first, the bottom element comes last, and the zeta matrix is lower
unitriangular.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

MAX_ENUM_ORDER = 12
MAX_LATTICE_ORDER = 9
DENSE_MAX_ORDER = 7


class LatticeError(ValueError):
    """Invalid order, mismatched partitions or an incomparable pair."""


@dataclass(frozen=True, order=False)
class SetPartition:
    """A partition of ``{0, ..., d-1}`` keyed by its restricted growth string."""

    rgs: tuple[int, ...]

    def __post_init__(self):
        rgs = tuple(int(v) for v in self.rgs)
        if not rgs:
            raise LatticeError("a partition needs at least one element")
        top = -1
        for v in rgs:
            if v < 0 or v > top + 1:
                raise LatticeError(f"not a restricted growth string: {rgs}")
            top = max(top, v)
        object.__setattr__(self, "rgs", rgs)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], d: int | None = None) -> "SetPartition":
        blocks = [sorted(set(b)) for b in blocks]
        if any(not b for b in blocks):
            raise LatticeError("blocks must be non-empty")
        elements = [e for b in blocks for e in b]
        n = len(elements) if d is None else d
        if sorted(elements) != list(range(n)):
            raise LatticeError(f"blocks {blocks} do not partition range({n})")
        labels = [0] * n
        for j, b in enumerate(blocks):
            for e in b:
                labels[e] = j
        return cls(_relabel(labels))

    @classmethod
    def parse(cls, text: str) -> "SetPartition":
        """Parse the ``"12|34"`` notation (1-based digits, or comma lists like ``"1,2|3"``)."""
        blocks = []
        for chunk in text.split("|"):
            chunk = chunk.strip()
            items = chunk.split(",") if "," in chunk else list(chunk)
            blocks.append([int(c) - 1 for c in items if c.strip()])
        return cls.from_blocks(blocks)

    @classmethod
    def top(cls, d: int) -> "SetPartition":
        return cls((0,) * d)

    @classmethod
    def bottom(cls, d: int) -> "SetPartition":
        return cls(tuple(range(d)))

    @property
    def d(self) -> int:
        return len(self.rgs)

    @cached_property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(max(self.rgs) + 1)]
        for i, v in enumerate(self.rgs):
            out[v].append(i)
        return tuple(tuple(b) for b in out)

    def __len__(self) -> int:
        return max(self.rgs) + 1

    @property
    def sort_key(self) -> tuple:
        return (len(self), self.rgs)

    def non_singleton_blocks(self) -> tuple[tuple[int, ...], ...]:
        return tuple(b for b in self.blocks if len(b) > 1)

    def is_lancaster(self) -> bool:
        return len(self.non_singleton_blocks()) <= 1

    def __str__(self) -> str:
        sep = "" if self.d <= 9 else ","
        return "|".join(sep.join(str(e + 1) for e in b) for b in self.blocks)

    def __repr__(self) -> str:
        return f"SetPartition({self})"


def _relabel(labels: Sequence) -> tuple[int, ...]:
    seen: dict = {}
    return tuple(seen.setdefault(v, len(seen)) for v in labels)


def _check_order(d: int, hi: int) -> None:
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= hi:
        raise LatticeError(f"order must be an integer in [1, {hi}], got {d!r}")


@lru_cache(maxsize=None)
def bell_number(d: int) -> int:
    """Bell numbers via the recurrence ``B(n+1) = sum_k C(n, k) B(k)``."""
    if d == 0:
        return 1
    return sum(math.comb(d - 1, k) * bell_number(k) for k in range(d))


@lru_cache(maxsize=16)
def _canonical_rgs(d: int) -> tuple[tuple[int, ...], ...]:
    buckets: list[list[tuple[int, ...]]] = [[] for _ in range(d + 1)]
    for rgs in _rgs_lex(d):
        buckets[max(rgs) + 1].append(rgs)
    return tuple(r for bucket in buckets for r in bucket)


def _rgs_lex(d: int):
    # Lexicographic restricted growth strings; maxes[i] = 1 + max(a[:i]).
    a = [0] * d
    maxes = [1] * d
    yield tuple(a)
    while True:
        i = d - 1
        while i > 0 and a[i] == maxes[i]:
            i -= 1
        if i <= 0:
            return
        a[i] += 1
        nxt = max(maxes[i], a[i] + 1)
        for j in range(i + 1, d):
            a[j] = 0
            maxes[j] = nxt
        yield tuple(a)


def enumerate_partitions(d: int) -> list[SetPartition]:
    """All ``Bell(d)`` partitions of ``{0..d-1}`` in canonical order.

    The single-block partition comes first and the all-singletons partition
    comes last.
    """
    _check_order(d, MAX_ENUM_ORDER)
    return [SetPartition(r) for r in _canonical_rgs(d)]


def _same_order(a: SetPartition, b: SetPartition) -> None:
    if a.d != b.d:
        raise LatticeError(f"partitions of different orders: {a.d} vs {b.d}")


def refines(sigma: SetPartition, pi: SetPartition) -> bool:
    """True iff every block of ``sigma`` lies inside a block of ``pi``."""
    _same_order(sigma, pi)
    image: dict[int, int] = {}
    for s, p in zip(sigma.rgs, pi.rgs):
        if image.setdefault(s, p) != p:
            return False
    return True


def meet(sigma: SetPartition, pi: SetPartition) -> SetPartition:
    _same_order(sigma, pi)
    return SetPartition(_relabel(list(zip(sigma.rgs, pi.rgs))))


def join(sigma: SetPartition, pi: SetPartition) -> SetPartition:
    _same_order(sigma, pi)
    parent = list(range(sigma.d))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for part in (sigma, pi):
        for block in part.blocks:
            root = find(block[0])
            for e in block[1:]:
                r = find(e)
                if r != root:
                    parent[r] = root
    return SetPartition(_relabel([find(i) for i in range(sigma.d)]))


def _mobius_from_counts(counts: Iterable[int]) -> int:
    value = 1
    for n in counts:
        value *= (-1) ** (n - 1) * math.factorial(n - 1)
    return value


def mobius_interval(sigma: SetPartition, pi: SetPartition) -> int:
    """Möbius function of the partition lattice on the interval ``[sigma, pi]``.

    For each block of ``pi`` holding ``n`` blocks of ``sigma`` the factor is
    ``(-1)**(n-1) * (n-1)!``.
    """
    if not refines(sigma, pi):
        raise LatticeError(f"{sigma} does not refine {pi}")
    inside: dict[int, set[int]] = {}
    for s, p in zip(sigma.rgs, pi.rgs):
        inside.setdefault(p, set()).add(s)
    return _mobius_from_counts(len(v) for v in inside.values())


@dataclass(frozen=True)
class PartitionLattice:
    """The partition lattice of order ``d`` with its incidence data.

    ``zeta`` and ``mobius`` are dense ``int64`` arrays for ``d <= 7`` and
    ``scipy.sparse`` CSR arrays above that.
    """

    d: int
    elements: tuple[SetPartition, ...]
    zeta_triplets: tuple[np.ndarray, np.ndarray]
    mobius_triplets: tuple[np.ndarray, np.ndarray, np.ndarray]
    lancaster_mask: np.ndarray
    index: dict = field(repr=False, compare=False)

    @property
    def top_index(self) -> int:
        return 0

    @property
    def bottom_index(self) -> int:
        return len(self.elements) - 1

    @property
    def chain_indices(self) -> tuple[int, ...]:
        return (self.top_index, self.bottom_index) if self.d > 1 else (0,)

    @property
    def lancaster_indices(self) -> np.ndarray:
        return np.flatnonzero(self.lancaster_mask)

    def __len__(self) -> int:
        return len(self.elements)

    def _matrix(self, rows, cols, vals):
        n = len(self.elements)
        mat = sparse.csr_array((vals, (rows, cols)), shape=(n, n), dtype=np.int64)
        return mat.toarray() if self.d <= DENSE_MAX_ORDER else mat

    @cached_property
    def zeta(self):
        rows, cols = self.zeta_triplets
        return self._matrix(rows, cols, np.ones(len(rows), dtype=np.int64))

    @cached_property
    def mobius(self):
        return self._matrix(*self.mobius_triplets)

    def position(self, part: SetPartition) -> int:
        return self.index[part.rgs]

    def to_dict(self) -> dict:
        zr, zc = self.zeta_triplets
        mr, mc, mv = self.mobius_triplets
        return {
            "order": self.d,
            "elements": [list(p.rgs) for p in self.elements],
            "zeta": [[int(i), int(j), 1] for i, j in zip(zr, zc)],
            "mobius": [[int(i), int(j), int(v)] for i, j, v in zip(mr, mc, mv)],
            "lancaster": [int(i) for i in self.lancaster_indices],
        }


def build_lattice(d: int) -> PartitionLattice:
    """Enumerate ``P(d)`` and fill its zeta/Möbius incidence data.

    Every comparable pair ``sigma <= pi`` is reached by merging the blocks of
    ``sigma`` along a partition of its block set, so the Möbius value comes
    from the closed-form product with no matrix inversion.
    """
    _check_order(d, MAX_LATTICE_ORDER)
    elements = tuple(enumerate_partitions(d))
    index = {p.rgs: i for i, p in enumerate(elements)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    for i, sigma in enumerate(elements):
        r = len(sigma)
        for merge in _canonical_rgs(r):
            coarse = _relabel([merge[v] for v in sigma.rgs])
            j = index[coarse]
            counts = np.bincount(merge)
            rows.append(i)
            cols.append(j)
            vals.append(_mobius_from_counts(int(c) for c in counts))
    order = np.lexsort((cols, rows))
    rows_a = np.asarray(rows, dtype=np.int64)[order]
    cols_a = np.asarray(cols, dtype=np.int64)[order]
    vals_a = np.asarray(vals, dtype=np.int64)[order]
    mask = np.array([p.is_lancaster() for p in elements], dtype=bool)
    return PartitionLattice(
        d=d,
        elements=elements,
        zeta_triplets=(rows_a, cols_a),
        mobius_triplets=(rows_a, cols_a, vals_a),
        lancaster_mask=mask,
        index=index,
    )


def lancaster_partitions(d: int) -> list[SetPartition]:
    return [p for p in enumerate_partitions(d) if p.is_lancaster()]


def _subset_to_partition(subset: frozenset, d: int) -> SetPartition:
    if not subset:
        return SetPartition.bottom(d)
    rest = [[e] for e in range(d) if e not in subset]
    return SetPartition.from_blocks([sorted(subset), *rest], d)


def embedding_counterexample(d: int):
    """Return a pair violating the deatomised-Boolean to Lancaster isomorphism, else None.

    Subsets of size >= 2 (plus the empty set) map to the partition whose only
    non-singleton block is the subset; the empty set maps to the bottom.
    """
    _check_order(d, 7)
    domain = [frozenset()] + [
        frozenset(c) for r in range(2, d + 1) for c in itertools.combinations(range(d), r)
    ]
    image = [_subset_to_partition(s, d) for s in domain]
    target = {p.rgs for p in lancaster_partitions(d)}
    if len({p.rgs for p in image}) != len(image):
        return ("not injective", None)
    if {p.rgs for p in image} != target:
        return ("not onto L(d)", None)
    for a, pa in zip(domain, image):
        for b, pb in zip(domain, image):
            if (a <= b) != refines(pa, pb):
                return (a, b)
    return None


def boolean_embedding_check(d: int) -> bool:
    """True iff deatomised ``B(d)`` is order-isomorphic to the Lancaster sublattice."""
    if not 2 <= d <= 7:
        raise LatticeError(f"embedding check needs 2 <= d <= 7, got {d}")
    return embedding_counterexample(d) is None
