"""Ranked mass vectors: an active coordinate plus a non-increasing tail.

Masses may be ints (cycle lengths of the discrete chains) or floats (the
limit process).  Fractions also work, which the exact oracles rely on.
"""

from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate


class EmptyPartitionError(ValueError):
    pass


@dataclass(frozen=True)
class RankedMassVector:
    """Element ``(C_0; C_1 >= C_2 >= ...)`` of the ranked state space.

    ``tail`` holds only the nonzero entries; trailing zeros are implicit.
    """

    active: float = 0
    tail: tuple = field(default=())

    def __post_init__(self):
        tail = tuple(self.tail)
        if self.active < 0:
            raise ValueError(f"negative active mass {self.active!r}")
        for a, b in zip(tail, tail[1:]):
            if b > a:
                raise ValueError(f"tail is not non-increasing: {tail!r}")
        if tail and tail[-1] < 0:
            raise ValueError(f"negative tail mass in {tail!r}")
        while tail and tail[-1] == 0:
            tail = tail[:-1]
        object.__setattr__(self, "tail", tail)

    @classmethod
    def from_masses(cls, active, others=()):
        """Build from an unordered collection of non-active masses."""
        return cls(active, tuple(sorted((m for m in others if m), reverse=True)))

    def __len__(self):
        return 1 + len(self.tail)

    def __iter__(self):
        yield self.active
        yield from self.tail

    def __getitem__(self, j):
        if j == 0:
            return self.active
        if 1 <= j <= len(self.tail):
            return self.tail[j - 1]
        if j > len(self.tail):
            return 0
        raise IndexError(j)

    def total(self):
        return self.active + sum(self.tail)

    def partial_sums(self):
        return list(accumulate(self))

    def scaled(self, factor):
        """Multiply every coordinate by ``factor`` (real flavor)."""
        return RankedMassVector(self.active * factor, tuple(m * factor for m in self.tail))

    def with_active(self, active):
        return RankedMassVector(active, self.tail)

    def __str__(self):
        return "(" + str(self.active) + ";" + ",".join(str(m) for m in self.tail) + ")"


def distance(a, b):
    """Sup over k of the gap between the k-th partial sums of ``a`` and ``b``.

    >>> distance(RankedMassVector(2, (1,)), RankedMassVector(1, (1, 1)))
    1
    """
    sa, sb = a.partial_sums(), b.partial_sums()
    if len(sa) < len(sb):
        sa += [sa[-1]] * (len(sb) - len(sa))
    else:
        sb += [sb[-1]] * (len(sa) - len(sb))
    return max(abs(x - y) for x, y in zip(sa, sb))


def select_component(v, u):
    """Index ``j`` with ``S_{j-1}/S < u <= S_j/S`` for partial sums ``S_j``.

    ``j == 0`` means the active coordinate was hit (a split), ``j >= 1`` a
    merge with tail component ``j``.  The boundary belongs to the lower index.
    """
    sums = v.partial_sums()
    total = sums[-1]
    if total <= 0:
        raise EmptyPartitionError("empty partition")
    for j, s in enumerate(sums):
        if u <= s / total:
            return j
    # u == 1 with rounding in the last ratio
    return len(sums) - 1


def insert_ranked(v, mass):
    """Insert ``mass`` into the tail, after any equal masses already present."""
    if mass < 0:
        raise ValueError(f"cannot insert negative mass {mass!r}")
    if mass == 0:
        return v
    neg = [-m for m in v.tail]
    pos = bisect_right(neg, -mass)
    return RankedMassVector(v.active, v.tail[:pos] + (mass,) + v.tail[pos:])


def remove_tail_component(v, j):
    """Drop tail component ``j`` (1-based); return ``(vector, removed_mass)``."""
    if not 1 <= j <= len(v.tail):
        raise IndexError(f"tail component {j} outside support of size {len(v.tail)}")
    return RankedMassVector(v.active, v.tail[: j - 1] + v.tail[j:]), v.tail[j - 1]
