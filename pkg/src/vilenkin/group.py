"""Mixed-radix arithmetic on the truncated bounded Vilenkin group.

The group is the product of cyclic groups Z_{m_0} x ... x Z_{m_{N-1}}.  Points
are enumerated by rank ``x_0*M_0 + x_1*M_1 + ...``, so the first coordinate
varies fastest.  Integrals over the group become averages over all ``M_N``
points.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Largest admissible group order; keeps ranks and digit products inside int64.
MAX_ORDER = 2**48


def scale_table(m: Sequence[int], depth: int) -> tuple[int, ...]:
    """Return ``(M_0, ..., M_depth)`` with ``M_0 = 1`` and ``M_{k+1} = m_k M_k``."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if len(m) < depth:
        raise ValueError(f"need {depth} radices, got {len(m)}")
    M = [1]
    for k in range(depth):
        mk = int(m[k])
        if mk < 2:
            raise ValueError(f"radix m_{k}={mk} is below 2")
        M.append(M[-1] * mk)
        if M[-1] > MAX_ORDER:
            raise OverflowError(f"M_{k + 1}={M[-1]} exceeds the order limit {MAX_ORDER}")
    return tuple(M)


@dataclass(frozen=True)
class GroupSpec:
    """Radices ``m_0..m_{N-1}`` of a truncated bounded Vilenkin group."""

    m: tuple[int, ...]
    M: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "M", scale_table(m, len(m)))

    @classmethod
    def from_string(cls, radices: str, depth: int) -> "GroupSpec":
        """Parse ``"2,3"`` and cycle it out to ``depth`` radices."""
        try:
            base = [int(tok) for tok in radices.split(",") if tok.strip()]
        except ValueError:
            raise ValueError(f"malformed radix string {radices!r}") from None
        if not base:
            raise ValueError("empty radix string")
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        return cls(tuple(base[k % len(base)] for k in range(depth)))

    @property
    def N(self) -> int:
        return len(self.m)

    @property
    def order(self) -> int:
        """Number of points ``M_N``."""
        return self.M[-1]

    @property
    def lam(self) -> int:
        """Bound ``max_k m_k`` of the generating sequence."""
        return max(self.m)

    @property
    def shape(self) -> tuple[int, ...]:
        """C-order array shape whose flat index is the rank (last axis is coordinate 0)."""
        return tuple(reversed(self.m))

    def truncate(self, depth: int) -> "GroupSpec":
        return GroupSpec(self.m[:depth])


def digits(n: int, spec: GroupSpec) -> tuple[tuple[int, ...], int]:
    """Digit expansion ``n = sum n_j M_j`` and the order ``|n|`` (``|0| = 0``)."""
    n = int(n)
    if not 0 <= n < spec.order:
        raise ValueError(f"n={n} outside [0, {spec.order})")
    out = []
    for mk in spec.m:
        n, d = divmod(n, mk)
        out.append(d)
    nonzero = [j for j, d in enumerate(out) if d]
    return tuple(out), (nonzero[-1] if nonzero else 0)


@dataclass(frozen=True)
class Point:
    spec: GroupSpec
    digits: tuple[int, ...]

    def __post_init__(self):
        d = tuple(int(v) for v in self.digits)
        if len(d) != self.spec.N:
            raise ValueError(f"expected {self.spec.N} digits, got {len(d)}")
        for k, (v, mk) in enumerate(zip(d, self.spec.m)):
            if not 0 <= v < mk:
                raise ValueError(f"digit {k}={v} outside Z_{mk}")
        object.__setattr__(self, "digits", d)

    @classmethod
    def from_rank(cls, spec: GroupSpec, n: int) -> "Point":
        return cls(spec, digits(n, spec)[0])

    @classmethod
    def zero(cls, spec: GroupSpec) -> "Point":
        return cls(spec, (0,) * spec.N)


def rank(x: Point) -> int:
    """Canonical index of a point, the inverse of :func:`digits`."""
    return sum(d * Mk for d, Mk in zip(x.digits, x.spec.M))


def _check_same(x: Point, y: Point) -> None:
    if x.spec != y.spec:
        raise ValueError("points belong to different groups")


def point_add(x: Point, y: Point) -> Point:
    _check_same(x, y)
    return Point(x.spec, tuple((a + b) % mk for a, b, mk in zip(x.digits, y.digits, x.spec.m)))


def point_sub(x: Point, t: Point) -> Point:
    _check_same(x, t)
    return Point(x.spec, tuple((a - b) % mk for a, b, mk in zip(x.digits, t.digits, x.spec.m)))


@dataclass(frozen=True)
class Interval:
    """The cylinder ``I_rank(base)``: points agreeing with ``base`` in the first ``rank`` digits."""

    rank: int
    base: Point

    def __post_init__(self):
        if not 0 <= self.rank <= self.base.spec.N:
            raise ValueError(f"interval rank {self.rank} outside [0, {self.base.spec.N}]")
        # Digits past the rank are irrelevant; zero them so equal intervals compare equal.
        d = self.base.digits[: self.rank] + (0,) * (self.base.spec.N - self.rank)
        object.__setattr__(self, "base", Point(self.base.spec, d))

    @property
    def spec(self) -> GroupSpec:
        return self.base.spec

    @property
    def measure(self) -> float:
        return 1.0 / self.spec.M[self.rank]

    @property
    def base_rank(self) -> int:
        return rank(self.base)

    def mask(self) -> np.ndarray:
        """Boolean membership over all points, indexed by rank."""
        return interval_mask(self.spec, self.rank, self.base_rank)


def interval_contains(interval: Interval, y: Point) -> bool:
    n = interval.rank
    return y.digits[:n] == interval.base.digits[:n]


def interval_mask(spec: GroupSpec, n: int, base_rank: int = 0) -> np.ndarray:
    # I_n(x) is determined by rank mod M_n.
    ranks = np.arange(spec.order, dtype=np.int64)
    Mn = spec.M[n]
    return ranks % Mn == base_rank % Mn


@dataclass(frozen=True)
class Shell:
    """The annulus ``I_s \\ I_{s+1}`` around zero."""

    spec: GroupSpec
    s: int

    @property
    def measure(self) -> float:
        return 1.0 / self.spec.M[self.s] - 1.0 / self.spec.M[self.s + 1]

    def contains(self, y: Point) -> bool:
        return all(d == 0 for d in y.digits[: self.s]) and y.digits[self.s] != 0


def shell_partition(spec: GroupSpec, depth: int | None = None) -> list[Shell]:
    """Shells ``I_s \\ I_{s+1}`` for ``s < depth``; together they cover the complement of ``I_depth``."""
    depth = spec.N if depth is None else depth
    if not 1 <= depth <= spec.N:
        raise ValueError(f"depth must lie in [1, {spec.N}], got {depth}")
    return [Shell(spec, s) for s in range(depth)]


@functools.lru_cache(maxsize=32)
def digit_table(spec: GroupSpec) -> np.ndarray:
    """``(M_N, N)`` int array; row ``r`` holds the digits of the point of rank ``r``."""
    ranks = np.arange(spec.order, dtype=np.int64)
    out = np.empty((spec.order, spec.N), dtype=np.int64)
    for k, mk in enumerate(spec.m):
        out[:, k] = (ranks // spec.M[k]) % mk
    out.flags.writeable = False
    return out


@functools.lru_cache(maxsize=32)
def shell_index(spec: GroupSpec) -> np.ndarray:
    """For each rank, the ``s`` with the point in ``I_s \\ I_{s+1}``; ``N`` for the origin."""
    d = digit_table(spec)
    nz = d != 0
    out = np.where(nz.any(axis=1), nz.argmax(axis=1), spec.N)
    out.flags.writeable = False
    return out


def rank_sub(spec: GroupSpec, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorised rank of ``x - t`` for rank arrays ``x`` and ``t`` (broadcasting)."""
    x = np.asarray(x, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    out = np.zeros(np.broadcast(x, t).shape, dtype=np.int64)
    for k, mk in enumerate(spec.m):
        Mk = spec.M[k]
        out += (((x // Mk) - (t // Mk)) % mk) * Mk
    return out
