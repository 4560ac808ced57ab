"""Martingales, maximal functions, H_p quasinorms and p-atoms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .group import GroupSpec, Interval, Point
from .transform import GridFunction, forward_fast

ATOM_RTOL = 1e-12
# Atom values are integer multiples of 2**(e - QUANT_BITS) where 2**e <= sup bound.
QUANT_BITS = 30


def condition(f: GridFunction, n: int) -> GridFunction:
    """``E_n f``: the average of ``f`` over ``I_n(x)`` at each ``x``."""
    spec = f.spec
    if not 0 <= n <= spec.N:
        raise ValueError(f"level {n} outside [0, {spec.N}]")
    Mn = spec.M[n]
    # rank mod M_n labels I_n(x); rows of this view run over the rest of the digits
    means = f.samples.reshape(spec.order // Mn, Mn).mean(axis=0)
    return GridFunction(spec, np.tile(means, spec.order // Mn))


class Martingale:
    """A martingale ``f^(0), ..., f^(N)`` stored by its finest level.

    Coarser levels are conditional expectations of the finest one, so
    consistency holds by construction.
    """

    def __init__(self, finest: GridFunction):
        self.spec = finest.spec
        self.finest = finest
        self._levels: list[GridFunction] | None = None

    @classmethod
    def from_levels(cls, levels: Sequence[GridFunction], atol: float = 1e-10) -> "Martingale":
        """Build from explicit levels, checking ``E_n f^(m) = f^(n)``."""
        spec = levels[-1].spec
        if len(levels) != spec.N + 1:
            raise ValueError(f"need {spec.N + 1} levels, got {len(levels)}")
        top = levels[-1]
        for n, lev in enumerate(levels):
            err = np.max(np.abs(condition(top, n).samples - lev.samples))
            if err > atol:
                raise ValueError(f"level {n} is not E_{n} of the finest level (err {err:.3g})")
        return cls(top)

    @classmethod
    def from_function(cls, g: GridFunction) -> "Martingale":
        """The martingale ``(S_{M_n} g)_n`` generated by a function."""
        return cls(g)

    @property
    def levels(self) -> list[GridFunction]:
        if self._levels is None:
            self._levels = [condition(self.finest, n) for n in range(self.spec.N + 1)]
        return self._levels

    def level(self, n: int) -> GridFunction:
        return self.levels[n]

    def __mul__(self, c) -> "Martingale":
        return Martingale(self.finest * c)

    __rmul__ = __mul__

    def __add__(self, other: "Martingale") -> "Martingale":
        return Martingale(self.finest + other.finest)


def maximal(f: Martingale) -> np.ndarray:
    """``f* = max_n |f^(n)|`` pointwise."""
    return np.max(np.abs(np.stack([lev.samples for lev in f.levels])), axis=0)


def lp_quasinorm(g, p: float) -> float:
    """``((1/M_N) sum |g|^p)^(1/p)``; accepts a GridFunction or a sample array."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    vals = g.samples if isinstance(g, GridFunction) else np.asarray(g)
    return float(np.mean(np.abs(vals) ** p) ** (1.0 / p))


def hp_quasinorm(f: Martingale, p: float) -> float:
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    return lp_quasinorm(maximal(f), p)


@dataclass(frozen=True, eq=False)
class Atom:
    p: float
    interval: Interval
    values: GridFunction

    @property
    def bound(self) -> float:
        """The sup-norm ceiling ``mu(I)^(-1/p)``."""
        return atom_bound(self.interval, self.p)

    def martingale(self) -> Martingale:
        return Martingale(self.values)


def atom_bound(interval: Interval, p: float) -> float:
    return float(interval.spec.M[interval.rank]) ** (1.0 / p)


@dataclass
class AtomCheck:
    valid: bool
    mean_ok: bool
    sup_ok: bool
    support_ok: bool
    mean: float = 0.0
    sup: float = 0.0
    failures: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.valid


def validate_atom(a: Atom) -> AtomCheck:
    """Check zero mean on the interval, the sup bound and the support, with diagnostics."""
    bound = a.bound
    mask = a.interval.mask()
    v = a.values.samples
    mean = abs(v[mask].mean())
    sup = float(np.max(np.abs(v))) if v.size else 0.0
    mean_ok = bool(mean <= ATOM_RTOL * bound)
    sup_ok = bool(sup <= bound * (1 + ATOM_RTOL))
    support_ok = not bool(np.any(v[~mask] != 0))
    failures = []
    if not mean_ok:
        failures.append(f"mean {mean:.3g} over the interval is not zero")
    if not sup_ok:
        failures.append(f"sup {sup:.6g} exceeds bound {bound:.6g}")
    if not support_ok:
        failures.append("nonzero values outside the interval")
    return AtomCheck(mean_ok and sup_ok and support_ok, mean_ok, sup_ok, support_ok, float(mean), sup, failures)


def _quantize_zero_sum(vals: np.ndarray, bound: float, rng: np.random.Generator) -> np.ndarray:
    """Round onto a dyadic grid below ``bound`` and repair the sum to exactly zero.

    Sums of the result are exact in floating point, so every interval average
    of the atom over a superset of its support is exactly ``0.0``.
    """
    q = 2.0 ** (math.floor(math.log2(bound)) - QUANT_BITS)
    cap = math.floor(bound / q)
    ints = np.trunc(vals / q).astype(np.int64)
    np.clip(ints, -cap, cap, out=ints)
    excess = int(ints.sum())
    step = -1 if excess > 0 else 1
    # spend the residual one unit at a time on entries with room to move
    while excess:
        room = (ints + step >= -cap) & (ints + step <= cap)
        idx = np.flatnonzero(room)
        take = min(abs(excess), idx.size)
        chosen = rng.choice(idx, size=take, replace=False)
        ints[chosen] += step
        excess += step * take
    return ints.astype(np.float64) * q


def make_atom(spec: GroupSpec, interval: Interval, p: float, seed=0) -> Atom:
    """A random p-atom supported on ``interval``, deterministic in ``seed``.

    Values are drawn uniformly from ``[-b, b]`` with ``b = mu(I)^(-1/p)``, centred
    on the support, rescaled into the sup bound and snapped to an exact zero sum.
    Intervals of rank 0 or N only admit the zero atom.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if interval.spec != spec:
        raise ValueError("interval belongs to a different group")
    rng = np.random.default_rng(seed)
    bound = atom_bound(interval, p)
    mask = interval.mask()
    out = np.zeros(spec.order, dtype=np.float64)
    if interval.rank == 0 or mask.sum() < 2:
        return Atom(p, interval, GridFunction(spec, out))
    vals = rng.uniform(-bound, bound, size=int(mask.sum()))
    vals -= vals.mean()
    peak = np.max(np.abs(vals))
    if peak > bound:
        vals *= bound / peak
    out[mask] = _quantize_zero_sum(vals, bound, rng)
    return Atom(p, interval, GridFunction(spec, out))


def random_interval(spec: GroupSpec, rng: np.random.Generator, rank: int | None = None) -> Interval:
    """An interval with random base; random rank in ``[1, N-1]`` unless given."""
    if rank is None:
        rank = int(rng.integers(1, spec.N)) if spec.N > 1 else 1
    base = Point(spec, tuple(int(rng.integers(0, mk)) for mk in spec.m))
    return Interval(rank, base)


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    weights: tuple[float, ...]
    atoms: tuple[Atom, ...]
    p: float

    def __post_init__(self):
        if len(self.weights) != len(self.atoms):
            raise ValueError("weights and atoms differ in length")
        if not self.atoms:
            raise ValueError("empty decomposition")

    @property
    def spec(self) -> GroupSpec:
        return self.atoms[0].values.spec

    def weight_sum(self) -> float:
        """``sum |mu_k|^p``."""
        return float(sum(abs(w) ** self.p for w in self.weights))


def synthesize(d: AtomicDecomposition) -> Martingale:
    """``f^(n) = sum_k mu_k E_n a_k``; levels follow from the finest by linearity."""
    spec = d.spec
    acc = np.zeros(spec.order, dtype=np.complex128)
    for w, a in zip(d.weights, d.atoms):
        if a.values.spec != spec:
            raise ValueError("atoms live on different groups")
        acc += w * a.values.samples
    return Martingale(GridFunction(spec, acc))


def martingale_spectrum(f: Martingale) -> np.ndarray:
    """All coefficients resolvable at this depth; they are those of the finest level."""
    return forward_fast(f.finest).coeffs


def martingale_coefficient(f: Martingale, i: int) -> complex:
    """``lim_k int f^(k) conj(psi_i)``; stable once ``M_k > i``, so read it off ``f^(N)``."""
    if not 0 <= i < f.spec.order:
        raise ValueError(f"coefficient {i} is not resolvable below M_N={f.spec.order}")
    return complex(martingale_spectrum(f)[i])


def write_decomposition_csv(d: AtomicDecomposition, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["k", "mu_k", "interval_rank", "base_rank"])
    for k, (mu, a) in enumerate(zip(d.weights, d.atoms)):
        w.writerow([k, repr(float(mu)), a.interval.rank, a.interval.base_rank])
