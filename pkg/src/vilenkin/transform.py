"""Vilenkin-Fourier transforms and partial sums on the truncated group.

The forward transform carries the Haar weight ``1/M_N``; the inverse is plain
synthesis ``sum_k c_k psi_k``.
"""

from __future__ import annotations

import csv
import io
import functools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .group import GroupSpec, rank_sub
from .system import DENSE_CACHE_LIMIT, _roots, character_matrix, character_rows, dirichlet_grid

# Refuse to allocate grids larger than this many points.
MAX_GRID_POINTS = 2**24


def check_grid_size(spec: GroupSpec) -> None:
    if spec.order > MAX_GRID_POINTS:
        raise ValueError(f"M_N={spec.order} exceeds the grid limit {MAX_GRID_POINTS}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples at every point of the group, indexed by rank."""

    spec: GroupSpec
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.shape != (self.spec.order,):
            raise ValueError(f"expected {self.spec.order} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same(self.spec, other.spec)
        return GridFunction(self.spec, self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same(self.spec, other.spec)
        return GridFunction(self.spec, self.samples - other.samples)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.spec, self.samples * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, spec: GroupSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.order, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Coefficients ``f^(0..M_N-1)``."""

    spec: GroupSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.spec.order,):
            raise ValueError(f"expected {self.spec.order} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)


def _same(a: GroupSpec, b: GroupSpec) -> None:
    if a != b:
        raise ValueError("operands live on different groups")


def forward_naive(f: GridFunction) -> Spectrum:
    """``f^(k) = (1/M_N) sum_x f(x) conj(psi_k(x))`` by dense summation, O(M_N^2)."""
    spec = f.spec
    M = spec.order
    if M <= DENSE_CACHE_LIMIT:
        coeffs = character_matrix(spec).conj() @ f.samples
    else:
        coeffs = np.empty(M, dtype=np.complex128)
        for start in range(0, M, 256):
            stop = min(M, start + 256)
            coeffs[start:stop] = character_rows(spec, start, stop).conj() @ f.samples
    return Spectrum(spec, coeffs / M)


@functools.lru_cache(maxsize=64)
def _dft_matrix(mk: int, sign: int) -> np.ndarray:
    r = _roots(mk)
    idx = np.multiply.outer(np.arange(mk), np.arange(mk)) % mk
    out = r[idx] if sign > 0 else r[idx].conj()
    out.flags.writeable = False
    return out


def _axis_passes(samples: np.ndarray, spec: GroupSpec, sign: int) -> np.ndarray:
    a = samples.reshape(spec.shape)
    N = spec.N
    for k, mk in enumerate(spec.m):
        # coordinate k is axis N-1-k in the rank layout
        axis = N - 1 - k
        a = np.moveaxis(np.tensordot(_dft_matrix(mk, sign), a, axes=([1], [axis])), 0, axis)
    return a.reshape(spec.order)


def forward_fast(f: GridFunction) -> Spectrum:
    """Same result as :func:`forward_naive` via one small DFT per coordinate axis."""
    return Spectrum(f.spec, _axis_passes(f.samples, f.spec, -1) / f.spec.order)


def inverse(s: Spectrum) -> GridFunction:
    return GridFunction(s.spec, _axis_passes(s.coeffs, s.spec, +1))


def partial_sum(s: Spectrum, n: int) -> GridFunction:
    """``S_n f = sum_{k<n} f^(k) psi_k``; ``S_0 f = 0``."""
    if not 0 <= n <= s.spec.order:
        raise ValueError(f"n={n} outside [0, {s.spec.order}]")
    c = s.coeffs.copy()
    c[n:] = 0
    return inverse(Spectrum(s.spec, c))


@functools.lru_cache(maxsize=4)
def _difference_ranks(spec: GroupSpec) -> np.ndarray:
    r = np.arange(spec.order, dtype=np.int64)
    out = rank_sub(spec, r[:, None], r[None, :])
    out.flags.writeable = False
    return out


def partial_sum_by_kernel(f: GridFunction, n: int) -> GridFunction:
    """``S_n f(x) = (1/M_N) sum_t f(t) D_n(x - t)``, group convolution with the kernel."""
    spec = f.spec
    if not 1 <= n <= spec.order:
        raise ValueError(f"n={n} outside [1, {spec.order}]")
    kernel = dirichlet_grid(spec, n)
    vals = kernel[_difference_ranks(spec)] @ f.samples / spec.order
    return GridFunction(spec, vals)


def partial_sum_blocks(s: Spectrum, n_max: int | None = None, block: int = 256) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(n0, P)`` with ``P[i] = S_{n0+i} f`` for ``n = 1..n_max``, in row blocks.

    Each block costs one cumulative sum over ``block`` character rows, so the
    whole family costs O(n_max * M_N).
    """
    spec = s.spec
    M = spec.order
    n_max = M if n_max is None else int(n_max)
    if not 0 <= n_max <= M:
        raise ValueError(f"n_max={n_max} outside [0, {M}]")
    dense = character_matrix(spec) if M <= DENSE_CACHE_LIMIT else None
    carry = np.zeros(M, dtype=np.complex128)
    # S_n uses coefficients 0..n-1, so rows k in [n0-1, n0-1+block) feed S_{n0..n0+block-1}
    for k0 in range(0, n_max, block):
        k1 = min(n_max, k0 + block)
        rows = dense[k0:k1] if dense is not None else character_rows(spec, k0, k1)
        P = np.cumsum(s.coeffs[k0:k1, None] * rows, axis=0)
        P += carry
        carry = P[-1].copy()
        yield k0 + 1, P


def incremental_sums(s: Spectrum, n_max: int | None = None) -> Iterator[tuple[int, GridFunction]]:
    """Stream ``(n, S_n f)`` for ``n = 0..n_max`` via ``S_{n+1} = S_n + f^(n) psi_n``."""
    yield 0, GridFunction.zeros(s.spec)
    for n0, P in partial_sum_blocks(s, n_max):
        for i, row in enumerate(P):
            yield n0 + i, GridFunction(s.spec, row)


def write_csv(values: np.ndarray, stream) -> None:
    """Write ``index,re,im`` rows."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["index", "re", "im"])
    for i, v in enumerate(values):
        w.writerow([i, repr(float(v.real)), repr(float(v.imag))])


def read_csv(stream) -> np.ndarray:
    """Read a column file written by :func:`write_csv`; ``im`` may be omitted."""
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or "re" not in reader.fieldnames:
        raise ValueError("CSV needs at least an 're' column")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        try:
            idx = int(row["index"]) if row.get("index") not in (None, "") else len(rows)
            re_ = float(row["re"])
            im_ = float(row["im"]) if row.get("im") not in (None, "") else 0.0
        except (TypeError, ValueError):
            raise ValueError(f"malformed CSV row at line {lineno}: {row}") from None
        if idx != len(rows):
            raise ValueError(f"index {idx} at line {lineno} is out of sequence")
        rows.append(complex(re_, im_))
    return np.array(rows, dtype=np.complex128)


def to_csv_string(values: np.ndarray) -> str:
    buf = io.StringIO()
    write_csv(values, buf)
    return buf.getvalue()
