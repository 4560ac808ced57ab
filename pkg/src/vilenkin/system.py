"""Generalized Rademacher functions, Vilenkin characters and Dirichlet kernels.

Every character value is a product of entries from a per-radix table of roots of
unity ``exp(2*pi*i*u/m_k)``, so repeated powers never drift.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .group import GroupSpec, Point, digit_table, digits, shell_index

# Above this order the dense character matrix is built row-block by row-block instead of cached.
DENSE_CACHE_LIMIT = 2048


@functools.lru_cache(maxsize=64)
def _roots(mk: int) -> np.ndarray:
    u = np.arange(mk)
    out = np.exp(2j * np.pi * u / mk)
    out[0] = 1.0
    out.flags.writeable = False
    return out


def root_table(spec: GroupSpec) -> list[np.ndarray]:
    return [_roots(mk) for mk in spec.m]


@dataclass(frozen=True)
class CharacterIndex:
    """Character index ``n`` with its digit expansion cached."""

    spec: GroupSpec
    n: int
    digits: tuple[int, ...]

    @classmethod
    def of(cls, spec: GroupSpec, n: int) -> "CharacterIndex":
        return cls(spec, int(n), digits(n, spec)[0])


def _index(spec: GroupSpec, n) -> CharacterIndex:
    if isinstance(n, CharacterIndex):
        if n.spec != spec:
            raise ValueError("character index belongs to a different group")
        return n
    return CharacterIndex.of(spec, n)


def rademacher(k: int, x: Point) -> complex:
    """``r_k(x) = exp(2 pi i x_k / m_k)``."""
    spec = x.spec
    if not 0 <= k < spec.N:
        raise ValueError(f"coordinate {k} outside [0, {spec.N})")
    return complex(_roots(spec.m[k])[x.digits[k]])


def vilenkin(n, x: Point) -> complex:
    """``psi_n(x) = prod_k r_k(x)^{n_k}``."""
    spec = x.spec
    idx = _index(spec, n)
    val = 1.0 + 0.0j
    for nk, xk, mk in zip(idx.digits, x.digits, spec.m):
        if nk:
            val *= _roots(mk)[(nk * xk) % mk]
    return complex(val)


def vilenkin_grid(spec: GroupSpec, n) -> np.ndarray:
    """``psi_n`` sampled at every point, indexed by rank."""
    idx = _index(spec, n)
    d = digit_table(spec)
    out = np.ones(spec.order, dtype=np.complex128)
    for k, (nk, mk) in enumerate(zip(idx.digits, spec.m)):
        if nk:
            out *= _roots(mk)[(nk * d[:, k]) % mk]
    return out


def character_rows(spec: GroupSpec, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the matrix ``[psi_n(x)]``, built from the definition."""
    d = digit_table(spec)
    nd = d[start:stop]
    out = np.ones((stop - start, spec.order), dtype=np.complex128)
    for k, mk in enumerate(spec.m):
        phase = np.multiply.outer(nd[:, k], d[:, k]) % mk
        out *= _roots(mk)[phase]
    return out


@functools.lru_cache(maxsize=8)
def _dense_characters(spec: GroupSpec) -> np.ndarray:
    out = character_rows(spec, 0, spec.order)
    out.flags.writeable = False
    return out


def character_matrix(spec: GroupSpec) -> np.ndarray:
    """Dense ``(M_N, M_N)`` matrix ``[psi_n(x)]``; cached for small groups."""
    if spec.order <= DENSE_CACHE_LIMIT:
        return _dense_characters(spec)
    return character_rows(spec, 0, spec.order)


def _check_kernel_index(spec: GroupSpec, n: int) -> int:
    n = int(n)
    if not 1 <= n <= spec.order:
        raise ValueError(f"kernel index {n} outside [1, {spec.order}]")
    return n


def dirichlet_naive(n: int, x: Point) -> complex:
    """``D_n(x) = sum_{k<n} psi_k(x)`` by direct summation."""
    n = _check_kernel_index(x.spec, n)
    return complex(sum(vilenkin(k, x) for k in range(n)))


def dirichlet_naive_grid(spec: GroupSpec, n: int) -> np.ndarray:
    n = _check_kernel_index(spec, n)
    if spec.order <= DENSE_CACHE_LIMIT:
        return _dense_characters(spec)[:n].sum(axis=0)
    out = np.zeros(spec.order, dtype=np.complex128)
    for start in range(0, n, 256):
        out += character_rows(spec, start, min(n, start + 256)).sum(axis=0)
    return out


def dirichlet_block(n: int, x: Point) -> float:
    """``D_{M_n}(x)``: ``M_n`` on ``I_n`` and zero elsewhere."""
    spec = x.spec
    if not 0 <= n <= spec.N:
        raise ValueError(f"scale index {n} outside [0, {spec.N}]")
    return float(spec.M[n]) if all(d == 0 for d in x.digits[:n]) else 0.0


def dirichlet_block_grid(spec: GroupSpec, n: int) -> np.ndarray:
    if not 0 <= n <= spec.N:
        raise ValueError(f"scale index {n} outside [0, {spec.N}]")
    ranks = np.arange(spec.order, dtype=np.int64)
    Mn = spec.M[n]
    return np.where(ranks % Mn == 0, float(Mn), 0.0)


def dirichlet_closed(n: int, x: Point) -> complex:
    """``D_n(x)`` from the digit-block closed form."""
    spec = x.spec
    n = _check_kernel_index(spec, n)
    if n == spec.order:
        return complex(dirichlet_block(spec.N, x))
    nd = digits(n, spec)[0]
    total = 0.0 + 0.0j
    for j, (nj, mj) in enumerate(zip(nd, spec.m)):
        if nj == 0:
            continue
        block = dirichlet_block(j, x)
        if block == 0.0:
            continue
        r = _roots(mj)
        total += block * sum(r[(u * x.digits[j]) % mj] for u in range(mj - nj, mj))
    return complex(vilenkin(n, x) * total)


def dirichlet_closed_grid(spec: GroupSpec, n: int) -> np.ndarray:
    n = _check_kernel_index(spec, n)
    if n == spec.order:
        return dirichlet_block_grid(spec, spec.N).astype(np.complex128)
    nd = digits(n, spec)[0]
    d = digit_table(spec)
    total = np.zeros(spec.order, dtype=np.complex128)
    for j, (nj, mj) in enumerate(zip(nd, spec.m)):
        if nj == 0:
            continue
        r = _roots(mj)
        inner = np.zeros(spec.order, dtype=np.complex128)
        for u in range(mj - nj, mj):
            inner += r[(u * d[:, j]) % mj]
        total += dirichlet_block_grid(spec, j) * inner
    return vilenkin_grid(spec, n) * total


def dirichlet_grid(spec: GroupSpec, n: int) -> np.ndarray:
    """``D_n`` at every point; the closed form, O(M_N * N)."""
    return dirichlet_closed_grid(spec, n)


def dirichlet_shell_bound_check(spec: GroupSpec, n: int, l: int) -> bool:
    """True iff ``|D_n| <= M_{l+1}`` on the shell ``I_l \\ I_{l+1}``."""
    if not 0 <= l < spec.N:
        raise ValueError(f"shell index {l} outside [0, {spec.N})")
    vals = np.abs(dirichlet_closed_grid(spec, n))[shell_index(spec) == l]
    return bool(np.all(vals <= spec.M[l + 1] * (1 + 1e-12)))
