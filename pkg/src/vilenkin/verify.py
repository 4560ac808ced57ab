"""Experiments on the coefficient bound ``|f^(n)| <= c_p n^(1/p-1) ||f||_{H_p}``.

The first half measures the bound on p-atoms through the maximal operator
``sup_n |S_n f| / (n+1)^(1/p-1)``; the second half builds the martingale whose
coefficients outgrow any admissible growth function.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .group import GroupSpec, Interval, Point, rank_sub, shell_index
from .hardy import (
    Atom,
    AtomicDecomposition,
    Martingale,
    hp_quasinorm,
    make_atom,
    martingale_spectrum,
    random_interval,
    synthesize,
)
from .system import character_matrix, dirichlet_block_grid, dirichlet_grid
from .transform import GridFunction, forward_fast, partial_sum_blocks

NULLITY_RTOL = 1e-10


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per trial, so serial and parallel runs agree."""
    return np.random.default_rng([int(seed), int(trial)])


def _exponent(p: float) -> float:
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return 1.0 / p - 1.0


# -- maximal operator and the atom estimates ---------------------------------


def maximal_operator_sp(f: GridFunction, p: float, n_max: int | None = None) -> np.ndarray:
    """``max_{1<=n<=n_max} |S_n f| / (n+1)^(1/p-1)`` pointwise."""
    e = _exponent(p)
    s = forward_fast(f)
    out = np.zeros(f.spec.order)
    for n0, P in partial_sum_blocks(s, n_max):
        w = (np.arange(n0, n0 + len(P)) + 1.0) ** -e
        np.maximum(out, np.max(np.abs(P) * w[:, None], axis=0), out=out)
    return out


def tail_spec_bound(spec: GroupSpec, atom_rank: int, p: float) -> float:
    """``lam^(2p) * sum_{s<N_a} M_s^(p-1)``."""
    return spec.lam ** (2 * p) * sum(spec.M[s] ** (p - 1) for s in range(atom_rank))


def atom_tail_integral(a: Atom, p: float | None = None) -> float:
    """``int (S~*_p a)^p`` over the complement of the atom's support."""
    p = a.p if p is None else p
    spec = a.values.spec
    sp = maximal_operator_sp(a.values, p)
    off = ~a.interval.mask()
    return float(np.sum(sp[off] ** p) / spec.order)


def atom_shell_profile(a: Atom, p: float | None = None) -> np.ndarray:
    """Per shell ``s < N_a`` (around the support), ``max`` of ``|S_n a|/(n+1)^(1/p-1)`` over ``n > M_{N_a}``
    divided by ``lam^2 M_s``; every entry should be at most 1."""
    p = a.p if p is None else p
    e = _exponent(p)
    spec = a.values.spec
    r = a.interval.rank
    s = forward_fast(a.values)
    sup = np.zeros(spec.order)
    for n0, P in partial_sum_blocks(s):
        n = np.arange(n0, n0 + len(P))
        keep = n > spec.M[r]
        if not keep.any():
            continue
        w = (n[keep] + 1.0) ** -e
        np.maximum(sup, np.max(np.abs(P[keep]) * w[:, None], axis=0), out=sup)
    ranks = np.arange(spec.order, dtype=np.int64)
    shells = shell_index(spec)[rank_sub(spec, ranks, a.interval.base_rank)]
    out = np.zeros(r)
    for sh in range(r):
        sel = shells == sh
        if sel.any():
            out[sh] = sup[sel].max() / (spec.lam**2 * spec.M[sh])
    return out


def kernel_average_ratios(spec: GroupSpec, atom_rank: int, n_values: Sequence[int] | None = None) -> np.ndarray:
    """For each shell ``s < N_a``, the worst ``(1/M_N) sum_{t in I_{N_a}} |D_n(x - t)|`` over
    ``x`` in the shell and ``n``, divided by ``lam M_s / M_{N_a}``."""
    n_values = range(1, spec.order + 1) if n_values is None else n_values
    ranks = np.arange(spec.order, dtype=np.int64)
    support = ranks[ranks % spec.M[atom_rank] == 0]
    diff = rank_sub(spec, ranks[:, None], support[None, :])
    shells = shell_index(spec)
    worst = np.zeros(atom_rank)
    for n in n_values:
        avg = np.abs(dirichlet_grid(spec, n))[diff].sum(axis=1) / spec.order
        for s in range(atom_rank):
            bound = spec.lam * spec.M[s] / spec.M[atom_rank]
            worst[s] = max(worst[s], avg[shells == s].max() / bound)
    return worst


def atom_nullity_check(a: Atom) -> bool:
    """True iff ``S_n a`` vanishes for every ``n <= M_{N_a}``."""
    spec = a.values.spec
    n_max = spec.M[a.interval.rank]
    tol = NULLITY_RTOL * float(np.max(np.abs(a.values.samples)))
    for _, P in partial_sum_blocks(forward_fast(a.values), n_max):
        if np.max(np.abs(P)) > tol:
            return False
    return True


# -- coefficient bound -------------------------------------------------------


@dataclass
class BoundEntry:
    n_star: int
    ratio: float
    ratio_theorem: float
    hp_norm: float


def coefficient_bound_ratio(f: Martingale, p: float, n_range: Sequence[int] | None = None) -> BoundEntry:
    """``max_n |f^(n)| / ((n+1)^(1/p-1) ||f||_{H_p})`` and the maximiser.

    ``ratio_theorem`` uses the ``n^(1/p-1)`` normalisation over ``n >= 1``.
    """
    e = _exponent(p)
    hp = hp_quasinorm(f, p)
    if hp == 0:
        raise ValueError("zero martingale has no coefficient ratio")
    coeffs = np.abs(martingale_spectrum(f))
    n = np.arange(f.spec.order) if n_range is None else np.asarray(list(n_range), dtype=np.int64)
    vals = coeffs[n] / ((n + 1.0) ** e * hp)
    i = int(np.argmax(vals))
    pos = n >= 1
    theorem = float(np.max(coeffs[n[pos]] / (n[pos] ** e * hp))) if pos.any() else 0.0
    return BoundEntry(int(n[i]), float(vals[i]), theorem, hp)


def difference_identity_check(f: GridFunction) -> tuple[float, bool]:
    """Check ``f^(n) = (S_{n+1} f - S_n f)(x) / psi_n(x)`` and ``|f^(n)| <= 2 sup_n |S_n f(x)|``.

    Returns the largest deviation of the identity over all ``n`` and ``x``, and
    whether the pointwise inequality held everywhere.
    """
    s = forward_fast(f)
    psi = character_matrix(f.spec)
    prev = np.zeros(f.spec.order, dtype=np.complex128)
    sup = np.zeros(f.spec.order)
    err = 0.0
    for n0, P in partial_sum_blocks(s):
        for i, row in enumerate(P):
            k = n0 + i - 1
            err = max(err, float(np.max(np.abs((row - prev) / psi[k] - s.coeffs[k]))))
            prev = row
        np.maximum(sup, np.max(np.abs(P), axis=0), out=sup)
    ok = bool(np.all(np.abs(s.coeffs)[:, None] <= 2 * sup[None, :] * (1 + 1e-12) + 1e-12))
    return err, ok


@dataclass
class BoundReport:
    records: list[dict] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max((r["ratio"] for r in self.records), default=0.0)

    def summary(self) -> dict:
        # the empirical constant is the worst ratio seen; nothing is asserted about it
        return {"max_ratio": self.max_ratio, "empirical_c_p": self.max_ratio, "trials": len(self.records)}


def random_atom(spec: GroupSpec, p: float, rng: np.random.Generator, rank: int | None = None) -> Atom:
    interval = random_interval(spec, rng, rank)
    return make_atom(spec, interval, p, seed=rng)


def run_bound_trials(spec: GroupSpec, p: float, trials: int, seed: int) -> BoundReport:
    """One random single-atom martingale per trial; atoms of rank 0 or N are skipped as zero."""
    if trials < 1:
        raise ValueError("need at least one trial")
    report = BoundReport()
    for t in range(trials):
        a = random_atom(spec, p, trial_rng(seed, t))
        entry = coefficient_bound_ratio(a.martingale(), p)
        report.records.append(
            {"trial": t, "p": p, "N": spec.N, "n_star": entry.n_star, "ratio": entry.ratio}
        )
    return report


# -- growth functions and the sharpness construction -------------------------


@dataclass(frozen=True)
class PhiSpec:
    """A nondecreasing, nonnegative growth function ``Phi``."""

    family: str
    param: float = 0.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.family not in ("power", "log", "constant", "tabulated"):
            raise ValueError(f"unknown Phi family {self.family!r}")
        if self.family == "power" and self.param < 0:
            raise ValueError("power exponent must be >= 0 for a nondecreasing Phi")
        if self.family == "constant" and self.param <= 0:
            raise ValueError("constant Phi must be positive")
        if self.family == "tabulated":
            if not self.table:
                raise ValueError("empty Phi table")
            ns = [n for n, _ in self.table]
            vals = [v for _, v in self.table]
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise ValueError("Phi table arguments must be strictly increasing")
            if any(v < 0 for v in vals) or any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError("Phi table must be nonnegative and nondecreasing")

    def __call__(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.family == "power":
            out = n**self.param
        elif self.family == "log":
            out = np.log1p(n)
        elif self.family == "constant":
            out = np.full_like(n, self.param)
        else:
            ns = np.array([a for a, _ in self.table])
            vals = np.array([b for _, b in self.table])
            # right-continuous step; constant extension below the first knot
            idx = np.clip(np.searchsorted(ns, n, side="right") - 1, 0, len(ns) - 1)
            out = vals[idx]
        return out if out.ndim else float(out)

    def certify(self, p: float) -> bool:
        """Whether ``limsup n^(1/p-1)/Phi(n) = inf`` is guaranteed for this family.

        Raises for families that provably fail; warns (and returns False) for
        tabulated input, which cannot be certified.
        """
        e = _exponent(p)
        if self.family == "power":
            if self.param >= e:
                raise ValueError(
                    f"Phi(n)=n^{self.param:g} does not satisfy the growth condition: need exponent < 1/p-1 = {e:g}"
                )
            return True
        if self.family == "tabulated":
            warnings.warn("tabulated Phi: growth condition is not certified", stacklevel=2)
            return False
        return True

    def describe(self) -> str:
        return {
            "power": f"pow:{self.param:g}",
            "log": "log",
            "constant": f"const:{self.param:g}",
            "tabulated": "tabulated",
        }[self.family]


def parse_phi(desc: str) -> PhiSpec:
    """Parse ``pow:g``, ``log``, ``const:c`` or ``file:<path>`` (CSV ``n,phi``)."""
    family, _, arg = desc.partition(":")
    try:
        if family == "pow":
            return PhiSpec("power", float(arg))
        if family == "log" and not arg:
            return PhiSpec("log")
        if family == "const":
            return PhiSpec("constant", float(arg) if arg else 1.0)
        if family == "file":
            return load_phi_table(Path(arg))
    except ValueError as exc:
        raise ValueError(f"bad Phi descriptor {desc!r}: {exc}") from None
    raise ValueError(f"bad Phi descriptor {desc!r}")


def load_phi_table(path: Path) -> PhiSpec:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"n", "phi"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns n,phi")
        rows = tuple((float(r["n"]), float(r["phi"])) for r in reader)
    return PhiSpec("tabulated", table=rows)


def choose_alphas(
    phi: PhiSpec, p: float, spec: GroupSpec, r: float = 0.5, max_terms: int | None = None
) -> tuple[int, ...]:
    """Greedy scales ``alpha_0 < alpha_1 < ...`` with ``(Phi(M_a)/M_a^(1/p-1))^(p/2) <= r^k``.

    The series of selected terms is then dominated by ``sum r^k``.  Scales run
    over ``1 <= alpha`` with ``alpha + 1 <= N``; selection stops at the first
    ``k`` with no admissible scale, or after ``max_terms`` (which then must all fit).
    """
    e = _exponent(p)
    if not 0 < r < 1:
        raise ValueError(f"budget ratio must lie in (0, 1), got {r}")
    alphas: list[int] = []
    prev = 0
    k = 0
    while max_terms is None or k < max_terms:
        found = None
        for a in range(prev + 1, spec.N):
            M = spec.M[a]
            val = float(phi(M))
            if val <= 0:
                continue
            if (val / M**e) ** (p / 2) <= r**k:
                found = a
                break
        if found is None:
            break
        alphas.append(found)
        prev = found
        k += 1
    if not alphas:
        raise ValueError("no admissible scale below the truncation depth")
    if max_terms is not None and len(alphas) < max_terms:
        raise ValueError(f"only {len(alphas)} of {max_terms} scales fit below depth {spec.N}")
    return tuple(alphas)


@dataclass(frozen=True)
class CounterexampleSpec:
    spec: GroupSpec
    p: float
    phi: PhiSpec
    alphas: tuple[int, ...]
    bigM: float | None = None

    def __post_init__(self):
        _exponent(self.p)
        if not self.alphas:
            raise ValueError("need at least one scale")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("scales must be strictly increasing")
        if self.alphas[-1] + 1 > self.spec.N:
            raise ValueError(f"scale {self.alphas[-1]} + 1 exceeds depth {self.spec.N}")
        if self.bigM is None:
            object.__setattr__(self, "bigM", float(self.spec.lam))

    @property
    def scales(self) -> list[int]:
        return [self.spec.M[a] for a in self.alphas]

    @property
    def terms(self) -> np.ndarray:
        """``(Phi(M_a)/M_a^(1/p-1))^(p/2)``, the series certified by the selection."""
        e = 1.0 / self.p - 1.0
        return np.array([(self.phi(M) / M**e) ** (self.p / 2) for M in self.scales])

    @property
    def lambdas(self) -> np.ndarray:
        e = 1.0 / self.p - 1.0
        return np.array([(self.phi(M) / M**e) ** 0.5 for M in self.scales])

    def closed_coefficient(self, k: int) -> float:
        """Block value ``(1/bigM) M_a^((1/p-1)/2) Phi(M_a)^(1/2)``."""
        e = 1.0 / self.p - 1.0
        M = self.spec.M[self.alphas[k]]
        return M ** (e / 2) * self.phi(M) ** 0.5 / self.bigM

    def closed_ratio(self, k: int) -> float:
        e = 1.0 / self.p - 1.0
        M = self.spec.M[self.alphas[k]]
        return (M**e / self.phi(M)) ** 0.5 / self.bigM


def counterexample_atoms(cs: CounterexampleSpec) -> list[Atom]:
    """``a_k = (M_a^(1/p-1)/bigM) (D_{M_{a+1}} - D_{M_a})`` as atoms on ``I_a``."""
    spec = cs.spec
    e = 1.0 / cs.p - 1.0
    zero = Point.zero(spec)
    out = []
    for a in cs.alphas:
        vals = spec.M[a] ** e / cs.bigM * (dirichlet_block_grid(spec, a + 1) - dirichlet_block_grid(spec, a))
        out.append(Atom(cs.p, Interval(a, zero), GridFunction(spec, vals)))
    return out


def build_counterexample(cs: CounterexampleSpec) -> Martingale:
    """``f = sum_k lambda_k a_k``, synthesized from its atoms."""
    d = AtomicDecomposition(tuple(float(x) for x in cs.lambdas), tuple(counterexample_atoms(cs)), cs.p)
    return synthesize(d)


@dataclass
class CounterexampleReport:
    rows: list[dict]
    max_rel_err: float
    off_block_max: float
    block_spread: float

    @property
    def rhos(self) -> list[float]:
        return [r["rho_k"] for r in self.rows]

    @property
    def monotone(self) -> bool:
        rho = self.rhos
        return all(b > a for a, b in zip(rho, rho[1:]))


def counterexample_coefficients(f: Martingale, cs: CounterexampleSpec) -> CounterexampleReport:
    """Compare the computed spectrum of ``f`` with the block closed form."""
    coeffs = martingale_spectrum(f)
    spec = cs.spec
    on_block = np.zeros(spec.order, dtype=bool)
    rows = []
    max_rel = 0.0
    spread = 0.0
    rho = divergence_ratios(f, cs)
    for k, a in enumerate(cs.alphas):
        lo, hi = spec.M[a], spec.M[a + 1]
        on_block[lo:hi] = True
        closed = cs.closed_coefficient(k)
        block = coeffs[lo:hi]
        max_rel = max(max_rel, float(np.max(np.abs(block - closed)) / abs(closed)))
        spread = max(spread, float(np.ptp(block.real) + np.max(np.abs(block.imag))))
        rows.append(
            {
                "k": k,
                "alpha_k": a,
                "M_alpha": lo,
                "coeff_numeric": float(coeffs[lo].real),
                "coeff_closed": closed,
                "phi_value": float(cs.phi(lo)),
                "rho_k": float(rho[k]),
            }
        )
    off = float(np.max(np.abs(coeffs[~on_block]))) if (~on_block).any() else 0.0
    return CounterexampleReport(rows, max_rel, off, spread)


def divergence_ratios(f: Martingale, cs: CounterexampleSpec) -> np.ndarray:
    """``rho_k = f^(M_{alpha_k}) / Phi(M_{alpha_k})`` from the computed spectrum."""
    coeffs = martingale_spectrum(f)
    return np.array([coeffs[M].real / cs.phi(M) for M in cs.scales])


# -- auxiliary probes --------------------------------------------------------


def hardy_inequality_check(f: Martingale, p: float) -> tuple[float, float]:
    """``(sum_{k>=1} |f^(k)|^p / k^(2-p), ||f||_{H_p}^p)``."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    coeffs = np.abs(martingale_spectrum(f))
    k = np.arange(1, f.spec.order)
    lhs = float(np.sum(coeffs[1:] ** p / k ** (2 - p)))
    return lhs, hp_quasinorm(f, p) ** p


def hardy_ratio(f: Martingale, p: float) -> float:
    lhs, rhs = hardy_inequality_check(f, p)
    if rhs == 0:
        raise ValueError("zero martingale")
    return lhs / rhs


def riemann_lebesgue_probe(f: GridFunction, w: int) -> np.ndarray:
    """Window maxima ``max{|f^(n)| : j w <= n < (j+1) w}``."""
    if w < 1:
        raise ValueError(f"window must be >= 1, got {w}")
    c = np.abs(forward_fast(f).coeffs)
    pad = (-len(c)) % w
    c = np.concatenate([c, np.zeros(pad)])
    return c.reshape(-1, w).max(axis=1)
