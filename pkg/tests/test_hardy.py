import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vilenkin.group import GroupSpec, Interval, Point
from vilenkin.hardy import (
    Atom,
    AtomicDecomposition,
    Martingale,
    condition,
    hp_quasinorm,
    lp_quasinorm,
    make_atom,
    martingale_coefficient,
    martingale_spectrum,
    maximal,
    random_interval,
    synthesize,
    validate_atom,
    write_decomposition_csv,
)
from vilenkin.transform import GridFunction, forward_fast, partial_sum

from conftest import all_points


def random_grid(spec, rng):
    return GridFunction(spec, rng.standard_normal(spec.order))


def test_condition_endpoints(spec36, rng):
    f = random_grid(spec36, rng)
    assert np.allclose(condition(f, 0).samples, f.samples.mean())
    assert np.array_equal(condition(f, spec36.N).samples, f.samples)


def test_condition_by_enumeration(spec36, rng):
    f = random_grid(spec36, rng)
    pts = list(all_points(spec36))
    for n in range(spec36.N + 1):
        E = condition(f, n).samples
        for r, x in enumerate(pts):
            members = [q for q, y in enumerate(pts) if y[:n] == x[:n]]
            assert abs(E[r] - f.samples[members].mean()) < 1e-12
        assert np.max(np.abs(E - partial_sum(forward_fast(f), spec36.M[n]).samples)) < 1e-10


def test_tower_property(spec36, rng):
    f = random_grid(spec36, rng)
    for m in range(spec36.N + 1):
        for n in range(m + 1):
            lhs = condition(condition(f, m), n).samples
            assert np.max(np.abs(lhs - condition(f, n).samples)) < 1e-12


def test_martingale_levels_consistent(spec36, rng):
    F = Martingale(random_grid(spec36, rng))
    for n in range(spec36.N + 1):
        lev = F.level(n).samples
        # constant on each I_n cell
        assert np.allclose(lev.reshape(-1, spec36.M[n]), lev[: spec36.M[n]])
    Martingale.from_levels(F.levels)
    bad = list(F.levels)
    bad[1] = bad[2]
    with pytest.raises(ValueError):
        Martingale.from_levels(bad)


def test_maximal_examples(spec36, rng):
    c = Martingale(GridFunction(spec36, np.full(36, -2.5)))
    assert np.allclose(maximal(c), 2.5)
    F = Martingale(random_grid(spec36, rng))
    assert np.all(maximal(F) >= np.abs(F.finest.samples))


def test_lp_quasinorm(spec36, rng):
    for p in (0.25, 0.5, 1, 2):
        assert lp_quasinorm(np.ones(36), p) == pytest.approx(1)
    for n in range(spec36.N + 1):
        ind = Interval(n, Point.zero(spec36)).mask().astype(float)
        assert lp_quasinorm(ind, 1) == pytest.approx(1 / spec36.M[n])
    f = random_grid(spec36, rng)
    energy = np.sum(np.abs(forward_fast(f).coeffs) ** 2)
    assert lp_quasinorm(f, 2) == pytest.approx(np.sqrt(energy), rel=1e-12)
    with pytest.raises(ValueError):
        lp_quasinorm(f, 0)


def test_hp_quasinorm(spec36, rng):
    one = Martingale(GridFunction(spec36, np.ones(36)))
    assert hp_quasinorm(one, 0.5) == pytest.approx(1)
    F = Martingale(random_grid(spec36, rng))
    assert hp_quasinorm(-3 * F, 0.5) == pytest.approx(3 * hp_quasinorm(F, 0.5))
    with pytest.raises(ValueError):
        hp_quasinorm(F, -1)


def test_p_subadditivity(spec36, rng):
    for p in (0.25, 0.5, 1.0):
        for _ in range(20):
            f, g = random_grid(spec36, rng), random_grid(spec36, rng)
            assert lp_quasinorm(f + g, p) ** p <= lp_quasinorm(f, p) ** p + lp_quasinorm(g, p) ** p + 1e-12


def test_validate_atom_controls(spec36):
    I = Interval(2, Point.from_rank(spec36, 5))
    zero = Atom(0.5, I, GridFunction.zeros(spec36))
    assert validate_atom(zero)
    const = Atom(0.5, I, GridFunction(spec36, np.where(I.mask(), 1.0, 0.0)))
    check = validate_atom(const)
    assert not check and not check.mean_ok and check.sup_ok and check.support_ok
    leak = np.zeros(36)
    leak[np.flatnonzero(~I.mask())[:2]] = [1.0, -1.0]
    assert not validate_atom(Atom(0.5, I, GridFunction(spec36, leak))).support_ok
    tall = np.zeros(36)
    idx = np.flatnonzero(I.mask())[:2]
    tall[idx] = [1000.0, -1000.0]
    assert not validate_atom(Atom(0.5, I, GridFunction(spec36, tall))).sup_ok


def test_make_atom_many_seeds():
    spec = GroupSpec.from_string("2,3", 6)
    rng = np.random.default_rng(7)
    for seed in range(1000):
        p = (0.25, 0.5, 0.75, 1.0)[seed % 4]
        I = random_interval(spec, rng)
        a = make_atom(spec, I, p, seed)
        check = validate_atom(a)
        assert check, check.failures
        # exact zero sum, so the mean over the support is exactly zero
        assert a.values.samples[I.mask()].sum() == 0


def test_make_atom_deterministic_and_distinct(spec36):
    I = Interval(1, Point.zero(spec36))
    a = make_atom(spec36, I, 0.5, 3).values.samples
    assert np.array_equal(a, make_atom(spec36, I, 0.5, 3).values.samples)
    assert not np.array_equal(a, make_atom(spec36, I, 0.5, 4).values.samples)


def test_make_atom_degenerate(spec36):
    for r in (0, spec36.N):
        a = make_atom(spec36, Interval(r, Point.zero(spec36)), 0.5, 1)
        assert not np.any(a.values.samples)
        assert validate_atom(a)


def test_atom_maximal_localisation_and_norm():
    spec = GroupSpec.from_string("2,3", 6)
    rng = np.random.default_rng(1)
    for seed in range(200):
        p = (0.25, 0.5, 0.75)[seed % 3]
        a = make_atom(spec, random_interval(spec, rng), p, seed)
        fstar = maximal(a.martingale())
        assert np.all(fstar[~a.interval.mask()] == 0.0)
        assert np.all(fstar <= a.bound * (1 + 1e-12))
        assert hp_quasinorm(a.martingale(), p) <= 1 + 1e-10


def test_synthesize_single_and_sum(spec36):
    rng = np.random.default_rng(3)
    atoms = [make_atom(spec36, random_interval(spec36, rng), 0.5, s) for s in range(4)]
    single = synthesize(AtomicDecomposition((1.0,), (atoms[0],), 0.5))
    assert np.array_equal(single.finest.samples, atoms[0].values.samples)
    weights = (0.5, -1.25, 2.0, 0.1)
    d = AtomicDecomposition(weights, tuple(atoms), 0.5)
    F = synthesize(d)
    expect = sum(w * forward_fast(a.values).coeffs for w, a in zip(weights, atoms))
    assert np.max(np.abs(martingale_spectrum(F) - expect)) < 1e-10
    for n in range(spec36.N + 1):
        lev = sum(w * condition(a.values, n).samples for w, a in zip(weights, atoms))
        assert np.max(np.abs(F.level(n).samples - lev)) < 1e-12
    # p-triangle inequality for the quasinorm, each atom contributes at most 1
    bound = d.weight_sum() * max(hp_quasinorm(a.martingale(), 0.5) ** 0.5 for a in atoms)
    assert hp_quasinorm(F, 0.5) ** 0.5 <= bound + 1e-12


def test_atom_levels_vanish_below_scale(spec36):
    rng = np.random.default_rng(5)
    a = make_atom(spec36, Interval(2, Point.from_rank(spec36, 3)), 0.5, rng)
    F = a.martingale()
    for n in range(spec36.N + 1):
        if n <= 2:
            assert np.all(F.level(n).samples == 0)
    assert np.array_equal(F.level(spec36.N).samples, a.values.samples)


def test_martingale_coefficient(spec36, rng):
    g = random_grid(spec36, rng)
    F = Martingale.from_function(g)
    coeffs = forward_fast(g).coeffs
    for i in (0, 3, 35):
        assert martingale_coefficient(F, i) == pytest.approx(coeffs[i], abs=1e-12)
    assert martingale_coefficient(F, 0) == pytest.approx(g.samples.mean())
    with pytest.raises(ValueError):
        martingale_coefficient(F, 36)


def test_coefficient_stabilisation(spec36, rng):
    F = Martingale(random_grid(spec36, rng))
    for i in range(36):
        vals = [forward_fast(F.level(k)).coeffs[i] for k in range(spec36.N + 1) if spec36.M[k] > i]
        assert np.max(np.abs(np.array(vals) - vals[-1])) < 1e-12


def test_decomposition_csv(spec36):
    a = make_atom(spec36, Interval(2, Point.from_rank(spec36, 5)), 0.5, 0)
    buf = io.StringIO()
    write_decomposition_csv(AtomicDecomposition((0.5,), (a,), 0.5), buf)
    assert buf.getvalue() == "k,mu_k,interval_rank,base_rank\n0,0.5,2,5\n"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(2, 4), min_size=2, max_size=5), st.floats(0.2, 1.0), st.integers(0, 10**6))
def test_atom_property(m, p, seed):
    spec = GroupSpec(tuple(m))
    rng = np.random.default_rng(seed)
    a = make_atom(spec, random_interval(spec, rng), p, rng)
    assert validate_atom(a)
    assert hp_quasinorm(a.martingale(), p) <= 1 + 1e-10
