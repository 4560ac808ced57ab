"""Exit criteria; each test reports one PASS/FAIL line in the terminal summary."""

import contextlib
import csv
import io
import time

import numpy as np
import pytest

from vilenkin.cli import main
from vilenkin.group import GroupSpec, Point
from vilenkin.hardy import hp_quasinorm, maximal, validate_atom
from vilenkin.system import dirichlet_block_grid, dirichlet_closed, dirichlet_closed_grid
from vilenkin.transform import GridFunction, forward_fast, forward_naive, inverse, to_csv_string
from vilenkin.verify import (
    CounterexampleSpec,
    atom_nullity_check,
    atom_tail_integral,
    build_counterexample,
    choose_alphas,
    counterexample_coefficients,
    hardy_ratio,
    parse_phi,
    random_atom,
    run_bound_trials,
    tail_spec_bound,
    trial_rng,
)

from conftest import ACCEPTANCE_LINES, all_points, psi_oracle

P_VALUES = (0.25, 0.5, 0.75)


@contextlib.contextmanager
def criterion(number, title, limit_s):
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException:
        ACCEPTANCE_LINES.append(f"[{number}] FAIL {title} ({time.perf_counter() - t0:.2f}s) {info.get('detail', '')}")
        raise
    elapsed = time.perf_counter() - t0
    ok = elapsed < limit_s
    ACCEPTANCE_LINES.append(
        f"[{number}] {'PASS' if ok else 'FAIL'} {title} ({elapsed:.2f}s < {limit_s}s) {info.get('detail', '')}"
    )
    assert ok, f"runtime {elapsed:.2f}s exceeds {limit_s}s"


def test_1_kernel_closed_forms():
    with criterion(1, "Dirichlet closed forms match brute force at M_N=36", 1.0) as info:
        spec = GroupSpec((2, 3, 2, 3))
        pts = list(all_points(spec))
        psi = np.array([[psi_oracle(spec, k, x) for x in pts] for k in range(spec.order)])
        brute = np.cumsum(psi, axis=0)  # row n-1 is D_n
        worst = 0.0
        for n in range(1, spec.order + 1):
            worst = max(worst, np.max(np.abs(dirichlet_closed_grid(spec, n) - brute[n - 1])))
            for r, x in enumerate(pts):
                worst = max(worst, abs(dirichlet_closed(n, Point(spec, x)) - brute[n - 1, r]))
        for k in range(spec.N + 1):
            worst = max(worst, np.max(np.abs(dirichlet_block_grid(spec, k) - brute[spec.M[k] - 1])))
        info["detail"] = f"max err {worst:.2e}"
        assert worst < 1e-10


def test_2_transform_correctness():
    with criterion(2, "fast == naive, round trip, Parseval at M_N=36,1296", 10.0) as info:
        rng = np.random.default_rng(2024)
        dev = rt = pars = 0.0
        for m in ((2, 3, 2, 3), (2, 3) * 4):
            spec = GroupSpec(m)
            for _ in range(100):
                f = GridFunction(spec, rng.standard_normal(spec.order) + 1j * rng.standard_normal(spec.order))
                fast = forward_fast(f).coeffs
                naive = forward_naive(f).coeffs
                dev = max(dev, np.max(np.abs(fast - naive)))
                back = inverse(forward_fast(f)).samples
                rt = max(rt, np.max(np.abs(back - f.samples)) / np.max(np.abs(f.samples)))
                pars = max(pars, abs(np.mean(np.abs(f.samples) ** 2) - np.sum(np.abs(naive) ** 2)))
        info["detail"] = f"dev {dev:.1e}, round trip {rt:.1e}, Parseval {pars:.1e}"
        assert dev < 1e-9 and rt < 1e-9 and pars < 1e-10


def test_3_atom_suite():
    with criterion(3, "200 atoms per (p, N_a): atom, nullity, H_p <= 1, tail, localisation", 60.0) as info:
        worst_tail = 0.0
        count = 0
        for p in P_VALUES:
            for rank in (3, 4, 5):
                spec = GroupSpec.from_string("2,3", rank + 2)
                bound = tail_spec_bound(spec, rank, p)
                assert bound == pytest.approx(spec.lam ** (2 * p) * sum(spec.M[s] ** (p - 1) for s in range(rank)))
                for t in range(200):
                    a = random_atom(spec, p, trial_rng(p * 1000 + rank, t), rank)
                    assert validate_atom(a), (p, rank, t)
                    assert atom_nullity_check(a), (p, rank, t)
                    F = a.martingale()
                    assert hp_quasinorm(F, p) <= 1 + 1e-10
                    tail = atom_tail_integral(a, p)
                    assert tail <= bound, (p, rank, t, tail, bound)
                    worst_tail = max(worst_tail, tail / bound)
                    assert np.all(maximal(F)[~a.interval.mask()] == 0.0)
                    count += 1
        info["detail"] = f"{count} atoms, worst tail/C_spec {worst_tail:.3f}"


def test_4_coefficient_bound_uniform():
    with criterion(4, "max coefficient ratio stable within x2 over N=4..8", 120.0) as info:
        parts = []
        for p in P_VALUES:
            per_depth = []
            for depth in range(4, 9):
                report = run_bound_trials(GroupSpec.from_string("2,3", depth), p, 100, seed=4)
                assert np.isfinite(report.max_ratio)
                per_depth.append(report.max_ratio)
            factor = max(per_depth) / min(per_depth)
            parts.append(f"p={p}: {factor:.2f}")
            assert factor < 2, (p, per_depth)
        info["detail"] = "spread " + ", ".join(parts)


def test_5_counterexample():
    with criterion(5, "sharpness construction: blocks, closed form, zeros, monotone ratios", 60.0) as info:
        spec = GroupSpec.from_string("2,3", 12)
        phi = parse_phi("pow:0.5")
        assert phi.certify(0.5)
        alphas = choose_alphas(phi, 0.5, spec, 0.9)
        assert len(alphas) >= 3
        cs = CounterexampleSpec(spec, 0.5, phi, alphas)
        rep = counterexample_coefficients(build_counterexample(cs), cs)
        info["detail"] = f"{len(alphas)} blocks, rel err {rep.max_rel_err:.1e}, off-block {rep.off_block_max:.1e}"
        assert rep.max_rel_err < 1e-9
        assert rep.off_block_max < 1e-12
        assert rep.monotone


def test_6_hardy_inequality():
    with criterion(6, "Hardy-type ratio stable within x2 over N=4,6,8", 60.0) as info:
        parts = []
        for p in P_VALUES:
            per_depth = []
            for depth in (4, 6, 8):
                spec = GroupSpec.from_string("2,3", depth)
                ratios = [hardy_ratio(random_atom(spec, p, trial_rng(4, t)).martingale(), p) for t in range(100)]
                per_depth.append(max(ratios))
            factor = max(per_depth) / min(per_depth)
            parts.append(f"p={p}: {factor:.2f}")
            assert factor < 2, (p, per_depth)
        info["detail"] = "spread " + ", ".join(parts)


def _bench(argv, capsys):
    assert main(["bench", *argv]) == 0
    return list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


def test_7_performance(capsys):
    with criterion(7, "fast transform < 1s at 46656; speedup >= 50x at 4096", 120.0) as info:
        (big,) = _bench(["--m", "6", "--depth", "6"], capsys)
        (mid,) = _bench(["--m", "2", "--depth", "12"], capsys)
        assert int(big["M_N"]) == 46656 and int(mid["M_N"]) == 4096
        info["detail"] = f"fast@46656 {float(big['fast_s']) * 1e3:.1f}ms, speedup@4096 {float(mid['speedup']):.0f}x"
        assert float(big["fast_s"]) < 1.0
        assert float(mid["speedup"]) >= 50


def test_8_determinism(tmp_path, capsys):
    with criterion(8, "identical config and seed give byte-identical reports", 60.0) as info:
        src = tmp_path / "in.csv"
        src.write_text(to_csv_string(np.random.default_rng(8).standard_normal(36)))
        commands = [
            ["table", "--m", "2,3", "--depth", "6"],
            ["transform", str(src), "--depth", "4", "--check"],
            ["atoms", "--trials", "20", "--seed", "11"],
            ["bound", "--trials", "20", "--seed", "11", "--sweep"],
            ["counterexample", "--budget", "0.9"],
        ]
        for cmd in commands:
            blobs = []
            for fmt in ("csv", "json"):
                for i in range(2):
                    out = tmp_path / f"{cmd[0]}-{fmt}-{i}"
                    assert main([*cmd, "--format", fmt, "--out", str(out)]) == 0
                    blobs.append(out.read_bytes())
            capsys.readouterr()
            assert blobs[0] == blobs[1] and blobs[2] == blobs[3], cmd[0]
        # bench rows carry wall times; its layout must still repeat exactly
        layouts = []
        for i in range(2):
            out = tmp_path / f"bench-{i}"
            main(["bench", "--m", "2,3", "--depth", "5", "--out", str(out)])
            layouts.append([(r["m"], r["depth"], r["M_N"]) for r in csv.DictReader(out.open())])
        capsys.readouterr()
        assert layouts[0] == layouts[1]
        info["detail"] = f"{len(commands)} commands x 2 formats"
