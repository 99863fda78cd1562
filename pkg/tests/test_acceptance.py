"""Acceptance criteria 1-10.

Each test records (passed, detail) into conftest.ACCEPTANCE so the terminal
summary prints one PASS/FAIL line per criterion. The 2-D criteria run through
the CLI runner against one shared cache, which criterion 10 then replays.
"""
import json
import time
from math import e, pi, sqrt

import numpy as np
import pytest
from conftest import ACCEPTANCE

from wellsplit.cli import read_csv, run
from wellsplit.dynamics import (PhasePoint, compute_libration, flow, floquet_spectrum_errors, libration_scan,
                                monodromy_and_floquet, symplectic_defect)
from wellsplit.formulas import b_coeff, excited_splitting_1d, ll_splitting_1d, transverse_splitting
from wellsplit.modeltori import model_agmon_F, model_agmon_F_quad
from wellsplit.potentials import check_quasi1d_assumptions, locate_minima
from wellsplit.spectral import GridSpec, build_operator, lowest_eigenpairs, solve_1d, splittings
from wellsplit.wkb import riccati_hessian, wkb_constants

pytestmark = pytest.mark.slow

RUNS = {}  # (command, config) -> (artifacts, digest, out dir)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def cli(workdir, command, config):
    out = workdir / f"{command}-{config}"
    art, digest, _ = run(command, config, cache_dir=workdir / "cache", out=out)
    RUNS[(command, config)] = (art, digest, out)
    return art


def record(n, ok, detail, t0):
    ACCEPTANCE[n] = (bool(ok), f"{detail} [{time.perf_counter() - t0:.1f} s]")


def test_criterion_01_coefficients():
    t0 = time.perf_counter()
    b = [b_coeff(m) for m in range(201)]
    first = abs(b[0] - sqrt(pi / e))
    ok = first <= 1e-12 and all(x > y for x, y in zip(b, b[1:])) and 1 < b[200] < 1.001
    ok = ok and time.perf_counter() - t0 < 1
    record(1, ok, f"|b_0 - sqrt(pi/e)| = {first:.1e}, b_200 = {b[200]:.7f}", t0)
    assert ok


@pytest.mark.xfail(strict=True, reason="the excited-level estimate evaluated at E = (2m+1) omega hbar is off by "
                   "up to 82% for m = 3, and LL at the fixed energy 0.5 is not at a level pair; see the ledger")
def test_criterion_02_one_dimensional_suite(quartic_1d):
    t0 = time.perf_counter()
    omega = 2.0
    ratios = {}
    for h in (0.04, 0.02):
        s = solve_1d(quartic_1d, h, L=2.5, n=4001, count=4)
        ratios[h] = [excited_splitting_1d(quartic_1d, m, h, omega, strict=False).value / s.splittings[m]
                     for m in range(4)]
    # LL at E = 0.5 against the pair nearest that energy
    s = solve_1d(quartic_1d, 0.01, L=2.5, n=4001, count=16)
    mid = 0.5 * (s.even + s.odd)
    k = int(np.argmin(np.abs(mid - 0.5)))
    ll = ll_splitting_1d(quartic_1d, 0.5, 0.01).value / s.splittings[k]
    within = all(abs(r - 1) <= 0.15 for r in ratios[0.02])
    trend = all(abs(a - 1) < abs(b - 1) for a, b in zip(ratios[0.02], ratios[0.04]))
    ok = within and trend and abs(ll - 1) <= 0.15
    record(2, ok, "h=0.02 ratios " + " ".join(f"{r:.3f}" for r in ratios[0.02])
           + f"; trend {trend}; LL(E=0.5, h=0.01) ratio {ll:.3f}", t0)
    assert ok


def test_criterion_03_separable_collapse(separable, separable_instanton, quartic_1d):
    t0 = time.perf_counter()
    h = 0.1
    two_d = splittings(separable, h, GridSpec(2.5, 2.0, 257, 129), count=4)
    one_d = solve_1d(quartic_1d, h, L=2.5, n=257, count=2)
    spec_err = max(abs(two_d.splittings[(m, 0)] / one_d.splittings[m] - 1) for m in (0, 1))
    beta_err = max(abs(compute_libration(separable, f, inst=separable_instanton).beta / 3.0 - 1)
                   for f in (0.02, 0.1, 0.3))
    tee_err = abs(wkb_constants(separable_instanton).T_const - 1)
    # the transverse estimate with the gap test waived is the 1-D excited estimate; the
    # scan is dense enough that monotone cubic interpolation of S(E) is good to ~1e-9
    table = libration_scan(separable, np.geomspace(0.005, 0.7, 200), inst=separable_instanton)
    assumptions = {**check_quasi1d_assumptions(separable), "gap_ok": True}
    formula_err = 0.0
    for m in (0, 1):
        t = transverse_splitting(table, 2.0, 3.0, m, 0.05, assumptions)
        x = excited_splitting_1d(quartic_1d, m, 0.05, 2.0)
        formula_err = max(formula_err, abs(t.value / x.value - 1), abs(t.prefactor / x.prefactor - 1))
    ok = max(spec_err, beta_err, tee_err, formula_err) <= 1e-6
    record(3, ok, f"spectral {spec_err:.1e}, beta {beta_err:.1e}, tee {tee_err:.1e}, formula {formula_err:.1e}", t0)
    assert ok


def test_criterion_04_transverse_vs_exact(workdir):
    t0 = time.perf_counter()
    rows = read_csv(cli(workdir, "splitting-compare", "curved-quartic")["splitting_compare.csv"])
    ratio = {(r["method"], float(r["hbar"])): float(r["ratio"]) for r in rows if r["m"] == "0"}
    hs = [0.12, 0.08, 0.05]
    tr = [ratio[("transverse", h)] for h in hs]
    monotone = all(abs(a - 1) > abs(b - 1) for a, b in zip(tr, tr[1:]))
    ok = 0.6 <= tr[-1] <= 1.4 and monotone
    tee = ratio[("tee", 0.05)]
    record(4, ok, "transverse ratios " + " ".join(f"{r:.3f}" for r in tr)
           + f"; at h=0.05 crossing {ratio[('crossing', 0.05)]:.3f}, tee x1 {tee:.3f}, tee x2 {2 * tee:.3f}", t0)
    assert ok


def test_criterion_05_exponent_slope(workdir):
    t0 = time.perf_counter()
    S0 = json.loads(cli(workdir, "instanton", "curved-quartic")["instanton.json"])["S0"]
    rows = read_csv(cli(workdir, "splitting-exact", "curved-slope")["splitting_exact.csv"])
    pts = [(float(r["hbar"]), float(r["splitting"])) for r in rows if (r["m"], r["n"]) == ("0", "0")]
    h, dE = np.array(pts).T
    slope = np.polyfit(1 / h, np.log(dE), 1)[0]
    rel = abs(slope / S0 + 1)
    ok = len(h) >= 4 and rel <= 0.03
    record(5, ok, f"slope {slope:.5f} vs -S0 {-S0:.5f} over {len(h)} hbar values ({100 * rel:.2f}%)", t0)
    assert ok


def test_criterion_06_floquet_exponent(workdir, curved):
    t0 = time.perf_counter()
    rows = read_csv(cli(workdir, "floquet-check", "curved-quartic")["floquet_check.csv"])
    gap = {float(r["E_fraction"]): float(r["gap"]) for r in rows}
    lam2 = locate_minima(curved)[1].lam2
    ok = gap[0.02] < gap[0.1] and gap[0.02] <= 0.1 * lam2
    record(6, ok, f"gap {gap[0.02]:.2e} at 0.02 barrier, {gap[0.1]:.2e} at 0.1 barrier", t0)
    assert ok


@pytest.mark.xfail(strict=True, reason="the action remainder as specified grows relative to E as E decreases; "
                   "the corrected remainder halves and is reported alongside; see the ledger")
def test_criterion_07_action_expansion(workdir):
    t0 = time.perf_counter()
    parts, ok = [], True
    for config in ("separable-quartic", "curved-quartic"):
        rows = read_csv(cli(workdir, "action-check", config)["action_check.csv"])
        q = {float(r["E"]): r for r in rows}
        printed = abs(float(q[0.02]["r_printed_over_E"]) / float(q[0.08]["r_printed_over_E"]))
        corrected = abs(float(q[0.02]["r_corrected_over_E"]) / float(q[0.08]["r_corrected_over_E"]))
        ok = ok and printed <= 0.5
        parts.append(f"{config} factor {printed:.3f} (corrected {corrected:.3f})")
    record(7, ok, "; ".join(parts), t0)
    assert ok


def test_criterion_08_herring(workdir):
    t0 = time.perf_counter()
    gaps = {}
    for config, budget in (("separable-quartic", 0.10), ("curved-herring", 0.25)):
        rows = read_csv(cli(workdir, "herring", config)["herring.csv"])
        row = next(r for r in rows if r["m"] == "0" and float(r["hbar"]) == 0.1)
        gaps[config] = (float(row["relative_gap"]), budget)
    ok = all(g <= b for g, b in gaps.values())
    record(8, ok, "; ".join(f"{c} gap {g:.1e}" for c, (g, _) in gaps.items()), t0)
    assert ok


def test_criterion_09_structural_invariants(curved, curved_instanton):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    drift = 0.0
    for _ in range(10):
        start = PhasePoint(rng.uniform(-1.2, 1.2, 2) * [1, 0.3], rng.uniform(-0.3, 0.3, 2))
        seg = flow(curved, start, 1.0)
        drift = max(drift, seg.energy_drift / max(abs(seg.e), float(np.abs(seg._v).max()), 1e-3))
    lib = compute_libration(curved, 0.5 * curved.barrier, inst=curved_instanton)
    M, beta = monodromy_and_floquet(curved, lib)
    sym = symplectic_defect(M)
    eig = max(floquet_spectrum_errors(M, beta, lib.T).values())
    R = riccati_hessian(curved_instanton).M
    ric = float(np.abs(R - R.transpose(0, 2, 1)).max())
    _, right = locate_minima(curved)
    agmon = 0.0
    for _ in range(50):
        y = np.sqrt(2 * rng.uniform(0, 0.2, 2) / right.lam)
        x = (y + rng.uniform(0, 1, 2)) * rng.choice([-1, 1], 2)
        agmon = max(agmon, abs(model_agmon_F(right, y, x) - model_agmon_F_quad(right, y, x)))
    fd, d = 0.0, 1e-5
    for x1, x2 in rng.uniform(-1.5, 1.5, (20, 2)):
        g, H = curved.gradient(x1, x2), curved.hessian(x1, x2)
        gfd = [(curved(x1 + d, x2) - curved(x1 - d, x2)) / (2 * d), (curved(x1, x2 + d) - curved(x1, x2 - d)) / (2 * d)]
        hfd = np.column_stack([(curved.gradient(x1 + d, x2) - curved.gradient(x1 - d, x2)) / (2 * d),
                               (curved.gradient(x1, x2 + d) - curved.gradient(x1, x2 - d)) / (2 * d)])
        fd = max(fd, np.abs(g - gfd).max() / max(1, np.abs(g).max()), np.abs(H - hfd).max() / max(1, np.abs(H).max()))
    g = GridSpec(2.2, 1.6, 41, 31)
    full = lowest_eigenpairs(build_operator(curved, 0.15, g, "none"), 8, tol=1e-11).values
    halves = [lowest_eigenpairs(build_operator(curved, 0.15, g, p), 4, tol=1e-11).values for p in ("even", "odd")]
    merge = float(np.abs(np.sort(np.concatenate(halves)) / full - 1).max())
    ok = (drift <= 1e-9 and sym <= 1e-8 and eig <= 1e-6 and ric <= 1e-12 and agmon <= 1e-10 and fd <= 1e-6
          and merge <= 1e-10)
    record(9, ok, f"drift {drift:.1e}, symplectic {sym:.1e}, floquet set {eig:.1e}, riccati {ric:.1e}, "
           f"agmon {agmon:.1e}, derivatives {fd:.1e}, parity merge {merge:.1e}", t0)
    assert ok


def test_criterion_10_reproducibility(workdir):
    t0 = time.perf_counter()
    if not RUNS:
        cli(workdir, "action-check", "separable-quartic")
    ok, n = True, 0
    for (command, config), (art, digest, out) in list(RUNS.items()):
        again = workdir / f"warm-{command}-{config}"
        art2, digest2, hit = run(command, config, cache_dir=workdir / "cache", out=again)
        ok = ok and hit and digest2 == digest and art2 == art
        for name in art:
            n += 1
            ok = ok and (out / name).read_bytes() == (again / name).read_bytes()
    record(10, ok, f"{len(RUNS)} commands, {n} artifacts byte-identical from cache", t0)
    assert ok
