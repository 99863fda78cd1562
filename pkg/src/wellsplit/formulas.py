"""Asymptotic splitting formulas as plain functions of dynamical and WKB data.

Energies and times follow the package clock (dx/dt = xi, dxi/dt = grad V / 2),
on which the harmonic levels of -h^2 Laplacian + V are h(lam1(2m+1) + lam2(2n+1)).
"""
from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass
from math import e, exp, factorial, lgamma, log, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import AssumptionViolated, EnergyOutOfRegime, NoBracket, TurningPointDegeneracy

log_ = logging.getLogger(__name__)

METHODS = ("LL", "ground", "excited1d", "transverse", "crossing", "tee")


class NonMonotoneWarning(UserWarning):
    pass


def inputs_digest(**inputs) -> str:
    """sha256 of a canonical JSON dump (sorted keys, 17 significant digits)."""
    def canon(x):
        if isinstance(x, (float, np.floating)):
            return format(float(x), ".17g")
        if isinstance(x, (list, tuple, np.ndarray)):
            return [canon(v) for v in x]
        if isinstance(x, dict):
            return {str(k): canon(v) for k, v in x.items()}
        if isinstance(x, (np.integer,)):
            return int(x)
        return x
    blob = json.dumps(canon(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class SplittingEstimate:
    method: str
    m: int
    hbar: float
    exponent: float
    prefactor: float
    value: float
    inputs_digest: str

    @classmethod
    def build(cls, method, m, hbar, exponent, prefactor, **inputs):
        if method not in METHODS:
            raise ValueError(f"unknown method {method}")
        value = prefactor * exp(-exponent)
        digest = inputs_digest(method=method, m=m, hbar=hbar, **inputs)
        return cls(method, int(m), float(hbar), float(exponent), float(prefactor), float(value), digest)

    def row(self, exact: float | None = None):
        ratio = self.value / exact if exact else float("nan")
        return (self.method, self.m, self.hbar, self.exponent, self.prefactor, self.value,
                float("nan") if exact is None else exact, ratio)


def b_coeff(m: int) -> float:
    """sqrt(pi) (2m+1)^(m+1/2) / (2^m m! e^(m+1/2)), evaluated in log space."""
    if m < 0 or int(m) != m:
        raise ValueError("m must be a non-negative integer")
    m = int(m)
    if m <= 20:
        return sqrt(pi) * (2 * m + 1) ** (m + 0.5) / (2**m * factorial(m) * e ** (m + 0.5))
    lb = 0.5 * log(pi) + (m + 0.5) * log(2 * m + 1) - m * log(2) - lgamma(m + 1) - (m + 0.5)
    return exp(lb)


# ---- 1-D potentials ------------------------------------------------------

def _outward_root(f, start, direction, stop, step):
    x = start
    fx = f(x)
    while (stop - x) * direction > 0:
        nx = x + direction * step
        fn = f(nx)
        if fx * fn <= 0:
            return brentq(f, min(x, nx), max(x, nx), xtol=1e-15, rtol=1e-15)
        x, fx = nx, fn
    raise TurningPointDegeneracy(f"no turning point between {start} and {stop}")


def turning_points_1d(v, E: float, x_max: float = 10.0):
    """(inner, outer) turning points on the right of a symmetric barrier at x = 0."""
    if not 0 < E < v(0.0):
        raise TurningPointDegeneracy(f"E = {E} outside (0, barrier = {v(0.0)})")
    f = lambda x: v(x) - E  # noqa: E731
    step = 1e-3 * x_max
    inner = _outward_root(f, 0.0, 1, x_max, step)
    outer = _outward_root(f, inner + step * 1e-3, 1, x_max, step) if f(inner + step * 1e-3) < 0 else None
    if outer is None:
        raise TurningPointDegeneracy("turning point is degenerate (v' = 0 on {v = E})")
    for x in (inner, outer):
        dv = (v(x + 1e-6) - v(x - 1e-6)) / 2e-6
        if abs(dv) < 1e-8:
            raise TurningPointDegeneracy(f"v'(x) = {dv:.1e} at the turning point {x}")
    return inner, outer


def barrier_action_1d(v, E: float) -> float:
    """S(E) = int sqrt(v - E) over the barrier between the inner turning points."""
    inner, _ = turning_points_1d(v, E)
    val, _ = quad(lambda x: sqrt(max(v(x) - E, 0.0)), -inner, inner, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def well_period_1d(v, E: float) -> float:
    """Period of the oscillation in one well, 2 int dx / sqrt(E - v)."""
    inner, outer = turning_points_1d(v, E)
    mid, half = 0.5 * (inner + outer), 0.5 * (outer - inner)

    # x = mid + half sin(th) removes the inverse square-root endpoint singularities
    def g(th):
        x = mid + half * np.sin(th)
        return half * np.cos(th) / sqrt(max(E - v(x), 1e-300))

    val, _ = quad(g, -pi / 2, pi / 2, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2 * val


def ll_splitting_1d(v, E: float, hbar: float) -> SplittingEstimate:
    """2 (omega h / pi) exp(-S(E)/h), omega = 2 pi / T_well(E)."""
    omega = 2 * pi / well_period_1d(v, E)
    S = barrier_action_1d(v, E)
    return SplittingEstimate.build("LL", -1, hbar, S / hbar, 2 * omega * hbar / pi, E=E, omega=omega, S=S)


def harmonic_frequency_1d(v, a: float) -> float:
    """omega with v ~ omega^2 (x - a)^2 near the minimum a."""
    d = 1e-3
    v2 = (-v(a + 2 * d) + 16 * v(a + d) - 30 * v(a) + 16 * v(a - d) - v(a - 2 * d)) / (12 * d**2)
    return sqrt(v2 / 2)


def excited_splitting_1d(v, m: int, hbar: float, omega: float, energy: float | None = None,
                         strict: bool = True) -> SplittingEstimate:
    """2 b_m (omega h / pi) exp(-S(E)/h) at E = (2m+1) omega h.

    ``energy`` overrides the harmonic value, e.g. with the computed level energy.
    ``strict=False`` skips the E < barrier/2 regime check.
    """
    E = (2 * m + 1) * omega * hbar if energy is None else energy
    if strict and E >= 0.5 * v(0.0):
        raise EnergyOutOfRegime(f"E = {E:.4g} beyond half the barrier {v(0.0):.4g}")
    S = barrier_action_1d(v, E)
    return SplittingEstimate.build("excited1d", m, hbar, S / hbar, 2 * b_coeff(m) * omega * hbar / pi,
                                   E=E, omega=omega, S=S)


def ground_splitting(hbar: float, lam1: float, S_of, **inputs) -> SplittingEstimate:
    """2 sqrt(pi/e) (lam1 h / pi) exp(-S(E)/h) at the ground-level energy E = lam1 h."""
    E = lam1 * hbar
    S = float(S_of(E))
    return SplittingEstimate.build("ground", 0, hbar, S / hbar, 2 * sqrt(pi / e) * lam1 * hbar / pi,
                                   E=E, S=S, lam1=lam1, **inputs)


def ground_splitting_1d(v, hbar: float, omega: float) -> SplittingEstimate:
    return ground_splitting(hbar, omega, lambda E: barrier_action_1d(v, E), omega=omega)


# ---- 2-D: matching energy and the transverse splitting ---------------------

def solve_matching_energy(table, lam1: float, lam2: float, m: int, hbar: float) -> float:
    """Root of G(E) = E + h beta(E) - h (lam1 (1+2m) + lam2) on the scanned range."""
    E = np.asarray(table.E)
    target = hbar * (lam1 * (1 + 2 * m) + lam2)
    G = lambda x: x + hbar * float(table.beta_of(x)) - target  # noqa: E731
    lo, hi = float(E[0]), float(E[-1])
    if G(lo) * G(hi) > 0:
        raise NoBracket(f"G has no sign change on [{lo:.3g}, {hi:.3g}] for m={m}, h={hbar}")
    dense = np.linspace(lo, hi, 400)
    dG = np.diff([G(x) for x in dense])
    if np.any(dG <= 0):
        warnings.warn("interpolated beta makes G non-monotone", NonMonotoneWarning, stacklevel=2)
    return brentq(G, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def check_splitting_assumptions(assumptions: dict, arrival_ok: bool):
    if not assumptions.get("gap_ok", False):
        raise AssumptionViolated(f"2 lam1 < lam2 fails (lam1={assumptions.get('lambda1')}, lam2={assumptions.get('lambda2')})")
    if not arrival_ok:
        raise AssumptionViolated("instanton does not arrive along the lam1 direction")


def transverse_splitting(table, lam1: float, lam2: float, m: int, hbar: float, assumptions: dict,
                       arrival_ok: bool = True, factor: float = 2.0) -> SplittingEstimate:
    """factor b_m (lam1 h / pi) exp(-S(E~)/h), E~ from solve_matching_energy.

    ``factor=2`` is the default; tee_splitting is the factor-1 variant carrying T.
    """
    check_splitting_assumptions(assumptions, arrival_ok)
    Et = solve_matching_energy(table, lam1, lam2, m, hbar)
    S = float(table.S_of(Et))
    return SplittingEstimate.build("transverse", m, hbar, S / hbar, factor * b_coeff(m) * lam1 * hbar / pi,
                                   E=Et, S=S, lam1=lam1, lam2=lam2)


def crossing_splitting(w, m: int, hbar: float) -> SplittingEstimate:
    """2^(m+2) h^(1/2-m) / (m! sqrt(pi D)) sqrt(lam1^(2m+1) lam2) sigma^(2m) J^2 P0 exp(-S0/h)."""
    pref = (2 ** (m + 2) * hbar ** (0.5 - m) / (factorial(m) * sqrt(pi) * sqrt(w.D))
            * sqrt(w.lambda1 ** (2 * m + 1) * w.lambda2) * w.sigma ** (2 * m) * w.J**2 * w.P0)
    return SplittingEstimate.build("crossing", m, hbar, w.S0 / hbar, pref, **w.as_record())


def tee_splitting(w, m: int, hbar: float, S_E: float, factor: float = 1.0) -> SplittingEstimate:
    """factor b_m (h lam1 / pi) T exp(-S_E / h) with S_E at E = h (1+2m) lam1."""
    pref = factor * b_coeff(m) * hbar * w.lambda1 / pi * w.T_const
    return SplittingEstimate.build("tee", m, hbar, S_E / hbar, pref, S_E=S_E, factor=factor, **w.as_record())


# ---- identities -------------------------------------------------------------

def action_expansion_check(E: float, S_E: float, S0: float, lam1: float, T_E: float, form: str = "printed"):
    """Remainder r(E) of the small-E action expansion; returns (r, r/E).

    ``printed``:   S_E - S0 = (E / 2 lam1)(1 + log 2) + E T_E
    ``corrected``: S_E - S0 = -(E / 2 lam1)(1 + 2 log 2) - E T_E / 2
    T_E is the full crossing-to-crossing time of {V = E} along the instanton.
    """
    if form == "printed":
        r = S_E - S0 - E / (2 * lam1) * (1 + log(2)) - E * T_E
    elif form == "corrected":
        r = S_E - S0 + E / (2 * lam1) * (1 + 2 * log(2)) + E * T_E / 2
    else:
        raise ValueError(f"unknown form {form!r}")
    return r, r / E


def floquet_exponent_check(beta_direct: float, lam2: float, period: float, tee: float, assumptions: dict | None = None):
    """(beta_direct, beta_formula, gap) with beta_formula = lam2 - 4 log(T) / period."""
    if assumptions is not None and not assumptions.get("gap_ok", False):
        raise AssumptionViolated("2 lam1 < lam2 fails")
    beta_formula = lam2 - 4 * log(tee) / period
    return beta_direct, beta_formula, abs(beta_direct - beta_formula)
