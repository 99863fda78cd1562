"""WKB data along the instanton: action Hessian, transport factor and matching constants.

Along the left half of the instanton x(t) (t <= 0, crossing at t = 0) the
phase S_L = Agmon distance to a_L satisfies |grad S_L|^2 = V, so its Hessian
M = Hess S_L obeys the Riccati equation

    dM/dt = Hess V / 2 - M^2

on the package clock. M -> diag(lam) in the principal frame at a_L; the
Riccati flow is contracting forward in t, so it is integrated from the
truncation point to the crossing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi, sqrt

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import Instanton, truncation_time
from .errors import MultipleCrossings, NoPlateau, RiccatiBlowup, TailNotConverged

RICCATI_MAX = 1e6
# integrand of log J at the truncation point; above this the harmonic tail
# closure is not in its linear regime
TAIL_LIMIT = 1e-4


@dataclass
class RiccatiSolution:
    times: np.ndarray          # instanton times, increasing to 0
    M: np.ndarray              # (n, 2, 2)
    logJ_partial: np.ndarray   # int_{t_start}^{t} (tr M - lam1 - lam2)/2
    log_tail: float            # closed-form int_{-inf}^{t_start}
    # log_jay = int_{-inf}^0 (tr M - lam1 - lam2)/2 = -log J
    integrand_start: float

    @property
    def log_jay(self) -> float:
        return float(self.logJ_partial[-1] + self.log_tail)


def _third_derivative_slices(pot, point, h=1e-4):
    """d/dx_k Hess V at ``point`` for k = 1, 2 (central differences, exact for quartics)."""
    out = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        out.append((pot.hessian(*(point + e)) - pot.hessian(*(point - e))) / (2 * h))
    return out


def initial_hessian(inst: Instanton) -> tuple[np.ndarray, float]:
    """Action Hessian at the truncation point, to first order in the offset z.

    Writing M = Lam + sum_k z_k C_k in the left principal frame, each z_k grows
    like exp(lam_k t), and the Riccati equation gives
    (lam_k + lam_i + lam_j) C_k[i, j] = (1/2) d_k HessV[i, j].
    Returns (M in global coordinates, closed-form tail of int (tr M - sum lam)/2).
    """
    left = inst.left
    R, lam = left.frame, left.lam
    x0 = inst.state(inst.t_start)[0][:2]
    z = left.to_frame(x0)
    d3 = _third_derivative_slices(inst.pot, left.minimum)
    Mf = np.diag(lam).astype(float)
    tail = 0.0
    for k in range(2):
        # derivative along frame axis k, expressed in the frame
        dk = R[0, k] * d3[0] + R[1, k] * d3[1]
        dkf = R.T @ dk @ R
        Ck = 0.5 * dkf / (lam[k] + lam[:, None] + lam[None, :])
        Mf = Mf + z[k] * Ck
        tail += 0.5 * np.trace(Ck) * z[k] / lam[k]
    return R @ Mf @ R.T, tail


def riccati_hessian(inst: Instanton, n_per_segment: int = 8, tol: float | None = None) -> RiccatiSolution:
    pot = inst.pot
    tol = inst.tol if tol is None else tol
    lam_sum = float(inst.left.lam.sum())
    M0, tail = initial_hessian(inst)

    def rhs(t, y):
        x1, x2, p1, p2, m11, m12, m22, _ = y
        g = pot.gradient(x1, x2)
        H = pot.hessian(x1, x2)
        return [p1, p2, 0.5 * g[0], 0.5 * g[1],
                0.5 * H[0, 0] - (m11 * m11 + m12 * m12),
                0.5 * H[0, 1] - (m11 * m12 + m12 * m22),
                0.5 * H[1, 1] - (m12 * m12 + m22 * m22),
                0.5 * (m11 + m22 - lam_sum)]

    half = inst.half
    m = np.array([M0[0, 0], M0[0, 1], M0[1, 1]])
    logj = 0.0
    times, Ms, logs = [], [], []
    integrand0 = 0.5 * (m[0] + m[2] - lam_sum)
    for k in range(half.n):
        t0 = k * half.dt
        y0 = np.concatenate([half.nodes[k], m, [logj]])
        ts = t0 + np.linspace(0.0, half.dt, n_per_segment + 1)
        sol = solve_ivp(rhs, (t0, t0 + half.dt), y0, method="DOP853", t_eval=ts,
                        rtol=tol * 1e-3, atol=tol * 1e-5)
        if sol.status != 0:
            raise RiccatiBlowup(sol.message)
        Y = sol.y
        if np.abs(Y[4:7]).max() > RICCATI_MAX:
            raise RiccatiBlowup("|M| exceeded 1e6: focal point on the instanton")
        sl = slice(0, None) if k == 0 else slice(1, None)
        times.append(ts[sl] - half.T)
        Ms.append(Y[4:7, sl].T)
        logs.append(Y[7, sl])
        m = Y[4:7, -1]
        logj = Y[7, -1]
    times = np.concatenate(times)
    mm = np.concatenate(Ms)
    M = np.empty((len(mm), 2, 2))
    M[:, 0, 0] = mm[:, 0]
    M[:, 0, 1] = M[:, 1, 0] = mm[:, 1]
    M[:, 1, 1] = mm[:, 2]
    return RiccatiSolution(times=times, M=M, logJ_partial=np.concatenate(logs), log_tail=tail,
                           integrand_start=float(integrand0))


def jay_factor(inst: Instanton, ric: RiccatiSolution):
    """Transport factor J(t) = exp int_0^t ((lam1+lam2)/2 - Delta S/2) dt.

    t runs from the crossing (t = 0) into the well, where Delta S -> lam1 + lam2.
    This is the sign for which b(0) = exp(lam1 m t) J(t) b(t) solves the
    transport equation 2 grad S . grad A = (lam1(2m+1) + lam2 - Delta S) A.
    Returns (t samples, J(t) samples, J(+inf)).
    """
    if abs(ric.integrand_start) > TAIL_LIMIT:
        raise TailNotConverged(f"integrand {ric.integrand_start:.2e} at truncation exceeds {TAIL_LIMIT}")
    # point at instanton time s sits at t = -s; the integral runs over [s, 0]
    logJt = ric.logJ_partial - ric.logJ_partial[-1]
    return -ric.times[::-1], np.exp(logJt[::-1]), float(np.exp(-ric.log_jay))


def _approach_window(inst: Instanton, decades: float = 1.0):
    """Instanton times whose distance to a_L lies within ``decades`` of eps."""
    lam1 = inst.left.lam1
    width = decades * np.log(10.0) / lam1
    return np.linspace(inst.t_start, inst.t_start + width, 200)


def _arrival_coordinate(inst: Instanton, s):
    """Coordinate of x(s) - a_L along the lam1 axis of the left well."""
    y = inst.state(s)
    return (y[:, :2] - inst.left.minimum) @ inst.left.frame[:, 0]


def sigma_extract(inst: Instanton, window_decades: float = 1.0) -> float:
    """sigma = lim exp(lam1 t) y1(t), y1 the lam1-coordinate of the instanton relative to the well.

    Evaluated on the departing branch (mirror image of the arrival) as
    exp(-lam1 s) y1(s) for s -> -inf, fitted as sigma + b exp(lam1 s)
    over the first decades of the approach.
    """
    lam1 = inst.left.lam1
    s = _approach_window(inst, window_decades)
    g = np.exp(-lam1 * s) * _arrival_coordinate(inst, s)
    A = np.column_stack([np.ones_like(s), np.exp(lam1 * (s - s[0]))])
    coef, *_ = np.linalg.lstsq(A, g, rcond=None)
    sigma = float(coef[0])
    drift = abs(g[-1] - g[0]) / abs(sigma)
    if drift > 1e-4:
        raise NoPlateau(f"relative variation {drift:.2e} of exp(lam1 t) y1 over the window")
    return sigma


def crossing_constants(inst: Instanton, ric: RiccatiSolution):
    """(x0, P0, D): crossing point, dS_L/dx1 and d^2 S_L/dx2^2 there."""
    y = inst.state(inst.times(10))
    sgn = np.sign(y[:, 0])
    changes = np.count_nonzero(np.diff(sgn[sgn != 0]) != 0)
    if changes > 0:
        raise MultipleCrossings(f"x1 changes sign {changes} times before the crossing")
    end = inst.crossing
    x0 = end[:2].copy()
    P0 = float(end[2])
    D = float(ric.M[-1, 1, 1])
    return x0, P0, D


@dataclass(frozen=True)
class WkbConstants:
    lambda1: float
    lambda2: float
    S0: float
    J: float
    sigma: float
    P0: float
    D: float
    x0: tuple
    T_const: float
    M_samples: np.ndarray = field(repr=False, compare=False, default=None)

    def as_record(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2, "S0": self.S0, "J": self.J,
                "sigma": self.sigma, "P0": self.P0, "D": self.D, "T_const": self.T_const,
                "x0": list(self.x0)}


def tee_constant(J: float, P0: float, lam1: float, sigma: float, lam2: float, D: float) -> float:
    """T = J^2 (P0 / (lam1 sigma)) sqrt(lam2 / D)."""
    return J * J * (P0 / (lam1 * sigma)) * sqrt(lam2 / D)


def wkb_constants(inst: Instanton) -> WkbConstants:
    ric = riccati_hessian(inst)
    _, _, J = jay_factor(inst, ric)
    sigma = sigma_extract(inst)
    x0, P0, D = crossing_constants(inst, ric)
    lam1, lam2 = inst.left.lam1, inst.left.lam2
    return WkbConstants(lambda1=lam1, lambda2=lam2, S0=inst.S0, J=J, sigma=sigma, P0=P0, D=D,
                        x0=tuple(x0), T_const=tee_constant(J, P0, lam1, sigma, lam2, D), M_samples=ric.M)


def rho(w: WkbConstants, inst: Instanton, m: int, h: float):
    """rho = sigma sqrt(lam1/h) exp(-lam1 T_E) at E = h (1 + 2m) lam1.

    T_E here is the time from the crossing to the level set {V = E}, half of
    ``truncation_time``. Returns (rho, rho / sqrt(2m + 1)).
    """
    E = h * (1 + 2 * m) * w.lambda1
    TE = 0.5 * truncation_time(inst, E)
    r = w.sigma * sqrt(w.lambda1 / h) * np.exp(-w.lambda1 * TE)
    return float(r), float(r / sqrt(2 * m + 1))


def harmonic_amplitude_norm(lam1: float, lam2: float, m: int) -> float:
    """(lam1^(1+2m) lam2)^(1/4) 2^(m/2) / sqrt(m! pi)."""
    return (lam1 ** (1 + 2 * m) * lam2) ** 0.25 * 2 ** (m / 2) / sqrt(factorial(m) * pi)


def transport_amplitude(inst: Instanton, ric: RiccatiSolution, m: int, window_decades: float = 1.0):
    """b(0) = exp(lam1 m t) J(t) b(t), with b(t) matched to the m-th oscillator state deep in the well.

    Returns (b0, relative spread of the estimate over the window).
    """
    lam1, lam2 = inst.left.lam1, inst.left.lam2
    s = _approach_window(inst, window_decades)
    y1 = _arrival_coordinate(inst, s)
    # log J(t) at t = -s
    logJ = np.interp(s, ric.times, ric.logJ_partial) - ric.logJ_partial[-1]
    b_t = harmonic_amplitude_norm(lam1, lam2, m) * y1**m
    est = np.exp(-lam1 * m * s) * np.exp(logJ) * b_t
    spread = float(abs(est.max() - est.min()) / abs(est.mean()))
    if spread > 1e-4:
        raise NoPlateau(f"b(0) varies by {spread:.2e} over the window")
    return float(est.mean()), spread
