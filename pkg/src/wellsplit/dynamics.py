"""Inverted-potential Hamiltonian flow, instanton and librations.

Clock convention used everywhere in the package: trajectories solve

    dx/dt = xi,    dxi/dt = grad V / 2,

the flow of (xi^2 - V)/2. The energy e = xi^2 - V is conserved and equals -E on
a libration at well energy E. Equilibrium exponents are +-lam_j, so decay
rates, periods and Floquet exponents are all measured on this clock.

Orbits in the inverted potential are transversally unstable (rate ~ lam_2),
so instanton and librations are found by multiple shooting on the half orbit
from the left well to the symmetry line {x1 = 0}, where the orbit must cross
at a right angle (xi_2 = 0). The other half follows from the reflection
x1 -> -x1 combined with time reversal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    BlowUp,
    EnergyOutOfRegime,
    IrregularArrival,
    NoCrossing,
    NoHeteroclinic,
    NoLibration,
    NonHyperbolic,
    StepFailure,
)
from .potentials import HarmonicData, PotentialSpec, boundary_point, locate_minima

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10

# (x1, x2, xi1, xi2) ordering; J is the canonical symplectic form
J4 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
# reflection x1 -> -x1 combined with time reversal (fixes the crossing point)
S_REV = np.diag([-1.0, 1.0, 1.0, -1.0])
# plain reflection x1 -> -x1 (commutes with the flow)
P_REF = np.diag([-1.0, 1.0, -1.0, 1.0])


@dataclass
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.xi = np.asarray(self.xi, float)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ValueError("phase point must be finite")

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])


def energy(pot: PotentialSpec, y) -> float:
    y = np.asarray(y)
    return y[..., 2] ** 2 + y[..., 3] ** 2 - pot(y[..., 0], y[..., 1])


def _rhs(pot: PotentialSpec):
    def f(t, y):
        g = pot.gradient(y[0], y[1])
        return np.array([y[2], y[3], 0.5 * g[0], 0.5 * g[1], y[2] * y[2] + y[3] * y[3]])

    return f


def _rhs_stm(pot: PotentialSpec):
    def f(t, y):
        g = pot.gradient(y[0], y[1])
        hh = 0.5 * pot.hessian(y[0], y[1])
        A = np.zeros((4, 4))
        A[0, 2] = A[1, 3] = 1.0
        A[2:, :2] = hh
        phi = y[5:].reshape(4, 4)
        out = np.empty_like(y)
        out[:5] = (y[2], y[3], 0.5 * g[0], 0.5 * g[1], y[2] * y[2] + y[3] * y[3])
        out[5:] = (A @ phi).ravel()
        return out

    return f


def _rtol_atol(tol):
    return tol * 1e-3, tol * 1e-5


@dataclass
class TrajectorySegment:
    """Dense-output trajectory of the inverted flow.

    ``action`` holds the running integral of |xi|^2 dt = int xi . dx.
    """

    times: np.ndarray
    states: np.ndarray  # (n, 4)
    action: np.ndarray
    e: float
    sol: object = field(repr=False, default=None)

    def __call__(self, t):
        return self.sol(t)[:4]

    @property
    def energy_drift(self) -> float:
        return float(np.abs(self.states[:, 2] ** 2 + self.states[:, 3] ** 2 - self._v - self.e).max())

    _v: np.ndarray = field(repr=False, default=None)


def flow(pot: PotentialSpec, start: PhasePoint, duration: float, tol: float = DEFAULT_TOL,
         box_factor: float = 2.0) -> TrajectorySegment:
    """Integrate the inverted flow from ``start`` for ``duration`` (may be negative).

    DOP853 with dense output; raises BlowUp when |x| leaves ``box_factor``
    times the potential's bounding box.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    y0 = np.concatenate([start.y, [0.0]])
    lim = np.array(pot.box) * box_factor

    def leave(t, y):
        return min(lim[0] - abs(y[0]), lim[1] - abs(y[1]))

    leave.terminal = True
    rtol, atol = _rtol_atol(tol)
    sol = solve_ivp(_rhs(pot), (0.0, duration), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=leave)
    if sol.status == -1:
        raise StepFailure(sol.message)
    if sol.status == 1:
        raise BlowUp(f"trajectory left the box at t = {sol.t_events[0][0]:.6g}")
    states = sol.y[:4].T
    e0 = float(energy(pot, states[0]))
    seg = TrajectorySegment(times=sol.t, states=states, action=sol.y[4], e=e0, sol=sol.sol)
    seg._v = pot(states[:, 0], states[:, 1])
    return seg


def propagate(pot: PotentialSpec, y, dt, tol=DEFAULT_TOL, stm=True, dense=False):
    """Flow map over ``dt`` with optional 4x4 state transition matrix.

    Returns (y_end, Phi, action_increment, ode_solution).
    """
    rtol, atol = _rtol_atol(tol)
    if stm:
        y0 = np.concatenate([y[:4], [0.0], np.eye(4).ravel()])
        sol = solve_ivp(_rhs_stm(pot), (0.0, dt), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=dense)
    else:
        y0 = np.concatenate([y[:4], [0.0]])
        sol = solve_ivp(_rhs(pot), (0.0, dt), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=dense)
    if sol.status != 0:
        raise StepFailure(sol.message)
    end = sol.y[:, -1]
    phi = end[5:].reshape(4, 4) if stm else None
    return end[:4], phi, float(end[4]), sol.sol if dense else None


def symplectic_inverse(phi):
    return -J4 @ phi.T @ J4


# -- multiple shooting ------------------------------------------------------
@dataclass
class HalfOrbit:
    """Solution of a multiple-shooting half-orbit problem.

    Nodes Y[k] at times k * T / N; the last segment ends on {x1 = 0} with
    xi_2 = 0. ``sols`` are dense outputs of each segment (local time).
    """

    param: float
    T: float
    nodes: np.ndarray  # (N, 4)
    sols: list
    stms: list
    actions: np.ndarray
    end: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def action(self) -> float:
        return float(self.actions.sum())

    @property
    def stm(self) -> np.ndarray:
        out = np.eye(4)
        for phi in self.stms:
            out = phi @ out
        return out

    def state(self, t):
        """State at local time t in [0, T] (scalar or array)."""
        t = np.atleast_1d(np.asarray(t, float))
        k = np.clip((t / self.dt).astype(int), 0, self.n - 1)
        out = np.empty((t.size, 4))
        for i, (kk, tt) in enumerate(zip(k, t)):
            out[i] = self.sols[kk](tt - kk * self.dt)[:4]
        return out

    def cumulative_action(self, t):
        t = np.atleast_1d(np.asarray(t, float))
        k = np.clip((t / self.dt).astype(int), 0, self.n - 1)
        before = np.concatenate([[0.0], np.cumsum(self.actions)])
        return np.array([before[kk] + self.sols[kk](tt - kk * self.dt)[4] for kk, tt in zip(k, t)])


def _solve_half_orbit(pot, start_fn, start_deriv, param, T, nodes, tol=DEFAULT_TOL,
                      maxiter=30, target=1e-11):
    """Newton iteration for (param, T, Y_1..Y_{N-1}).

    Residual: segment matching Phi(Y_k) - Y_{k+1}, plus x1 = 0 and xi2 = 0 at
    the end of the last segment.
    """
    nodes = np.array(nodes, float)
    N = len(nodes)
    f = _rhs(pot)
    best = None
    for it in range(maxiter + 1):
        nodes[0] = start_fn(param)
        dt = T / N
        ends, phis, acts, sols = [], [], [], []
        for k in range(N):
            ye, phi, act, sol = propagate(pot, nodes[k], dt, tol=tol, stm=True, dense=True)
            ends.append(ye)
            phis.append(phi)
            acts.append(act)
            sols.append(sol)
        F = np.empty(4 * N - 2)
        for k in range(N - 1):
            F[4 * k:4 * k + 4] = ends[k] - nodes[k + 1]
        F[-2] = ends[-1][0]
        F[-1] = ends[-1][3]
        res = float(np.abs(F).max())
        best = HalfOrbit(param=param, T=T, nodes=nodes.copy(), sols=sols, stms=phis,
                         actions=np.array(acts), end=ends[-1], residual=res)
        log.debug("shooting iter %d residual %.3e", it, res)
        if res <= target or it == maxiter:
            break
        # unknown ordering: [param, T, Y_1 .. Y_{N-1}]
        nun = 4 * N - 2
        Jac = np.zeros((nun, nun))
        for k in range(N):
            rows = slice(4 * k, 4 * k + 4) if k < N - 1 else [4 * k, 4 * k + 1]
            rsel = slice(None) if k < N - 1 else [0, 3]
            phi = phis[k]
            fe = f(0.0, np.concatenate([ends[k], [0.0]]))[:4] / N
            Jac[rows, 1] = fe[rsel]
            if k == 0:
                Jac[rows, 0] = (phi @ start_deriv(param))[rsel]
            else:
                Jac[rows, 2 + 4 * (k - 1):2 + 4 * k] = phi[rsel]
            if k < N - 1:
                Jac[4 * k:4 * k + 4, 2 + 4 * k:2 + 4 * k + 4] -= np.eye(4)
        step = np.linalg.solve(Jac, -F)
        # damp only the global unknowns if the step is wild
        scale = 1.0
        if abs(step[1]) > 0.25 * T:
            scale = 0.25 * T / abs(step[1])
        param += scale * step[0]
        T += scale * step[1]
        nodes[1:] += scale * step[2:].reshape(N - 1, 4)
    return best


def _resample(sols_orbit: HalfOrbit, N):
    """Re-grid an existing half orbit onto N uniform nodes."""
    t = np.linspace(0.0, sols_orbit.T, N + 1)[:-1]
    return sols_orbit.state(t)


# -- instanton --------------------------------------------------------------
@dataclass
class Instanton:
    """Heteroclinic orbit from a_L to a_R of the zero-energy inverted flow.

    Time origin is the crossing of {x1 = 0}; the stored half orbit runs over
    [-T_half, 0] starting eps_trunc away from a_L. Positive times are obtained
    by the symmetry S_REV.
    """

    pot: PotentialSpec
    left: HarmonicData
    right: HarmonicData
    half: HalfOrbit = field(repr=False)
    eps: float
    S0: float
    angle: float
    arrival_direction_ok: bool
    curvature_max: float
    tol: float = DEFAULT_TOL

    @property
    def t_start(self) -> float:
        return -self.half.T

    @property
    def crossing(self) -> np.ndarray:
        return self.half.end

    def state(self, t):
        """State at instanton time t (crossing at t = 0); any sign of t."""
        t = np.atleast_1d(np.asarray(t, float))
        out = np.empty((t.size, 4))
        neg = t <= 0
        if neg.any():
            out[neg] = self.half.state(t[neg] + self.half.T)
        if (~neg).any():
            out[~neg] = self.half.state(-t[~neg] + self.half.T) @ S_REV
        return out

    def times(self, n_per_segment=20):
        """Sample times over the stored left half (t <= 0)."""
        t = np.concatenate([k * self.half.dt + np.linspace(0, self.half.dt, n_per_segment, endpoint=False)
                            for k in range(self.half.n)] + [[self.half.T]])
        return t - self.half.T


def _instanton_start(left: HarmonicData, eps):
    R, lam, m = left.frame, left.lam, left.minimum

    def start(theta):
        z = eps * np.array([np.cos(theta), np.sin(theta)])
        return np.concatenate([m + R @ z, R @ (lam * z)])

    def deriv(theta):
        dz = eps * np.array([-np.sin(theta), np.cos(theta)])
        return np.concatenate([R @ dz, R @ (lam * dz)])

    return start, deriv


def _separable_instanton_guess(pot, left, eps, N, tol):
    start, _ = _instanton_start(left, eps)
    y0 = start(0.0)
    # the symmetric line x2 = 0 is invariant only when d = 0; integrate to the crossing
    def hit(t, y):
        return y[0]

    hit.terminal = True
    hit.direction = 1
    rtol, atol = _rtol_atol(tol)
    sol = solve_ivp(_rhs(pot), (0, 500.0 / left.lam1), np.concatenate([y0, [0.0]]), method="DOP853",
                    rtol=rtol, atol=atol, events=hit, dense_output=True)
    if not len(sol.t_events[0]):
        raise NoHeteroclinic("separable seed did not reach the symmetry line")
    T = float(sol.t_events[0][0])
    nodes = sol.sol(np.linspace(0, T, N + 1)[:-1])[:4].T
    return 0.0, T, nodes


def compute_instanton(pot: PotentialSpec, tol: float = DEFAULT_TOL, eps: float | None = None,
                      n_segments: int = 40, max_substeps: int = 64) -> Instanton:
    """Instanton by multiple shooting, continued in d from the straight case.

    For d = 0 the instanton is the segment x2 = 0. For d != 0 the coupling is
    switched on in steps, each solve seeded with the previous orbit.
    """
    left, right = locate_minima(pot)
    eps = 1e-6 * pot.a if eps is None else eps
    base = replace(pot, family="curved-quartic", d=0.0)
    bl, _ = locate_minima(base)
    theta, T, nodes = _separable_instanton_guess(base, bl, eps, n_segments, tol)
    s, ds = 0.0, 1.0 if pot.d != 0 else 0.0
    cur = base
    orbit = None
    substeps = 0
    while True:
        target_s = min(1.0, s + ds) if pot.d != 0 else 1.0
        cur = replace(pot, family="curved-quartic", d=pot.d * target_s)
        cl, _ = locate_minima(cur)
        start, deriv = _instanton_start(cl, eps)
        trial = _solve_half_orbit(cur, start, deriv, theta, T, nodes, tol=tol)
        ok = trial.residual <= 1e-9 and abs(trial.end[0]) < 1e-8 and np.isfinite(trial.T) and trial.T > 0
        if ok:
            orbit, theta, T, nodes = trial, trial.param, trial.T, trial.nodes
            s = target_s
            if s >= 1.0:
                break
            ds = min(2 * ds, 1.0 - s)
        else:
            ds *= 0.5
            substeps += 1
            if substeps > max_substeps or ds < 1e-4:
                raise NoHeteroclinic(f"continuation stalled at d = {pot.d * s:.4g} (residual {trial.residual:.2e})")
    if orbit.residual > 1e-8:
        raise NoHeteroclinic(f"matching residual {orbit.residual:.2e} > 1e-8")
    # final orbit must belong to the requested family object
    theta = orbit.param
    ok_dir = abs(np.tan(theta)) < 1.0
    if not ok_dir:
        raise IrregularArrival(f"departure angle {theta:.3g} rad aligns with the lam_2 axis")
    tail = 0.5 * float((left.lam * (eps * np.array([np.cos(theta), np.sin(theta)])) ** 2).sum())
    S0 = 2.0 * (orbit.action + tail)
    inst = Instanton(pot=pot, left=left, right=right, half=orbit, eps=eps, S0=S0, angle=theta,
                     arrival_direction_ok=ok_dir, curvature_max=0.0, tol=tol)
    inst.curvature_max = _max_curvature(inst)
    return inst


def _max_curvature(inst: Instanton) -> float:
    t = inst.times(10)
    y = inst.state(t)
    v = y[:, 2:]
    acc = np.array([0.5 * inst.pot.gradient(p[0], p[1]) for p in y[:, :2]])
    cross = np.abs(v[:, 0] * acc[:, 1] - v[:, 1] * acc[:, 0])
    speed = np.linalg.norm(v, axis=1)
    good = speed > 1e-3 * speed.max()
    return float((cross[good] / speed[good] ** 3).max())


def truncation_time(inst: Instanton, E: float) -> float:
    """Time along the instanton between its two crossings of {V = E}."""
    pot = inst.pot
    if E <= 0:
        raise NoCrossing("E must be positive")
    t = inst.times(20)
    y = inst.state(t)
    vals = pot(y[:, 0], y[:, 1]) - E
    if vals.max() <= 0:
        raise NoCrossing(f"E = {E} above max V along the instanton")
    if vals[0] >= 0:
        raise NoCrossing(f"E = {E} below V at the truncation point")
    k = int(np.argmax(vals > 0))

    def g(tt):
        p = inst.state(tt)[0]
        return pot(p[0], p[1]) - E

    tc = brentq(g, t[k - 1], t[k], xtol=1e-14, rtol=1e-15)
    return -2.0 * tc


# -- librations ---------------------------------------------------------------
@dataclass
class Libration:
    """Brake orbit at well energy E (orbit energy -E).

    The quarter orbit y_L -> x_E is stored; T is the full back-and-forth
    period on the package clock, T_half = T / 2 the L -> R traversal time and
    S_E the action of one L -> R traversal.
    """

    E: float
    pot: PotentialSpec = field(repr=False)
    quarter: HalfOrbit = field(repr=False)
    angle: float
    yL: np.ndarray
    yR: np.ndarray
    x_E: np.ndarray
    T: float
    T_half: float
    S_E: float
    monodromy: np.ndarray = field(repr=False, default=None)
    beta: float = float("nan")
    n_roots: int = 1

    def state(self, t):
        """State at time t in [0, T] starting from y_L at rest."""
        t = np.atleast_1d(np.asarray(t, float)) % self.T
        tq = self.T / 4
        out = np.empty((t.size, 4))
        for i, tt in enumerate(t):
            if tt <= tq:
                out[i] = self.quarter.state(tt)[0]
            elif tt <= 2 * tq:
                out[i] = self.quarter.state(2 * tq - tt)[0] @ S_REV
            else:
                # second half is the reflection of the first (no time reversal)
                s = tt - 2 * tq
                if s <= tq:
                    out[i] = self.quarter.state(s)[0] @ P_REF
                else:
                    out[i] = (self.quarter.state(2 * tq - s)[0] @ S_REV) @ P_REF
        return out


def _libration_start(pot, E, left):
    def start(phi):
        p = boundary_point(pot, E, left, phi)
        return np.array([p[0], p[1], 0.0, 0.0])

    def deriv(phi):
        p = boundary_point(pot, E, left, phi)
        u = left.frame @ np.array([np.cos(phi), np.sin(phi)])
        du = left.frame @ np.array([-np.sin(phi), np.cos(phi)])
        r = np.linalg.norm(p - left.minimum)
        g = pot.gradient(p[0], p[1])
        dr = -r * (g @ du) / (g @ u)
        dp = r * du + dr * u
        return np.array([dp[0], dp[1], 0.0, 0.0])

    return start, deriv


def _seed_from_instanton(inst: Instanton, E: float, N: int):
    pot, left = inst.pot, inst.left
    t = inst.times(20)
    y = inst.state(t)
    vals = pot(y[:, 0], y[:, 1]) - E
    k = int(np.argmax(vals > 0))

    def g(tt):
        p = inst.state(tt)[0]
        return pot(p[0], p[1]) - E

    tc = brentq(g, t[k - 1], t[k], xtol=1e-14)
    z = left.to_frame(inst.state(tc)[0][:2])
    phi = float(np.arctan2(z[1], z[0]))
    T = -tc
    ts = np.linspace(tc, 0.0, N + 1)[:-1]
    nodes = inst.state(ts)
    v = pot(nodes[:, 0], nodes[:, 1])
    speed = np.linalg.norm(nodes[:, 2:], axis=1)
    scale = np.sqrt(np.clip(v - E, 0.0, None)) / np.where(speed > 0, speed, 1.0)
    nodes[:, 2:] *= scale[:, None]
    return phi, T, nodes


def _finish_libration(pot, E, orbit: HalfOrbit, n_roots=1) -> Libration:
    yL = orbit.nodes[0][:2].copy()
    yR = np.array([-yL[0], yL[1]])
    Tq = orbit.T
    lib = Libration(E=E, pot=pot, quarter=orbit, angle=orbit.param, yL=yL, yR=yR,
                    x_E=orbit.end[:2].copy(), T=4 * Tq, T_half=2 * Tq, S_E=2 * orbit.action, n_roots=n_roots)
    lib.monodromy, lib.beta = monodromy_and_floquet(pot, lib)
    return lib


def compute_libration(pot: PotentialSpec, E: float, tol: float = DEFAULT_TOL, inst: Instanton | None = None,
                      seed: Libration | None = None, n_segments: int = 40, window_deg: float = 60.0,
                      scan_roots: bool = False) -> Libration:
    """Libration at well energy E by multiple shooting from rest on the left well boundary.

    Seeded from ``seed`` (continuation) or from the instanton. With
    ``scan_roots`` the boundary angle window around the seed is scanned for
    further transversal roots; the one of least action is returned.
    """
    if not 0 < E < pot.barrier:
        raise NoLibration(f"E = {E} outside (0, barrier)", energy=E)
    left, _ = locate_minima(pot)
    if seed is not None:
        phi, T, nodes = seed.angle, seed.quarter.T, _resample(seed.quarter, n_segments)
        # rescale momenta to the new energy
        v = pot(nodes[:, 0], nodes[:, 1])
        speed = np.linalg.norm(nodes[:, 2:], axis=1)
        nodes[:, 2:] *= (np.sqrt(np.clip(v - E, 0, None)) / np.where(speed > 0, speed, 1.0))[:, None]
    else:
        inst = compute_instanton(pot, tol=tol) if inst is None else inst
        phi, T, nodes = _seed_from_instanton(inst, E, n_segments)
    start, deriv = _libration_start(pot, E, left)
    orbit = _solve_half_orbit(pot, start, deriv, phi, T, nodes, tol=tol)
    if orbit.residual > 1e-9 or not (orbit.T > 0):
        raise NoLibration(f"shooting residual {orbit.residual:.2e} at E = {E}", energy=E)
    n_roots = 1
    if scan_roots:
        others = _scan_transversality(pot, E, left, orbit.param, window_deg, tol)
        n_roots = 1 + sum(1 for p in others if abs(p - orbit.param) > 1e-6)
        if n_roots > 1:
            log.warning("MultipleRootsWarning: %d transversal roots at E = %g", n_roots, E)
    return _finish_libration(pot, E, orbit, n_roots)


def _scan_transversality(pot, E, left, phi0, window_deg, tol):
    """Sign changes of xi_2 at the first {x1 = 0} crossing over a window of start angles.

    Coarse single shooting; only used to count roots, not to resolve them.
    """
    def hit(t, y):
        return y[0]

    hit.terminal = True
    hit.direction = 1
    rtol, atol = _rtol_atol(max(tol, 1e-9))
    roots = []
    prev = None
    w = np.deg2rad(window_deg)
    for phi in np.linspace(phi0 - w, phi0 + w, 41):
        p = boundary_point(pot, E, left, phi)
        lim = np.array(pot.box)

        def leave(t, y):
            return min(lim[0] - abs(y[0]), lim[1] - abs(y[1]))

        leave.terminal = True
        sol = solve_ivp(_rhs(pot), (0, 200.0), [p[0], p[1], 0, 0, 0], method="DOP853", rtol=rtol, atol=atol,
                        events=[hit, leave])
        if len(sol.t_events[0]):
            val = np.sign(sol.y_events[0][0][3])
        else:
            val = np.sign(sol.y[1, -1])
        if prev is not None and val != prev[1] and len(sol.t_events[0]):
            roots.append(0.5 * (phi + prev[0]))
        prev = (phi, val)
    return roots


def monodromy_and_floquet(pot: PotentialSpec, lib: Libration):
    """Full-period monodromy from the quarter-orbit transition matrix.

    With Q the quarter map y_L -> x_E, the half period map is
    H = S Q^{-1} S Q and the period map M = P H P H.
    """
    Q = lib.quarter.stm
    H = S_REV @ symplectic_inverse(Q) @ S_REV @ Q
    M = P_REF @ H @ P_REF @ H
    mu = np.abs(np.linalg.eigvals(M)).max()
    if mu <= 1 + 1e-6:
        raise NonHyperbolic(f"spectral radius {mu:.8g} <= 1 + 1e-6")
    return M, float(np.log(mu) / lib.T)


def symplectic_defect(M) -> float:
    """||M^T J M - J|| scaled by ||M||^2 (absolute for ||M|| ~ 1)."""
    return float(np.abs(M.T @ J4 @ M - J4).max() / max(1.0, np.abs(M).max() ** 2))


def floquet_spectrum_errors(M, beta: float, period: float) -> dict:
    """Distance of spec(M) from {exp(beta T), exp(-beta T), 1, 1}.

    The unit eigenvalue of a libration family is a Jordan block, so each of the
    two computed values near 1 moves like sqrt(error in M). Their mean and
    product do not, and those are what is compared. The contracting eigenvalue
    is read off the exact symplectic inverse -J M^T J, where it is the largest.
    """
    lam = np.exp(beta * period)
    ev = np.linalg.eigvals(M)
    order = np.argsort(np.abs(ev))
    unit = ev[order[1:3]]
    inv = -J4 @ M.T @ J4
    contracting = np.abs(np.linalg.eigvals(inv)).max()
    return {"expanding": float(abs(np.abs(ev[order[3]]) - lam) / lam),
            "contracting": float(abs(contracting - lam) / lam),
            "unit_mean": float(abs(unit.mean() - 1)),
            "unit_product": float(abs(unit[0] * unit[1] - 1))}


@dataclass
class LibrationTable:
    E: np.ndarray
    T: np.ndarray
    S_E: np.ndarray
    beta: np.ndarray
    x_E: np.ndarray
    yL: np.ndarray
    yR: np.ndarray
    librations: list = field(repr=False, default_factory=list)

    HEADER = "E,T,S_E,beta,x_E_1,x_E_2,yL_1,yL_2,yR_1,yR_2"

    def __len__(self):
        return len(self.E)

    def _interp(self, column, E):
        # monotone cubic within the scan; no extrapolation past either end
        lo, hi = self.E[0], self.E[-1]
        Ea = np.asarray(E, float)
        if np.any(Ea < lo * (1 - 1e-12)) or np.any(Ea > hi * (1 + 1e-12)):
            raise EnergyOutOfRegime(f"E outside the scanned range [{lo:.4g}, {hi:.4g}]")
        return PchipInterpolator(self.E, column)(np.clip(Ea, lo, hi))

    def S_of(self, E):
        return self._interp(self.S_E, E)

    def beta_of(self, E):
        return self._interp(self.beta, E)

    def T_of(self, E):
        return self._interp(self.T, E)

    def rows(self):
        for i in range(len(self.E)):
            yield (self.E[i], self.T[i], self.S_E[i], self.beta[i], *self.x_E[i], *self.yL[i], *self.yR[i])


def libration_scan(pot: PotentialSpec, E_grid, tol: float = DEFAULT_TOL, inst: Instanton | None = None,
                   keep: bool = False) -> LibrationTable:
    """Librations over a sorted energy grid, each seeded from its neighbour.

    The continuation runs from the smallest energy upward, where the seed from
    the instanton is best.
    """
    E_grid = np.asarray(E_grid, float)
    if E_grid.size == 0:
        z = np.zeros((0, 2))
        return LibrationTable(E=np.zeros(0), T=np.zeros(0), S_E=np.zeros(0), beta=np.zeros(0), x_E=z, yL=z, yR=z)
    if np.any(np.diff(E_grid) <= 0):
        raise ValueError("E_grid must be strictly increasing")
    if inst is None:
        inst = compute_instanton(pot, tol=tol)
    libs = []
    prev = None
    for E in E_grid:
        try:
            lib = compute_libration(pot, E, tol=tol, inst=inst, seed=prev)
        except NoLibration:
            if prev is None:
                raise
            lib = compute_libration(pot, E, tol=tol, inst=inst)
        libs.append(lib)
        prev = lib
    return LibrationTable(
        E=E_grid,
        T=np.array([l.T for l in libs]),
        S_E=np.array([l.S_E for l in libs]),
        beta=np.array([l.beta for l in libs]),
        x_E=np.array([l.x_E for l in libs]),
        yL=np.array([l.yL for l in libs]),
        yR=np.array([l.yR for l in libs]),
        librations=libs if keep else [],
    )
