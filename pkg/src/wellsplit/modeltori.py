"""Quadratic model of the wells: invariant tori, umbilics and the tunnel distance between them."""
from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConfigError, DegenerateCritical, InsideCaustic, NoInteriorMinimum, ZeroTorus
from .potentials import HarmonicData

CSV_HEADER = "k1,k2,h,E,iota1,iota2,y1,y2,tunnel_action,x_tilde2"


@dataclass(frozen=True)
class ModelTorus:
    iota: tuple
    E: float
    umbilic: np.ndarray         # in the well frame
    well: HarmonicData
    k: tuple | None = None

    @property
    def umbilic_global(self) -> np.ndarray:
        return self.well.from_frame(self.umbilic)


def torus_from_actions(well: HarmonicData, iota, k=None) -> ModelTorus:
    i1, i2 = float(iota[0]), float(iota[1])
    if i1 < 0 or i2 < 0:
        raise ConfigError("actions must be non-negative")
    if i1 == 0 and i2 == 0:
        raise ZeroTorus("the torus with zero actions is the equilibrium point")
    lam = well.lam
    y = np.array([sqrt(2 * i1 / lam[0]), sqrt(2 * i2 / lam[1])])
    E = 2 * lam[0] * i1 + 2 * lam[1] * i2
    return ModelTorus(iota=(i1, i2), E=E, umbilic=y, well=well, k=None if k is None else tuple(k))


def ebk_actions(k, h: float, maslov_shift: bool = True) -> tuple:
    """iota_j = h (k_j + 1/2); the bare variant drops the 1/2."""
    if h <= 0 or min(k) < 0:
        raise ConfigError("need h > 0 and k_j >= 0")
    shift = 0.5 if maslov_shift else 0.0
    return (h * (k[0] + shift), h * (k[1] + shift))


def _phase_1d(lam: float, y: float, x: float) -> float:
    """lam int_y^|x| sqrt(t^2 - y^2) dt."""
    x = abs(x)
    if x < y:
        raise InsideCaustic(f"|x| = {x} inside the caustic y = {y}")
    if y == 0.0:
        return 0.5 * lam * x * x
    r = sqrt(max(x * x - y * y, 0.0))
    return 0.5 * lam * (x * r - y * y * log((x + r) / y))


def model_agmon_F(well: HarmonicData, y, x, frame_coords: bool = True) -> float:
    """F_y(x) = sum_j lam_j int_{y_j}^{x_j} sqrt(t^2 - y_j^2) dt, x in the frame unless ``frame_coords`` is False."""
    z = np.asarray(x, float) if frame_coords else well.to_frame(np.asarray(x, float))
    return _phase_1d(well.lam[0], float(y[0]), z[0]) + _phase_1d(well.lam[1], float(y[1]), z[1])


def model_agmon_F_quad(well: HarmonicData, y, x) -> float:
    """Quadrature version of model_agmon_F (frame coordinates), for cross-checks."""
    total = 0.0
    for j in range(2):
        xj, yj = abs(float(x[j])), float(y[j])
        if xj < yj:
            raise InsideCaustic("inside caustic")
        val, _ = quad(lambda t: sqrt(max(t * t - yj * yj, 0.0)), yj, xj, epsabs=1e-15, epsrel=1e-13, limit=200)
        total += well.lam[j] * val
    return total


@dataclass(frozen=True)
class TunnelPath:
    yL: np.ndarray
    yR: np.ndarray
    x_tilde: np.ndarray
    action: float
    curvature: float            # nan when the minimum sits on a caustic
    on_caustic: bool = False


def _section_frames(left: HarmonicData, right: HarmonicData, x2: float):
    p = np.array([0.0, x2])
    return left.to_frame(p), right.to_frame(p)


def _caustic_margin(left, right, yL, yR, x2: float) -> float:
    """min_j (|z_j| - y_j) over both wells; >= 0 on the valid part of the section."""
    zL, zR = _section_frames(left, right, x2)
    return float(min(np.min(np.abs(zL) - yL), np.min(np.abs(zR) - yR)))


def _section_gradient(left: HarmonicData, right: HarmonicData, yL, yR, x2: float) -> float:
    """d/dx2 of the summed phase on {x1 = 0}: sum_j lam_j sign(z_j) sqrt(z_j^2 - y_j^2) dz_j/dx2."""
    total = 0.0
    for well, y in ((left, yL), (right, yR)):
        z = well.to_frame(np.array([0.0, x2]))
        r = np.sqrt(np.maximum(z * z - y * y, 0.0))
        total += float(np.sum(well.lam * np.sign(z) * r * well.frame[1]))
    return total


def _singular_margin(left, right, yL, yR, x2: float) -> float:
    """Distance to the nearest caustic line; components with y_j = 0 have none."""
    zL, zR = _section_frames(left, right, x2)
    gaps = [abs(z) - y for z, y in zip(np.concatenate([zL, zR]), np.concatenate([yL, yR])) if y > 0]
    return float(min(gaps)) if gaps else np.inf


def _section_phase(left: HarmonicData, right: HarmonicData, yL, yR, x2: float) -> float:
    p = np.array([0.0, x2])
    try:
        return model_agmon_F(left, yL, p, frame_coords=False) + model_agmon_F(right, yR, p, frame_coords=False)
    except InsideCaustic:
        return np.inf


def tunnel_distance(left: HarmonicData, right: HarmonicData, yL, yR, tol: float = 1e-12,
                    n_scan: int = 2001) -> TunnelPath:
    """Minimize F_yL + F_yR over the valid part of the section {x1 = 0}.

    yL, yR are umbilics in their own well frames. When the minimum lies on a
    caustic line (|z_j| = y_j) the constrained minimum is returned with
    ``on_caustic`` set. Of mirror-image minima the one found last on the scan is kept.
    """
    yL = np.asarray(yL, float)
    yR = np.asarray(yR, float)
    EL = float(np.sum(left.lam**2 * yL**2))
    ER = float(np.sum(right.lam**2 * yR**2))
    if abs(EL - ER) > 1e-9:
        raise ConfigError(f"umbilic energies differ: {EL} vs {ER}")
    mid = 0.5 * (left.from_frame(yL)[1] + right.from_frame(yR)[1])
    width = 2 * max(yL[1], yR[1]) + 1
    phi = lambda s: _section_phase(left, right, yL, yR, s)  # noqa: E731
    for _ in range(2):
        xs = np.linspace(mid - width, mid + width, n_scan)
        vals = np.array([phi(x) for x in xs])
        finite = np.isfinite(vals)
        if finite.any():
            best = vals[finite].min()
            cand = np.flatnonzero(finite & (vals <= best + 1e-12 * max(1.0, abs(best))))
            i = int(cand[-1])
            if 0 < i < n_scan - 1:
                break
        width *= 2
    else:
        raise NoInteriorMinimum("section minimum sits on the search bracket")
    if np.isfinite(vals[i - 1]) and np.isfinite(vals[i + 1]):
        grad = lambda s: _section_gradient(left, right, yL, yR, s)  # noqa: E731
        a, b = xs[i - 1], xs[i + 1]
        if grad(a) < 0 < grad(b):
            x2 = brentq(grad, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
            d = min(1e-6, 1e-3 * _singular_margin(left, right, yL, yR, x2))
            curv = (grad(x2 + d) - grad(x2 - d)) / (2 * d)
            if curv <= 1e-10:
                raise DegenerateCritical(f"section phase curvature {curv:.2e} at the minimizer")
            return TunnelPath(yL=yL, yR=yR, x_tilde=np.array([0.0, x2]), action=float(phi(x2)),
                              curvature=float(curv))
        if abs(grad(xs[i])) == 0.0:
            raise DegenerateCritical("flat section phase at the sampled minimum")
    # constrained minimum on a caustic line next to sample i
    j = i + 1 if not np.isfinite(vals[i + 1]) else i - 1
    g = lambda s: _caustic_margin(left, right, yL, yR, s)  # noqa: E731
    x2 = brentq(g, min(xs[i], xs[j]), max(xs[i], xs[j]), xtol=1e-15)
    # nudge onto the valid side
    step = np.sign(xs[i] - xs[j]) * 1e-15
    while g(x2) < 0:
        x2 += step
        step *= 2
    return TunnelPath(yL=yL, yR=yR, x_tilde=np.array([0.0, x2]), action=float(phi(x2)), curvature=float("nan"),
                      on_caustic=True)


def model_table(left: HarmonicData, right: HarmonicData, ks, hs, maslov_shift: bool = True):
    """Rows (k1, k2, h, E, iota1, iota2, y1, y2, tunnel_action, x_tilde2) for k_L = k_R = k."""
    rows = []
    for h in hs:
        for k in ks:
            iota = ebk_actions(k, h, maslov_shift)
            if iota == (0.0, 0.0):
                y = np.zeros(2)
                E = 0.0
            else:
                tor = torus_from_actions(right, iota, k)
                y, E = tor.umbilic, tor.E
            path = tunnel_distance(left, right, y, y)
            rows.append((int(k[0]), int(k[1]), float(h), float(E), iota[0], iota[1], float(y[0]), float(y[1]),
                         path.action, float(path.x_tilde[1])))
    return rows
