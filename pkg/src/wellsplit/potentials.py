"""Symmetric double-well potential family and its harmonic data.

Every potential is an instance of the polynomial

    V(x1, x2) = alpha (x1^2 - a^2)^2 + omega^2 x2^2 + c x1^2 x2^2 + d (x1^2 - a^2) x2

which depends on x1 only through x1^2, so V(-x1, x2) == V(x1, x2) bitwise.
The minima sit at (+-a, 0) with V = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import brentq
from skimage import measure

from .errors import (
    ConfigError,
    DegenerateMinimum,
    EnergyAboveBarrier,
    EnergyNonPositive,
    NonConvergence,
)

Side = Literal["L", "R"]

# coefficient keys each family accepts; missing ones default to 0 (c, d) or 1
FAMILIES = {
    "separable-quartic": ("alpha", "a", "omega"),
    "coupled-quartic": ("alpha", "a", "omega", "c"),
    "curved-quartic": ("alpha", "a", "omega", "c", "d"),
}

BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class PotentialSpec:
    """One member of the quartic double-well family.

    ``box`` holds the half-widths (L1, L2) of the bounding box used for the
    minima search and for contouring; ``None`` means [-2.5a, 2.5a]^2.
    """

    family: str = "curved-quartic"
    alpha: float = 0.25
    a: float = 1.0
    omega: float = 2.5
    c: float = 0.0
    d: float = 0.0
    box: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown potential family {self.family!r}")
        allowed = FAMILIES[self.family]
        if "c" not in allowed and self.c != 0.0:
            raise ConfigError(f"family {self.family} has no c coefficient")
        if "d" not in allowed and self.d != 0.0:
            raise ConfigError(f"family {self.family} has no d coefficient")
        for name in ("alpha", "a", "omega"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.c < 0:
            raise ConfigError("c must be non-negative (V would be unbounded below)")
        if self.box is None:
            object.__setattr__(self, "box", (2.5 * self.a, 2.5 * self.a))
        else:
            object.__setattr__(self, "box", tuple(float(b) for b in self.box))
        det = 4 * self.alpha * self.a**2 * (self.omega**2 + self.c * self.a**2) - (self.d * self.a) ** 2
        if det <= 0:
            raise DegenerateMinimum(f"det(Hess/2) = {det:.3e} <= 0 at (a, 0)")

    @classmethod
    def from_params(cls, family: str, params: dict, box=None) -> "PotentialSpec":
        unknown = set(params) - set(FAMILIES.get(family, ()))
        if unknown:
            raise ConfigError(f"unknown coefficients for {family}: {sorted(unknown)}")
        return cls(family=family, box=box, **{k: float(v) for k, v in params.items()})

    @property
    def params(self) -> dict:
        return {k: getattr(self, k) for k in FAMILIES[self.family]}

    # -- evaluation -------------------------------------------------------
    def __call__(self, x1, x2):
        u = x1 * x1 - self.a**2
        return self.alpha * u * u + self.omega**2 * x2 * x2 + self.c * x1 * x1 * x2 * x2 + self.d * u * x2

    def gradient(self, x1, x2):
        u = x1 * x1 - self.a**2
        g1 = 4 * self.alpha * x1 * u + 2 * self.c * x1 * x2 * x2 + 2 * self.d * x1 * x2
        g2 = 2 * self.omega**2 * x2 + 2 * self.c * x1 * x1 * x2 + self.d * u
        return np.array([g1, g2])

    def hessian(self, x1, x2):
        h11 = self.alpha * (12 * x1 * x1 - 4 * self.a**2) + 2 * self.c * x2 * x2 + 2 * self.d * x2
        h12 = 4 * self.c * x1 * x2 + 2 * self.d * x1
        h22 = 2 * self.omega**2 + 2 * self.c * x1 * x1
        return np.array([[h11, h12], [h12, h22]])

    @property
    def saddle(self) -> np.ndarray:
        """Lowest point of V on the symmetry line {x1 = 0}."""
        return np.array([0.0, self.d * self.a**2 / (2 * self.omega**2)])

    @property
    def barrier(self) -> float:
        return float(self(*self.saddle))

    def in_box(self, x) -> bool:
        return abs(x[0]) <= self.box[0] and abs(x[1]) <= self.box[1]


def eval_with_derivatives(pot: PotentialSpec, x):
    """Return (V, grad V, Hess V) at the point ``x``."""
    x1, x2 = float(x[0]), float(x[1])
    return float(pot(x1, x2)), pot.gradient(x1, x2), pot.hessian(x1, x2)


@dataclass(frozen=True)
class HarmonicData:
    """Quadratic approximation V ~ sum lam_j^2 z_j^2 at one minimum.

    ``frame`` has the principal axes as columns, z = frame.T @ (x - minimum).
    The lam_1 axis points towards +x1 for both wells (the direction the
    instanton travels), and the frame is right-handed.
    """

    minimum: np.ndarray
    lam: np.ndarray
    frame: np.ndarray
    side: str = "R"

    @property
    def lam1(self) -> float:
        return float(self.lam[0])

    @property
    def lam2(self) -> float:
        return float(self.lam[1])

    def to_frame(self, x):
        return self.frame.T @ (np.asarray(x, float) - self.minimum)

    def from_frame(self, z):
        return self.minimum + self.frame @ np.asarray(z, float)


def _harmonic(pot: PotentialSpec, xmin: np.ndarray, side: str) -> HarmonicData:
    half_hess = 0.5 * pot.hessian(*xmin)
    w, vecs = np.linalg.eigh(half_hess)
    if w[0] * w[1] <= 0 or w[0] <= 0:
        raise DegenerateMinimum(f"Hess/2 eigenvalues {w} at {xmin}")
    v1 = vecs[:, 0] * np.sign(vecs[0, 0] or 1.0)
    v2 = np.array([-v1[1], v1[0]])
    return HarmonicData(minimum=xmin, lam=np.sqrt(w), frame=np.column_stack([v1, v2]), side=side)


def _newton_minimum(pot: PotentialSpec, seed, maxiter=50):
    x = np.array(seed, float)
    for _ in range(maxiter):
        g = pot.gradient(*x)
        if np.linalg.norm(g) <= 1e-12:
            return x
        x = x - np.linalg.solve(pot.hessian(*x), g)
    raise NonConvergence(f"Newton from {seed} did not reach |grad| <= 1e-12")


def locate_minima(pot: PotentialSpec) -> tuple[HarmonicData, HarmonicData]:
    right = _newton_minimum(pot, (pot.a, 0.0))
    left = np.array([-right[0], right[1]])
    return _harmonic(pot, left, "L"), _harmonic(pot, right, "R")


def check_quasi1d_assumptions(pot: PotentialSpec) -> dict:
    """Report whether the quasi 1-D hypothesis 2 lam1 < lam2 holds.

    The uniqueness of the libration family near the instanton is assumed, not
    checked, and is reported as such.
    """
    _, right = locate_minima(pot)
    return {
        "gap_ok": bool(2 * right.lam1 < right.lam2),
        "lambda1": right.lam1,
        "lambda2": right.lam2,
        "ratio": right.lam2 / right.lam1,
        "barrier": pot.barrier,
        "unique_libration_family": "assumed",
    }


# -- level sets -----------------------------------------------------------
def boundary_point(pot: PotentialSpec, E: float, well: HarmonicData, angle: float) -> np.ndarray:
    """First point of {V = E} on the ray from the minimum at ``angle``.

    The angle is measured in the well's principal frame from the lam_1 axis.
    """
    direction = well.frame @ np.array([np.cos(angle), np.sin(angle)])

    def f(r):
        p = well.minimum + r * direction
        return pot(p[0], p[1]) - E

    # march outward in steps of a twentieth of the harmonic radius
    lam_dir = np.sqrt((well.lam**2 * np.array([np.cos(angle), np.sin(angle)]) ** 2).sum())
    dr = 0.05 * np.sqrt(E) / lam_dir
    rmax = 2 * max(pot.box) + 2 * pot.a
    r_lo, r_hi = 0.0, dr
    while f(r_hi) < 0:
        r_lo, r_hi = r_hi, r_hi + dr
        if r_hi > rmax:
            raise EnergyAboveBarrier(f"ray at angle {angle} never reaches V = {E}")
    r = brentq(f, r_lo, r_hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return project_to_level(pot, well.minimum + r * direction, E)


def project_to_level(pot: PotentialSpec, p, E, tol=None, maxiter=30):
    """Newton-project ``p`` onto {V = E} along the gradient direction."""
    tol = BOUNDARY_TOL * 1e-3 * max(1.0, E) if tol is None else tol
    p = np.array(p, float)
    for _ in range(maxiter):
        r = pot(p[0], p[1]) - E
        if abs(r) <= tol:
            return p
        g = pot.gradient(p[0], p[1])
        p = p - r * g / (g @ g)
    if abs(pot(p[0], p[1]) - E) <= BOUNDARY_TOL:
        return p
    raise NonConvergence(f"projection onto V={E} failed at {p}")


@dataclass
class WellBoundary:
    E: float
    side: str
    polyline: np.ndarray  # (n, 2), closed: first point repeated at the end
    arclength: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = s % self.length
        return np.array([np.interp(s, self.arclength, self.polyline[:, k]) for k in range(2)])

    def area(self) -> float:
        x, y = self.polyline[:, 0], self.polyline[:, 1]
        return 0.5 * abs(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def _point_in_polygon(pt, poly) -> bool:
    x, y = pt
    inside = False
    xs, ys = poly[:, 0], poly[:, 1]
    for i in range(len(poly) - 1):
        if (ys[i] > y) != (ys[i + 1] > y):
            xc = xs[i] + (y - ys[i]) * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i])
            if x < xc:
                inside = not inside
    return inside


def well_boundary(pot: PotentialSpec, E: float, side: Side = "L", resolution: int = 128) -> WellBoundary:
    """Closed contour {V = E} around one minimum.

    Marching squares on a window around the minimum, then every vertex is
    Newton-projected onto the level set.
    """
    if E <= 0:
        raise EnergyNonPositive(f"E = {E} <= 0")
    if resolution < 32:
        raise ValueError("resolution must be >= 32")
    if E >= pot.barrier:
        raise EnergyAboveBarrier(f"E = {E} >= barrier {pot.barrier}")
    left, right = locate_minima(pot)
    well = left if side == "L" else right
    # window from ray extents
    pts = np.array([boundary_point(pot, E, well, t) for t in np.linspace(0, 2 * np.pi, 16, endpoint=False)])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    pad = 0.15 * (hi - lo) + 1e-12
    lo, hi = lo - pad, hi + pad
    g1 = np.linspace(lo[0], hi[0], resolution)
    g2 = np.linspace(lo[1], hi[1], resolution)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    contours = measure.find_contours(pot(X1, X2), E)
    chosen = None
    for cont in contours:
        xy = np.column_stack([np.interp(cont[:, 0], np.arange(resolution), g1),
                              np.interp(cont[:, 1], np.arange(resolution), g2)])
        closed = np.allclose(xy[0], xy[-1])
        if closed and _point_in_polygon(well.minimum, xy):
            chosen = xy
            break
    if chosen is None:
        raise EnergyAboveBarrier(f"no closed level curve V={E} around the {side} minimum")
    other = right.minimum if side == "L" else left.minimum
    if _point_in_polygon(other, chosen):
        raise EnergyAboveBarrier("level curve encloses both minima")
    proj = np.array([project_to_level(pot, p, E) for p in chosen[:-1]])
    proj = np.vstack([proj, proj[:1]])
    seg = np.linalg.norm(np.diff(proj, axis=0), axis=1)
    return WellBoundary(E=E, side=side, polyline=proj, arclength=np.concatenate([[0.0], np.cumsum(seg)]))
