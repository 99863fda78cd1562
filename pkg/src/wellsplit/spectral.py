"""Finite-difference oracle for P = -h^2 Laplacian + V and its parity-resolved splittings."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from math import sqrt
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from .errors import BoxTooSmall, ConfigError, LabelAmbiguity, NonConvergence, WindowTooNarrow
from .potentials import PotentialSpec, locate_minima

log = logging.getLogger(__name__)

PARITIES = ("none", "even", "odd")


@dataclass(frozen=True)
class GridSpec:
    L1: float
    L2: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 % 2 == 0:
            raise ConfigError("n1 must be odd so that x1 = 0 is a grid line")
        if min(self.n1, self.n2) < 3 or min(self.L1, self.L2) <= 0:
            raise ConfigError("grid needs at least 3 points per axis and a positive box")

    @property
    def dx1(self) -> float:
        return 2 * self.L1 / (self.n1 + 1)

    @property
    def dx2(self) -> float:
        return 2 * self.L2 / (self.n2 + 1)

    @property
    def x1(self) -> np.ndarray:
        return -self.L1 + self.dx1 * np.arange(1, self.n1 + 1)

    @property
    def x2(self) -> np.ndarray:
        return -self.L2 + self.dx2 * np.arange(1, self.n2 + 1)

    @property
    def center(self) -> int:
        return (self.n1 - 1) // 2


@dataclass
class Operator:
    matrix: sp.csr_matrix
    grid: GridSpec
    hbar: float
    parity: str
    x1: np.ndarray      # x1 values of the retained columns
    x2: np.ndarray
    scale: np.ndarray   # u = vec / scale recovers grid values (sqrt(2) trick on the even centre column)

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ v

    def diagonal(self):
        return self.matrix.diagonal()

    def to_grid(self, vec: np.ndarray) -> np.ndarray:
        """Grid values (n_cols, n2) from an operator vector."""
        u = (vec / self.scale).reshape(len(self.x1), len(self.x2))
        return u


def _second_difference(n: int, c: float) -> sp.csr_matrix:
    return sp.diags([-c * np.ones(n - 1), 2 * c * np.ones(n), -c * np.ones(n - 1)], [-1, 0, 1], format="csr")


def check_box(pot: PotentialSpec, grid: GridSpec, energy: float):
    """BoxTooSmall unless V on the walls is at least 3x the target energy."""
    s1 = np.linspace(-grid.L1, grid.L1, 201)
    s2 = np.linspace(-grid.L2, grid.L2, 201)
    wall = np.concatenate([pot(s1, np.full_like(s1, grid.L2)), pot(s1, np.full_like(s1, -grid.L2)),
                           pot(np.full_like(s2, grid.L1), s2), pot(np.full_like(s2, -grid.L1), s2)])
    if wall.min() < 3 * energy:
        raise BoxTooSmall(f"min V on the walls {wall.min():.4g} < 3 x target energy {energy:.4g}")


def build_operator(pot: PotentialSpec, hbar: float, grid: GridSpec, parity: str = "none",
                   target_energy: float | None = None) -> Operator:
    if parity not in PARITIES:
        raise ConfigError(f"parity must be one of {PARITIES}")
    if hbar <= 0:
        raise ConfigError("hbar must be positive")
    if target_energy is not None:
        check_box(pot, grid, target_energy)
    c1 = hbar**2 / grid.dx1**2
    c2 = hbar**2 / grid.dx2**2
    x1 = grid.x1
    if parity == "none":
        cols = x1
        T1 = _second_difference(grid.n1, c1)
        scale1 = np.ones(grid.n1)
    elif parity == "odd":
        cols = x1[grid.center + 1:]
        T1 = _second_difference(len(cols), c1)
        scale1 = np.ones(len(cols))
    else:
        cols = x1[grid.center:]
        T1 = _second_difference(len(cols), c1).tolil()
        # ghost u(-dx) = u(dx); symmetrized by scaling the centre column by 1/sqrt(2)
        T1[0, 1] = T1[1, 0] = -sqrt(2) * c1
        T1 = T1.tocsr()
        scale1 = np.ones(len(cols))
        scale1[0] = 1 / sqrt(2)
    n1 = len(cols)
    T2 = _second_difference(grid.n2, c2)
    X1, X2 = np.meshgrid(cols, grid.x2, indexing="ij")
    V = pot(X1, X2).ravel()
    A = sp.kron(T1, sp.identity(grid.n2), format="csr") + sp.kron(sp.identity(n1), T2, format="csr") \
        + sp.diags(V, format="csr")
    scale = np.repeat(scale1, grid.n2)
    return Operator(matrix=A.tocsr(), grid=grid, hbar=hbar, parity=parity, x1=cols, x2=grid.x2, scale=scale)


def lanczos(matvec, n: int, k: int, tol: float = 1e-10, maxiter: int | None = None, seed: int = 0,
            start: np.ndarray | None = None):
    """Largest-algebraic Ritz pairs of a symmetric operator by Lanczos with full reorthogonalization.

    Returns (theta descending, vectors (n, k), converged flag, residual estimates).
    """
    maxiter = min(n, maxiter or max(20 * k, 200))
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n) if start is None else np.asarray(start, float).copy()
    q /= np.linalg.norm(q)
    Q = np.zeros((n, maxiter + 1))
    Q[:, 0] = q
    alpha = np.zeros(maxiter)
    beta = np.zeros(maxiter)
    theta = vecs = est = None
    for j in range(maxiter):
        w = matvec(Q[:, j])
        alpha[j] = Q[:, j] @ w
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        beta[j] = np.linalg.norm(w)
        m = j + 1
        if m >= k and (m % 5 == 0 or m == maxiter or beta[j] < 1e-14):
            th, S = eigh_tridiagonal(alpha[:m], beta[: m - 1])
            th, S = th[::-1][:k], S[:, ::-1][:, :k]
            est = np.abs(beta[j] * S[-1, :])
            theta, vecs = th, Q[:, :m] @ S
            if np.all(est <= tol * np.maximum(np.abs(th), 1e-300)) or beta[j] < 1e-14:
                return theta, vecs, True, est
        if beta[j] < 1e-14:
            break
        Q[:, j + 1] = w / beta[j]
    return theta, vecs, False, est


@dataclass
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray


def lowest_eigenpairs(op, k: int, tol: float = 1e-10, method: str = "shift-invert", seed: int = 0,
                      maxiter: int | None = None) -> Eigenpairs:
    """k lowest eigenpairs of a symmetric sparse operator.

    ``method='shift-invert'`` runs Lanczos on (A - s)^-1 with s below the spectrum
    (s = min diagonal potential part, so A - s is positive definite);
    ``method='plain'`` runs it on -A directly, which is only practical for small grids.
    Residuals are ||A u - E u|| / ||u|| in the original operator.
    """
    if not 1 <= k <= 50:
        raise ConfigError("k must be in 1..50")
    if tol < 1e-12:
        raise ConfigError("tol must be >= 1e-12")
    A = op.matrix if isinstance(op, Operator) else sp.csr_matrix(op)
    n = A.shape[0]
    k = min(k, n)
    # start vector: positive ground-state-like guess with a random perturbation
    rng = np.random.default_rng(seed)
    diag = A.diagonal()
    start = np.exp(-(diag - diag.min()) / max(diag.std(), 1e-12)) + 0.1 * rng.random(n)
    if method == "shift-invert":
        # Gershgorin lower bound on the spectrum keeps A - s positive definite
        offdiag = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
        shift = float((diag - offdiag).min()) - 1e-8
        lu = splu((A - shift * sp.identity(n, format="csc")).tocsc())
        theta, V, ok, est = lanczos(lu.solve, n, k, tol=tol * 1e-2, maxiter=maxiter or max(30 * k, 300),
                                    seed=seed, start=start)
        values = shift + 1.0 / theta
    elif method == "plain":
        theta, V, ok, est = lanczos(lambda v: -(A @ v), n, k, tol=tol * 1e-3, maxiter=maxiter or n,
                                    seed=seed, start=start)
        values = -theta
    else:
        raise ConfigError(f"unknown method {method!r}")
    order = np.argsort(values)
    values, V = values[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    res = np.linalg.norm(A @ V - V * values, axis=0)
    scale = max(1.0, float(np.abs(values).max()))
    if not ok or np.any(res > tol * scale):
        raise NonConvergence(f"Lanczos residuals {res.max():.2e} above {tol:.1e}")
    return Eigenpairs(values=values, vectors=V, residuals=res)


@dataclass
class SpectralResult:
    hbar: float
    eigenvalues: np.ndarray
    parities: np.ndarray
    residuals: np.ndarray
    labels: list                      # (m, n) or None per even/odd pair
    pairs: list                       # (E_even, E_odd) per pair, by order
    splittings: dict                  # (m, n) -> E_odd - E_even
    ambiguous: list = field(default_factory=list)

    def rows(self):
        """CSV rows ``index,parity,E,residual``."""
        return [(i, int(p), float(E), float(r))
                for i, (p, E, r) in enumerate(zip(self.parities, self.eigenvalues, self.residuals))]


def _count_sign_changes(values: np.ndarray, rel_floor: float = 1e-3) -> int:
    big = values[np.abs(values) > rel_floor * np.abs(values).max()]
    s = np.sign(big)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def node_label(op: Operator, vec: np.ndarray) -> tuple[int, int]:
    """(m, n) from sign changes along the two axis lines through the largest |u| in the right half."""
    u = op.to_grid(vec)
    right = op.x1 > op.grid.dx1 / 2
    ur = u[right]
    i, j = np.unravel_index(np.argmax(np.abs(ur)), ur.shape)
    return _count_sign_changes(ur[:, j]), _count_sign_changes(ur[i, :])


def harmonic_level(hbar: float, lam, m: int, n: int) -> float:
    return hbar * (lam[0] * (2 * m + 1) + lam[1] * (2 * n + 1))


def splittings(pot: PotentialSpec, hbar: float, grid: GridSpec, count: int = 4, tol: float = 1e-11,
               method: str = "shift-invert", seed: int = 0, strict: bool = False) -> SpectralResult:
    """Even and odd half-domain solves, paired by order and labelled by node counts."""
    left, right = locate_minima(pot)
    lam = right.lam
    top = harmonic_level(hbar, lam, count, 0)
    ops, pairs_raw = {}, {}
    for parity in ("even", "odd"):
        op = build_operator(pot, hbar, grid, parity, target_energy=top)
        ops[parity] = op
        pairs_raw[parity] = lowest_eigenpairs(op, count, tol=tol, method=method, seed=seed)
    ev, od = pairs_raw["even"], pairs_raw["odd"]
    labels, pairs, split, ambiguous = [], [], {}, []
    for i in range(count):
        lab_e = node_label(ops["even"], ev.vectors[:, i])
        lab_o = node_label(ops["odd"], od.vectors[:, i])
        Ee, Eo = ev.values[i], od.values[i]
        pairs.append((float(Ee), float(Eo)))
        # energy-nearest harmonic label as a cross-check of the node count
        cands = [(abs(harmonic_level(hbar, lam, m, n) - 0.5 * (Ee + Eo)), (m, n))
                 for m in range(count + 1) for n in range(count + 1)]
        cands.sort()
        by_energy = cands[0][1]
        if lab_e != lab_o or lab_e != by_energy:
            ambiguous.append(i)
            msg = f"pair {i}: nodes even {lab_e}, odd {lab_o}, energy {by_energy}"
            if strict:
                raise LabelAmbiguity(msg)
            log.warning("label ambiguity: %s", msg)
            labels.append(None)
            continue
        labels.append(lab_e)
        split[lab_e] = float(Eo - Ee)
    values = np.concatenate([ev.values, od.values])
    parities = np.concatenate([np.ones(count), -np.ones(count)])
    res = np.concatenate([ev.residuals, od.residuals])
    order = np.argsort(values, kind="stable")
    return SpectralResult(hbar=hbar, eigenvalues=values[order], parities=parities[order], residuals=res[order],
                          labels=labels, pairs=pairs, splittings=split, ambiguous=ambiguous)


def full_domain_splittings(pot: PotentialSpec, hbar: float, grid: GridSpec, count: int = 4, tol: float = 1e-11,
                           seed: int = 0) -> np.ndarray:
    """Cross-check: differences of consecutive eigenvalues of the unreduced operator.

    Only meaningful while the pair splittings stay well above tol times the
    eigenvalue scale; the half-domain route has no such floor.
    """
    left, right = locate_minima(pot)
    top = harmonic_level(hbar, right.lam, count, 0)
    op = build_operator(pot, hbar, grid, "none", target_energy=top)
    ev = lowest_eigenpairs(op, 2 * count, tol=tol, seed=seed).values
    return ev[1::2] - ev[0::2]


def herring_splitting(pot: PotentialSpec, hbar: float, grid: GridSpec, m: int = 0, window=None,
                      tol: float = 1e-11, seed: int = 0, wall_offset: float | None = None):
    """Surface-integral estimate 4 h^2 int u_L(0, x2) d/dx1 u_R(0, x2) dx2.

    u_L is the (m, 0) eigenfunction of the left sub-box {x1 < wall_offset}
    (default a/2). A wall right next to the symmetry line (``wall_offset=0``
    puts it two cells over, the least that leaves the centred derivative
    defined) forces u_L towards zero where it is sampled and biases the
    estimate low by tens of percent at h = 0.1.
    Returns (estimate, x2 samples, integrand samples).
    """
    c = grid.center
    if wall_offset is None:
        wall_offset = 0.5 * pot.a
    if wall_offset < 0:
        raise ConfigError("wall_offset must be >= 0")
    ncols = min(grid.n1, c + 1 + max(1, int(round(wall_offset / grid.dx1))))
    c1 = hbar**2 / grid.dx1**2
    c2 = hbar**2 / grid.dx2**2
    cols = grid.x1[:ncols]
    X1, X2 = np.meshgrid(cols, grid.x2, indexing="ij")
    A = sp.kron(_second_difference(ncols, c1), sp.identity(grid.n2)) + \
        sp.kron(sp.identity(ncols), _second_difference(grid.n2, c2)) + sp.diags(pot(X1, X2).ravel())
    left, _ = locate_minima(pot)
    want = m + 3
    pairs = lowest_eigenpairs(A.tocsr(), want, tol=tol, seed=seed)
    u = None
    for i in range(want):
        cand = pairs.vectors[:, i].reshape(ncols, grid.n2)
        i1 = int(np.argmin(np.abs(cols - left.minimum[0])))
        j2 = int(np.argmin(np.abs(grid.x2 - left.minimum[1])))
        if _count_sign_changes(cand[:, j2]) == m and _count_sign_changes(cand[i1, :]) == 0:
            u = cand
            break
    if u is None:
        raise LabelAmbiguity(f"no ({m}, 0) state among the {want} lowest left-well states")
    u = u / sqrt((u**2).sum() * grid.dx1 * grid.dx2)
    if u[np.unravel_index(np.argmax(np.abs(u)), u.shape)] < 0:
        u = -u
    # m odd states change sign along x1; fix sign by the value on the symmetry line
    on_line = u[c]
    if on_line[np.argmax(np.abs(on_line))] < 0:
        u = -u
        on_line = u[c]
    # u_R(x1, x2) = u_L(-x1, x2), so d/dx1 u_R(0) = -d/dx1 u_L(0)
    d_right = -(u[c + 1] - u[c - 1]) / (2 * grid.dx1)
    integrand = 4 * hbar**2 * on_line * d_right
    x2 = grid.x2
    if window is not None:
        lo, hi = window
        sel = (x2 >= lo) & (x2 <= hi)
        x2, integrand = x2[sel], integrand[sel]
        peak = np.abs(integrand).max()
        if max(abs(integrand[0]), abs(integrand[-1])) > 1e-6 * peak:
            raise WindowTooNarrow(f"integrand at the window edge is {max(abs(integrand[0]), abs(integrand[-1])) / peak:.1e} of its peak")
    return float(np.trapezoid(integrand, x2)), x2, integrand


# ---- 1-D solver -----------------------------------------------------------

@dataclass
class Spectrum1D:
    hbar: float
    even: np.ndarray
    odd: np.ndarray
    splittings: np.ndarray   # odd - even per level, computed without cancellation

    @property
    def levels(self) -> np.ndarray:
        return np.sort(np.concatenate([self.even, self.odd]))


def solve_1d(v, hbar: float, L: float, n: int, count: int = 4) -> Spectrum1D:
    """Three-point scheme on [-L, L] with n interior points (n odd), split into even/odd halves.

    Splittings use the discrete flux identity
    E_o - E_e = c e_0 o_1 / sum_{j>=1} e_j o_j   (c = h^2/dx^2),
    with e_0 and o_1 recovered by recurrence from the centre, so they stay
    accurate far below the eigenvalue rounding level.
    """
    if n % 2 == 0:
        raise ConfigError("n must be odd")
    m = (n - 1) // 2
    dx = 2 * L / (n + 1)
    x = dx * np.arange(m + 1)
    c = hbar**2 / dx**2
    vv = np.asarray(v(x), float)
    d = 2 * c + vv
    off = -c * np.ones(m)
    off_e = off.copy()
    off_e[0] = -c * sqrt(2)
    Ee, Ve = eigh_tridiagonal(d, off_e, select="i", select_range=(0, count - 1))
    Ve[0, :] /= sqrt(2)
    Eo, Vo = eigh_tridiagonal(d[1:], off[1:], select="i", select_range=(0, count - 1))
    out = np.empty(count)
    for i in range(count):
        er = np.zeros(m + 1)
        orr = np.zeros(m + 1)
        er[0], er[1] = 1.0, (2 * c + vv[0] - Ee[i]) / (2 * c)
        orr[1] = 1.0
        for j in range(1, m):
            er[j + 1] = ((2 * c + vv[j] - Ee[i]) * er[j] - c * er[j - 1]) / c
            orr[j + 1] = ((2 * c + vv[j] - Eo[i]) * orr[j] - c * orr[j - 1]) / c
        e = Ve[:, i]
        o = np.concatenate([[0.0], Vo[:, i]])
        je = int(np.argmax(np.abs(e)))
        jo = int(np.argmax(np.abs(o)))
        e0 = e[je] / er[je]
        o1 = o[jo] / orr[jo]
        out[i] = c * e0 * o1 / np.dot(e[1:], o[1:])
    return Spectrum1D(hbar=hbar, even=Ee, odd=Eo, splittings=out)


# ---- export ---------------------------------------------------------------

def export_eigenfunction(op: Operator, vec: np.ndarray, path, parity_sign: int | None = None) -> Path:
    """Write the full-grid eigenfunction as float64 binary plus a JSON sidecar."""
    u = op.to_grid(vec)
    grid = op.grid
    if op.parity != "none":
        sign = 1 if op.parity == "even" else -1
        if op.parity == "even":
            full = np.concatenate([sign * u[:0:-1], u])
        else:
            full = np.concatenate([sign * u[::-1], np.zeros((1, grid.n2)), u])
    else:
        full = u
    full = full / sqrt((full**2).sum() * grid.dx1 * grid.dx2)
    path = Path(path)
    full.astype("<f8").tofile(path)
    sidecar = {"dims": [grid.n1, grid.n2], "box": [grid.L1, grid.L2], "hbar": op.hbar, "parity": op.parity,
               "dtype": "float64-le", "order": "C (x1 major)"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    return path
