"""Radial fields on a cell-centred grid and the functionals evaluated on them.

A field ``u`` on :class:`RadialGrid` is sampled at ``r_i = (i + 1/2) h`` and is
implicitly extended evenly through ``r = 0`` and by zero beyond ``r_max``.

Functionals
-----------
* mass ``sum_i w_i u_i^2`` with ``w_i = |S^{N-1}| r_i^{N-1} h``;
* ``A[u]`` from staggered differences at the cell edges ``(k+1) h``
  (second or fourth order, ``RadialGrid.fd_order``);
* ``B_s[u] = sum_ij w_i g_i K_ij w_j g_j`` with ``g = |u|^s`` and ``K`` the
  symmetric Riesz kernel built by :func:`build_kernel`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.special import beta as beta_fn
from scipy.special import hyp2f1

from .exceptions import (GridMismatch, GridTooCoarse, ScaleOutOfRange,
                         UnsupportedDimension, ZeroField)

SUPPORTED_DIMS = (3, 4, 5)


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def riesz_prefactor(N: int, alpha: float) -> float:
    return math.gamma((N - alpha) / 2.0) / (
        math.pi ** (N / 2.0) * 2.0 ** alpha * math.gamma(alpha / 2.0))


@dataclass(frozen=True)
class RadialGrid:
    N: int
    r_max: float = 40.0
    M: int = 2048
    fd_order: int = 4

    def __post_init__(self):
        if self.M < 8 or self.r_max <= 0:
            raise ValueError("grid needs M >= 8 and r_max > 0")
        if self.fd_order not in (2, 4):
            raise ValueError("fd_order must be 2 or 4")

    @property
    def h(self) -> float:
        return self.r_max / self.M

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.h

    @cached_property
    def omega(self) -> float:
        return sphere_area(self.N)

    @cached_property
    def weights(self) -> np.ndarray:
        return self.omega * self.nodes ** (self.N - 1) * self.h

    @cached_property
    def edges(self) -> np.ndarray:
        return (np.arange(self.M) + 1.0) * self.h

    @cached_property
    def diff(self) -> sparse.csr_matrix:
        """Staggered derivative: node values -> u'(edge_k), ghosts folded in."""
        M, h = self.M, self.h
        if self.fd_order == 2:
            offsets, coeffs = (0, 1), (-1.0, 1.0)
            scale = 1.0 / h
        else:
            offsets, coeffs = (-1, 0, 1, 2), (1.0, -27.0, 27.0, -1.0)
            scale = 1.0 / (24.0 * h)
        rows, cols, vals = [], [], []
        k = np.arange(M)
        for off, c in zip(offsets, coeffs):
            j = k + off
            # even extension at r = 0: node -1-m mirrors node m
            j = np.where(j < 0, -1 - j, j)
            keep = j < M  # zero beyond r_max
            rows.append(k[keep])
            cols.append(j[keep])
            vals.append(np.full(keep.sum(), c * scale))
        D = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(M, M))
        return D.tocsr()

    @cached_property
    def edge_weights(self) -> np.ndarray:
        return self.omega * self.edges ** (self.N - 1) * self.h

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """Symmetric S with u^T S u = A[u]; (-Laplacian u)_i = (S u)_i / w_i."""
        D = self.diff
        return (D.T @ sparse.diags(self.edge_weights) @ D).tocsr()

    @cached_property
    def _stiff_bands(self) -> np.ndarray:
        bw = 1 if self.fd_order == 2 else 3
        S = self.stiffness.todia()
        ab = np.zeros((bw + 1, self.M))
        for d in range(bw + 1):
            diag = S.diagonal(d)
            ab[bw - d, d:] = diag
        return ab

    def shifted_factor(self, a_coef: float, b_coef: float):
        """Banded Cholesky factor of a*S + b*diag(w)."""
        ab = a_coef * self._stiff_bands.copy()
        ab[-1] += b_coef * self.weights
        return cholesky_banded(ab, lower=False)

    @staticmethod
    def solve_factor(factor, rhs):
        return cho_solve_banded((factor, False), rhs)

    def descriptor(self) -> dict:
        return {"N": self.N, "r_max": self.r_max, "M": self.M, "fd_order": self.fd_order}

    @classmethod
    def from_descriptor(cls, doc: dict) -> "RadialGrid":
        return cls(N=int(doc["N"]), r_max=float(doc["r_max"]), M=int(doc["M"]),
                   fd_order=int(doc.get("fd_order", 4)))

    def ball_volume(self, R: float) -> float:
        return self.omega * R ** self.N / self.N


@dataclass
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.M,):
            raise GridMismatch(f"expected {self.grid.M} values, got {self.values.shape}")

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())

    def __call__(self, r) -> np.ndarray:
        return _spline(self)(np.asarray(r, dtype=float))

    def to_csv(self, path: str | Path) -> None:
        save_field(self, path)


def check_field(u, grid: RadialGrid | None = None) -> RadialField:
    """Validate ``u`` (RadialField or array) and return it as a RadialField."""
    if isinstance(u, RadialField):
        if grid is not None and u.grid != grid:
            raise GridMismatch("field grid differs from the expected grid")
        vals = u.values
    else:
        if grid is None:
            raise GridMismatch("a grid is required to interpret a bare array")
        u = RadialField(grid, np.asarray(u, dtype=float))
        vals = u.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("field contains non-finite values")
    return u


# --------------------------------------------------------------------------
# Riesz kernel

def angular_kernel(N: int, alpha: float, r, s) -> np.ndarray:
    """A(N,alpha) * int_{S^{N-1}} |r e - s sigma|^{alpha-N} d sigma."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    big = np.maximum(r, s)
    t = np.minimum(r, s) / big
    pref = riesz_prefactor(N, alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        if N == 3:
            if alpha == 1.0:
                br = np.log1p(t) - np.log1p(-t)
            else:
                b = alpha - 1.0
                br = (np.expm1(b * np.log1p(t)) - np.expm1(b * np.log1p(-t))) / b
            # 2 pi R^{beta} br / (r s) with r s = R^2 t
            out = np.where(t > 0, 2.0 * math.pi * big ** (alpha - 3.0) * br / t,
                           4.0 * math.pi * big ** (alpha - 3.0))
        else:
            lam = (N - alpha) / 2.0
            nu = (N - 2) / 2.0
            ang = sphere_area(N - 1) * beta_fn(nu + 0.5, 0.5)
            out = ang * big ** (alpha - N) * hyp2f1(lam, lam - nu, nu + 1.0, t * t)
    return pref * out


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * x, 0.5 * w  # on [-1/2, 1/2]


def _graded_rule(a: float, b: float, c: float, levels: int = 14, ratio: float = 0.2,
                 npts: int = 8):
    """Quadrature on [a, b] (unit-cell coordinates) graded toward the point c."""
    if a < c < b:
        x1, w1 = _graded_rule(a, c, c, levels, ratio, npts)
        x2, w2 = _graded_rule(c, b, c, levels, ratio, npts)
        return np.concatenate([x1, x2]), np.concatenate([w1, w2])
    xg, wg = _gl(npts)
    near, far = (a, b) if abs(c - a) <= abs(c - b) else (b, a)
    L = abs(far - near)
    d0 = abs(c - near)
    # breakpoints measured from the singular side
    marks = [0.0] + [L * ratio ** k for k in range(levels - 1, -1, -1)]
    if d0 > 0:
        marks = [0.0] + [m for m in marks[1:] if m > 0.05 * d0] if d0 < L else [0.0, L]
    xs, ws = [], []
    for lo, hi in zip(marks[:-1], marks[1:]):
        mid, half = 0.5 * (lo + hi), hi - lo
        xs.append(mid + half * xg)
        ws.append(half * wg)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    sign = 1.0 if far > near else -1.0
    return near + sign * x, w


@dataclass
class RieszKernel:
    """Discrete Riesz potential on a RadialGrid.

    ``matrix`` is symmetric and defines ``B_s``; ``collocation`` maps source
    values to pointwise potentials, ``V_i = sum_j C_ij f_j``.
    """

    grid: RadialGrid
    alpha: float
    matrix: np.ndarray
    collocation: np.ndarray
    source_order: int

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Symmetric potential ``K (w g)`` used by all variational quantities."""
        return self.matrix @ (self.grid.weights * g)

    def potential(self, f: np.ndarray) -> np.ndarray:
        return self.collocation @ f

    def self_adjointness_defect(self) -> float:
        K = self.matrix
        return float(np.max(np.abs(K - K.T)) / np.max(np.abs(K)))


_KERNEL_CACHE: dict = {}


def build_kernel(grid: RadialGrid, alpha: float, source_order: int = 2,
                 near: int = 2, cache: bool = True) -> RieszKernel:
    """Assemble the radial Riesz kernel by product integration.

    The source is interpolated cell by cell (constant for ``source_order=0``,
    quadratic through the neighbouring nodes for ``source_order=2``) and the
    angular kernel is integrated against it: 3-point Gauss rules on far cells
    and graded Gauss rules on the ``near`` cells either side of the target,
    where the kernel is singular or non-smooth.
    """
    N = grid.N
    if N not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"field operations support N in {SUPPORTED_DIMS}")
    if not 0 < alpha < N:
        raise ValueError("alpha must lie in (0, N)")
    if source_order not in (0, 2):
        raise ValueError("source_order must be 0 or 2")
    key = (grid, float(alpha), source_order, near)
    if cache and key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]

    M, h, r = grid.M, grid.h, grid.nodes
    # moments[k][i, j] = int_{cell j} G(r_i, s) s^{N-1} ((s - s_j)/h)^k ds
    moments = np.zeros((3, M, M))
    xg, wg = _gl(3)
    block = max(1, 2_000_000 // (M * len(xg)))
    for i0 in range(0, M, block):
        i1 = min(M, i0 + block)
        ri = r[i0:i1, None, None]
        s = r[None, :, None] + h * xg[None, None, :]
        vals = angular_kernel(N, alpha, ri, s) * s ** (N - 1) * (h * wg)
        for k in range(3):
            moments[k, i0:i1] = (vals * xg ** k).sum(axis=2)
    # near cells: re-integrate with graded rules
    idx = np.arange(M)
    for d in range(-near, near + 1):
        rows = idx[(idx + d >= 0) & (idx + d < M)]
        cols = rows + d
        # target r_i sits at x = -d in the coordinates of cell j
        xq, wq = _graded_rule(-0.5, 0.5, float(-d))
        s = r[cols][:, None] + h * xq[None, :]
        vals = angular_kernel(N, alpha, r[rows][:, None], s) * s ** (N - 1) * (h * wq)
        for k in range(3):
            moments[k, rows, cols] = (vals * xq ** k).sum(axis=1)

    C = np.zeros((M, M))
    m0, m1, m2 = moments
    if source_order == 0:
        C += m0
    else:
        # f on cell j ~ f_j + (f_{j+1}-f_{j-1}) x / 2 + (f_{j+1} - 2 f_j + f_{j-1}) x^2 / 2
        C += m0 - m2
        up = 0.5 * m1 + 0.5 * m2
        dn = -0.5 * m1 + 0.5 * m2
        C[:, 1:] += up[:, :-1]          # node j+1
        C[:, :-1] += dn[:, 1:]          # node j-1
        C[:, 0] += dn[:, 0]             # node -1 mirrors node 0
    K = C / grid.weights[None, :]
    K = 0.5 * (K + K.T)
    kern = RieszKernel(grid=grid, alpha=float(alpha), matrix=K, collocation=C,
                       source_order=source_order)
    if cache:
        _KERNEL_CACHE[key] = kern
    return kern


def clear_kernel_cache() -> None:
    _KERNEL_CACHE.clear()


# --------------------------------------------------------------------------
# functionals

def _vals(u) -> np.ndarray:
    return u.values if isinstance(u, RadialField) else np.asarray(u, dtype=float)


def mass(u: RadialField) -> float:
    return float(np.dot(u.grid.weights, u.values ** 2))


def grad_energy(u: RadialField) -> float:
    du = u.grid.diff @ u.values
    return float(np.dot(u.grid.edge_weights, du * du))


def _check_kernel(u: RadialField, kernel: RieszKernel) -> None:
    if u.grid != kernel.grid:
        raise GridMismatch("field and kernel live on different grids")


def b_term(u: RadialField, s, kernel: RieszKernel) -> float:
    _check_kernel(u, kernel)
    g = np.abs(u.values) ** float(s)
    return float(np.dot(u.grid.weights * g, kernel.apply(g)))


@dataclass(frozen=True)
class EnergyBreakdown:
    mass: float
    A: float
    B_p: float
    B_q: float
    E: float
    P: float

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("mass", "A", "B_p", "B_q", "E", "P")}


def energy_from_parts(params, A: float, B_p: float, B_q: float) -> tuple[float, float]:
    p, q, mu = float(params.p), float(params.q), float(params.mu)
    E = 0.5 * A - B_p / (2 * p) - mu * B_q / (2 * q)
    P = A - params.eta_p * B_p - mu * params.eta_q * B_q
    return E, P


def breakdown(u: RadialField, params, kernel: RieszKernel) -> EnergyBreakdown:
    _check_kernel(u, kernel)
    A = grad_energy(u)
    B_p = b_term(u, params.p, kernel)
    B_q = b_term(u, params.q, kernel)
    E, P = energy_from_parts(params, A, B_p, B_q)
    return EnergyBreakdown(mass(u), A, B_p, B_q, E, P)


def nonlinear_force(values: np.ndarray, s: float, kernel: RieszKernel) -> np.ndarray:
    """(I_alpha * |u|^s) |u|^{s-2} u on the nodes (the B_s gradient / (2 s w))."""
    au = np.abs(values)
    g = au ** s
    V = kernel.apply(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(au > 0, V * au ** (s - 2.0) * values, 0.0)
    return out


def neg_laplacian(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    return (grid.stiffness @ values) / grid.weights


# --------------------------------------------------------------------------
# transformations

def _spline(u: RadialField) -> CubicSpline:
    g = u.grid
    nodes = np.concatenate([-g.nodes[:3][::-1], g.nodes, [g.r_max + 0.5 * g.h]])
    vals = np.concatenate([u.values[:3][::-1], u.values, [0.0]])
    return CubicSpline(nodes, vals, bc_type="not-a-knot", extrapolate=False)


def resample(u: RadialField, grid: RadialGrid) -> RadialField:
    """Cubic interpolation of u onto another grid of the same dimension (zero outside)."""
    if grid.N != u.grid.N:
        raise GridMismatch("cannot resample across dimensions")
    x = grid.nodes
    vals = np.nan_to_num(_spline(u)(np.minimum(x, u.grid.r_max + 0.5 * u.grid.h)))
    vals[x > u.grid.r_max] = 0.0
    return RadialField(grid, vals)


def scale_field(u: RadialField, s: float, mass_tol: float = 1e-6) -> RadialField:
    """The mass-preserving dilation v(r) = s^{N/4} u(s^{1/2} r)."""
    if not s > 0:
        raise ValueError("scale must be positive")
    if s == 1.0:
        return u.copy()
    g = u.grid
    x = math.sqrt(s) * g.nodes
    inside = x <= g.r_max + 0.5 * g.h
    vals = np.zeros(g.M)
    vals[inside] = _spline(u)(x[inside])
    vals = np.nan_to_num(vals) * s ** (g.N / 4.0)
    if s < 1.0 and _tail_mass(u, math.sqrt(s)) > mass_tol * mass(u):
        raise ScaleOutOfRange(f"dilation by s={s:g} pushes mass outside r_max")
    return RadialField(g, vals)


def _tail_mass(u: RadialField, sq: float) -> float:
    # mass of u beyond sq * r_max, i.e. what leaves the grid under v(r) = u(sq r)
    g = u.grid
    mask = g.nodes > sq * g.r_max
    return float(np.dot(g.weights[mask], u.values[mask] ** 2))


def normalize_mass(u: RadialField, a: float) -> RadialField:
    m = mass(u)
    if not m > 0:
        raise ZeroField("cannot normalize a field with zero mass")
    return RadialField(u.grid, u.values * (a / math.sqrt(m)))


def rearrange_decreasing(u: RadialField) -> RadialField:
    """Discrete Schwarz rearrangement of |u| on the weighted grid.

    The distribution function of |u| over the measure ``w`` is transported to
    the nested balls: the largest values fill the innermost shells.  Each shell
    receives the L^2-average of the sorted mass it covers, so mass is exact.
    """
    g = u.grid
    w = g.weights
    a = np.abs(u.values)
    order = np.argsort(-a, kind="stable")
    sw = w[order]
    sv2 = (a[order] ** 2) * sw
    # cumulative measure of sorted values and of target shells
    cw_src = np.concatenate([[0.0], np.cumsum(sw)])
    cm_src = np.concatenate([[0.0], np.cumsum(sv2)])
    cw_dst = np.concatenate([[0.0], np.cumsum(w)])
    # mass of the sorted profile inside measure level t, linear within each source atom
    m_at = np.interp(cw_dst, cw_src, cm_src)
    out = np.sqrt(np.maximum(np.diff(m_at), 0.0) / w)
    # monotone by construction up to rounding
    out = np.minimum.accumulate(out)
    return RadialField(g, out)


def _cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth nonincreasing profile: 1 on [0,1], 0 on [2, inf)."""
    def f(t):
        out = np.zeros_like(t)
        m = t > 0
        out[m] = np.exp(-1.0 / t[m])
        return out
    a, b = f(2.0 - r), f(r - 1.0)
    return a / (a + b)


def talenti_profile(N: int, epsilon: float, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    c = (N * (N - 2) * epsilon ** 2) ** ((N - 2) / 4.0)
    return c / (epsilon ** 2 + r ** 2) ** ((N - 2) / 2.0)


def bubble(grid: RadialGrid, epsilon: float, cutoff_radius: float = 1.0,
           check: bool = True) -> RadialField:
    """Cut-off Sobolev extremal xi(r / cutoff_radius) * u_eps(r)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if check and epsilon < 4 * grid.h:
        raise GridTooCoarse(f"epsilon={epsilon:g} below 4h={4 * grid.h:g}")
    r = grid.nodes
    return RadialField(grid, _cutoff(r / cutoff_radius) * talenti_profile(grid.N, epsilon, r))


def gaussian(grid: RadialGrid, width: float = 1.0, amplitude: float = 1.0) -> RadialField:
    return RadialField(grid, amplitude * np.exp(-(grid.nodes / width) ** 2))


def random_field(grid: RadialGrid, seed: int, smoothness: float = 1.0,
                 n_terms: int = 4) -> RadialField:
    """Positive sum of seeded Gaussians; ``smoothness`` scales the widths."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    scale = min(grid.r_max / 8.0, 4.0)
    vals = np.zeros_like(r)
    for _ in range(n_terms):
        amp = rng.uniform(0.2, 1.0)
        center = rng.uniform(0.0, 1.5) * scale
        width = smoothness * rng.uniform(0.4, 1.2) * scale
        vals += amp * (np.exp(-((r - center) / width) ** 2) + np.exp(-((r + center) / width) ** 2))
    return RadialField(grid, vals)


# --------------------------------------------------------------------------
# serialization

def save_field(u: RadialField, path: str | Path, descriptor: bool = True) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["r", "u"])
        for ri, ui in zip(u.grid.nodes, u.values):
            wr.writerow([repr(float(ri)), repr(float(ui))])
    if descriptor:
        path.with_suffix(".grid.json").write_text(json.dumps(u.grid.descriptor(), indent=2))


def load_field(path: str | Path, grid: RadialGrid | None = None) -> RadialField:
    path = Path(path)
    if grid is None:
        grid = RadialGrid.from_descriptor(json.loads(path.with_suffix(".grid.json").read_text()))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.M or not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=0):
        src = RadialGrid(grid.N, float(data[-1, 0] + 0.5 * (data[1, 0] - data[0, 0])), data.shape[0],
                         grid.fd_order)
        return resample(RadialField(src, data[:, 1]), grid)
    return RadialField(grid, data[:, 1])
