"""Beltrami equation on a uniform grid.

The Cauchy transform ``(1/pi) int f(zeta)/(z - zeta) dA`` and the Beurling
transform ``-(1/pi) pv int f(zeta)/(z - zeta)^2 dA`` are discrete convolutions
of cell values with exact integrals of the kernels over grid cells, applied
with zero-padded FFTs.  Principal solutions come from the Neumann series
``h = mu S h + mu``, ``F = w + C h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, InputError, ResolutionError, StageError

DEFAULT_GRID = 1024
DEFAULT_EXTENT = 8.0
CIRCLE_TOL = 1e-3
DERIV_STEPS = 4  # finite-difference spacing in grid cells


# --------------------------------------------------------------------------
# grid carrier


@dataclass(frozen=True, eq=False)
class GridField:
    """Cell-centred complex samples on ``[-L, L]^2``; ``values[iy, ix]``."""

    values: np.ndarray
    L: float
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError("grid values must be a square array")
        if not np.all(np.isfinite(v)):
            raise InputError("grid values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "L", float(self.L))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2 * self.L / self.n

    @property
    def axis(self) -> np.ndarray:
        return grid_axis(self.n, self.L)

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.n, self.L)

    @property
    def support_radius(self) -> float:
        nz = np.abs(self.values) > 0
        return float(np.max(np.abs(self.points[nz]))) if nz.any() else 0.0

    @property
    def touches_boundary(self) -> bool:
        v = self.values
        return bool(np.any(v[0]) or np.any(v[-1]) or np.any(v[:, 0]) or np.any(v[:, -1]))

    @classmethod
    def from_function(cls, fn: Callable, n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT):
        return cls(np.asarray(fn(grid_points(n, L)), dtype=complex), L)

    @classmethod
    def from_cell_average(cls, fn: Callable, n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT,
                          sub: int = 8):
        """Cell averages of ``fn`` by a ``sub x sub`` midpoint rule in each cell."""
        Z = grid_points(n, L)
        h = 2 * L / n
        off = ((np.arange(sub) + 0.5) / sub - 0.5) * h
        acc = np.zeros((n, n), dtype=complex)
        for a in off:
            for b in off:
                acc += fn(Z + a + 1j * b)
        return cls(acc / sub ** 2, L)

    def interp(self, z) -> np.ndarray:
        return bilinear(self.values, self.L, z)

    def __add__(self, other: "GridField") -> "GridField":
        return GridField(self.values + other.values, self.L)

    def scale(self, c) -> "GridField":
        return GridField(self.values * c, self.L)

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.h)


def grid_axis(n: int, L: float) -> np.ndarray:
    h = 2 * L / n
    return -L + (np.arange(n) + 0.5) * h


def grid_points(n: int, L: float) -> np.ndarray:
    x = grid_axis(n, L)
    return x[None, :] + 1j * x[:, None]


def bilinear(values: np.ndarray, L: float, z) -> np.ndarray:
    """Bilinear interpolation of cell-centred values (clamped at the grid edge)."""
    z = np.asarray(z, dtype=complex)
    n = values.shape[0]
    h = 2 * L / n
    fx = (z.real + L) / h - 0.5
    fy = (z.imag + L) / h - 0.5
    ix = np.clip(np.floor(fx).astype(int), 0, n - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, n - 2)
    tx = np.clip(fx - ix, 0.0, 1.0)
    ty = np.clip(fy - iy, 0.0, 1.0)
    v00 = values[iy, ix]
    v01 = values[iy, ix + 1]
    v10 = values[iy + 1, ix]
    v11 = values[iy + 1, ix + 1]
    return (v00 * (1 - tx) * (1 - ty) + v01 * tx * (1 - ty)
            + v10 * (1 - tx) * ty + v11 * tx * ty)


# --------------------------------------------------------------------------
# kernels


def _edge_h(x, y0):
    """Antiderivative in x of conj(w)/w along the horizontal line Im w = y0."""
    return x - 2 * y0 * np.arctan(x / y0) - 1j * y0 * np.log(x * x + y0 * y0)


def _edge_v(y, x0):
    """Antiderivative in y of (conj(w)/w) i along the vertical line Re w = x0."""
    return -1j * y + 2j * x0 * np.arctan(y / x0) + x0 * np.log(x0 * x0 + y * y)


def cell_integral_inv(cx, cy, h):
    """Integral of 1/w over the square cell of side h centred at (cx, cy).

    Green's theorem turns it into (1/2i) times the boundary integral of conj(w)/w.
    """
    x1, x2 = cx - h / 2, cx + h / 2
    y1, y2 = cy - h / 2, cy + h / 2
    loop = (_edge_h(x2, y1) - _edge_h(x1, y1)
            + _edge_v(y2, x2) - _edge_v(y1, x2)
            + _edge_h(x1, y2) - _edge_h(x2, y2)
            + _edge_v(y1, x1) - _edge_v(y2, x1))
    return loop / 2j


def cell_integral_inv2(cx, cy, h):
    """Principal-value integral of 1/w^2 over the cell (iterated: x first)."""
    x1, x2 = cx - h / 2, cx + h / 2
    y1, y2 = cy - h / 2, cy + h / 2

    def P(x):
        return (np.arctan(y2 / x) - 0.5j * np.log(x * x + y2 * y2)
                - np.arctan(y1 / x) + 0.5j * np.log(x * x + y1 * y1))

    return -P(x2) + P(x1)


@lru_cache(maxsize=2)
def _kernel_spectra(n: int, L: float):
    h = 2 * L / n
    d = np.arange(-(n - 1), n) * h
    cx, cy = d[None, :], d[:, None]
    kc = cell_integral_inv(cx, cy, h) / np.pi
    ks = -cell_integral_inv2(cx, cy, h) / np.pi
    ks[n - 1, n - 1] = 0.0
    kc[n - 1, n - 1] = 0.0
    m = 2 * n
    idx = np.mod(np.arange(-(n - 1), n), m)
    out = []
    for k in (kc, ks):
        pad = np.zeros((m, m), dtype=complex)
        pad[np.ix_(idx, idx)] = k
        out.append(sfft.fft2(pad, workers=-1))
    return tuple(out)


def _convolve(values: np.ndarray, spectrum: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    pad = np.zeros((2 * n, 2 * n), dtype=complex)
    pad[:n, :n] = values
    return sfft.ifft2(sfft.fft2(pad, workers=-1) * spectrum, workers=-1)[:n, :n]


def cauchy_transform(f: GridField) -> GridField:
    """``(1/pi) int f(zeta) / (z - zeta) dA`` at the cell centres."""
    kc, _ = _kernel_spectra(f.n, f.L)
    return GridField(_convolve(f.values, kc), f.L, {"truncated": f.touches_boundary})


def beurling_transform(f: GridField) -> GridField:
    """``-(1/pi) pv int f(zeta) / (z - zeta)^2 dA`` at the cell centres."""
    _, ks = _kernel_spectra(f.n, f.L)
    return GridField(_convolve(f.values, ks), f.L, {"truncated": f.touches_boundary})


# --------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True, eq=False)
class BeltramiCoefficient:
    """Complex dilatation ``mu`` given by an evaluator; ``k`` is its sampled sup norm."""

    evaluator: Callable
    k: float
    support: Optional[Callable] = field(default=None, repr=False)
    description: str = ""

    def __post_init__(self):
        if not (self.k < 1):
            raise InputError(f"Beltrami coefficient is degenerate: sup |mu| = {self.k}")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        v = np.asarray(self.evaluator(z), dtype=complex)
        v = np.broadcast_to(v, z.shape).copy()
        if self.support is not None:
            v = np.where(self.support(z), v, 0.0)
        return v

    @classmethod
    def constant(cls, c, support=None) -> "BeltramiCoefficient":
        c = complex(c)
        return cls(lambda z: np.full(np.shape(z), c), abs(c), support, f"constant {c}")

    @classmethod
    def from_callable(cls, fn, probe, support=None, description="") -> "BeltramiCoefficient":
        probe = np.asarray(probe, dtype=complex)
        vals = np.asarray(fn(probe))
        if support is not None:
            vals = np.where(support(probe), vals, 0.0)
        if not np.all(np.isfinite(vals)):
            raise InputError("Beltrami coefficient has non-finite samples")
        return cls(fn, float(np.max(np.abs(vals))) if vals.size else 0.0, support, description)

    @classmethod
    def from_grid(cls, field_: GridField) -> "BeltramiCoefficient":
        k = float(np.max(np.abs(field_.values)))
        return cls(field_.interp, k, None, "grid")

    def on_grid(self, n: int, L: float) -> GridField:
        return GridField(self(grid_points(n, L)), L)


def disk_support(radius: float = 1.0, center: complex = 0j):
    return lambda z: np.abs(np.asarray(z) - center) < radius


def _mu_expr(expr: str):
    env_names = {name: getattr(np, name) for name in (
        "sin", "cos", "exp", "log", "sqrt", "abs", "conj", "real", "imag", "angle", "pi", "where")}

    def fn(z):
        z = np.asarray(z, dtype=complex)
        env = dict(env_names, z=z, x=z.real, y=z.imag, i=1j)
        with np.errstate(all="ignore"):
            out = eval(compile(expr, "<mu>", "eval"), {"__builtins__": {}}, env)
        return np.nan_to_num(np.broadcast_to(np.asarray(out, dtype=complex), z.shape))

    return fn


def coefficient_from_json(obj, support=None, probe=None) -> BeltramiCoefficient:
    """``{"kind": "constant", "value": [re, im]}``, ``{"kind": "expr", "expr": ...}``
    or ``{"kind": "grid", "L": ..., "re": [[...]], "im": [[...]]}``."""
    if obj is None:
        return BeltramiCoefficient.constant(0.0, support)
    kind = obj.get("kind")
    if kind == "constant":
        v = obj.get("value", 0.0)
        c = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        return BeltramiCoefficient.constant(c, support)
    if kind == "expr":
        if probe is None:
            probe = grid_points(256, 1.0).ravel()
        return BeltramiCoefficient.from_callable(_mu_expr(obj["expr"]), probe, support, obj["expr"])
    if kind == "grid":
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        return BeltramiCoefficient.from_grid(GridField(re + 1j * im, float(obj["L"])))
    raise InputError(f"unknown coefficient kind {kind!r}")


# --------------------------------------------------------------------------
# maps


@dataclass(frozen=True, eq=False)
class QCMap:
    """Grid-sampled ``F`` with ``F_z``, ``F_zbar``, optionally post-composed
    with an analytic map ``post`` (and its derivative ``post_d``)."""

    F: np.ndarray
    Fz: np.ndarray
    Fzbar: np.ndarray
    L: float
    post: Optional[Callable] = field(default=None, repr=False)
    post_d: Optional[Callable] = field(default=None, repr=False)
    normalization: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    reflect_outside: bool = False

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def h(self) -> float:
        return 2 * self.L / self.n

    def raw(self, w):
        w = np.asarray(w, dtype=complex)
        return w + bilinear(self.F - grid_points(self.n, self.L), self.L, w)

    def _forward_inside(self, w):
        v = self.raw(w)
        return self.post(v) if self.post is not None else v

    def forward(self, w):
        w = np.asarray(w, dtype=complex)
        if not self.reflect_outside:
            return self._forward_inside(w)
        out = np.empty(w.shape, dtype=complex)
        inside = np.abs(w) <= 1
        out[inside] = self._forward_inside(w[inside])
        wo = w[~inside]
        out[~inside] = 1.0 / np.conj(self._forward_inside(1.0 / np.conj(wo)))
        return out

    __call__ = forward

    def derivatives(self, w):
        """``(G_z, G_zbar)`` from the grid derivatives and the analytic post-map."""
        w = np.asarray(w, dtype=complex)
        fz = bilinear(self.Fz, self.L, w)
        fzb = bilinear(self.Fzbar, self.L, w)
        if self.post_d is not None:
            d = self.post_d(self.raw(w))
            return d * fz, d * fzb
        return fz, fzb

    def jacobian(self, w):
        fz, fzb = self.derivatives(w)
        return np.abs(fz) ** 2 - np.abs(fzb) ** 2

    def inverse(self, zeta, tol: float = 1e-12, max_iter: int = 50):
        """Solve ``G(w) = zeta`` by Newton steps with the grid Jacobian."""
        zeta = np.asarray(zeta, dtype=complex)
        flat = zeta.ravel()
        pts = grid_points(min(self.n, 256), min(self.L, 1.0))
        vals = self.forward(pts).ravel()
        from scipy.spatial import cKDTree
        tree = cKDTree(np.column_stack([vals.real, vals.imag]))
        _, idx = tree.query(np.column_stack([flat.real, flat.imag]))
        w = pts.ravel()[idx]
        for _ in range(max_iter):
            r = flat - self.forward(w)
            a, b = self.derivatives(w)
            step = (np.conj(a) * r - b * np.conj(r)) / (np.abs(a) ** 2 - np.abs(b) ** 2)
            w = w + step
            if np.max(np.abs(step)) < tol:
                break
        return w.reshape(zeta.shape)

    def beltrami_residual(self, mu: Callable, w) -> np.ndarray:
        """``|G_zbar - mu G_z|`` from the grid derivatives."""
        a, b = self.derivatives(w)
        return np.abs(b - mu(w) * a)


@dataclass(frozen=True)
class NeumannHistory:
    iterations: int
    differences: tuple
    ratios: tuple

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


def principal_solution(mu: BeltramiCoefficient, tol: float = 1e-8, max_iter: int = 200,
                       n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT,
                       mu_grid: Optional[GridField] = None) -> QCMap:
    """Principal solution ``F = w + C h`` with ``h = mu S h + mu`` by fixed point.

    Stops when the L2 change of ``h`` drops below ``tol`` relative to ``||mu||``.
    """
    m = mu_grid if mu_grid is not None else mu.on_grid(n, L)
    n, L = m.n, m.L
    if m.touches_boundary:
        raise ResolutionError("Beltrami coefficient support reaches the grid edge; enlarge the extent")
    mv = m.values
    k = float(np.max(np.abs(mv)))
    if k >= 1:
        raise InputError(f"degenerate coefficient on the grid (sup |mu| = {k})")
    if not np.any(mv):
        Z = grid_points(n, L)
        report = {"iterations": 0, "contraction": 0.0, "k": 0.0, "beltrami_residual_l2": 0.0,
                  "history": NeumannHistory(0, (), ())}
        return QCMap(Z, np.ones_like(Z), np.zeros_like(Z), L,
                     normalization={"infinity": "F(w) = w"}, report=report)
    norm_mu = float(np.linalg.norm(mv))
    h = mv.copy()
    diffs, ratios = [], []
    converged = False
    for it in range(1, max_iter + 1):
        Sh = beurling_transform(GridField(h, L)).values
        h_new = mv * Sh + mv
        d = float(np.linalg.norm(h_new - h)) / norm_mu
        if diffs:
            ratios.append(d / diffs[-1] if diffs[-1] > 0 else 0.0)
            if len(ratios) >= 3 and min(ratios[-3:]) >= 1.0:
                raise ResolutionError(f"Neumann iteration does not contract (ratio {ratios[-1]:.3f}); "
                                      "refine the grid")
        diffs.append(d)
        h = h_new
        if d <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"Neumann iteration not converged after {max_iter} steps "
                               f"(last change {diffs[-1]:.2e})")
    hf = GridField(h, L)
    Sh = beurling_transform(hf).values
    Ch = cauchy_transform(hf).values
    Z = grid_points(n, L)
    F = Z + Ch
    Fz = 1 + Sh
    res = float(np.linalg.norm(h - mv * Fz)) * (2 * L / n)
    hist = NeumannHistory(len(diffs), tuple(diffs), tuple(ratios))
    report = {"iterations": hist.iterations, "contraction": hist.max_ratio, "k": k,
              "beltrami_residual_l2": res, "history": hist}
    return QCMap(F, Fz, h, L, normalization={"infinity": "F(w) = w + O(1/w)"}, report=report)


def reflect_coefficient(nu: Callable, w) -> np.ndarray:
    """Inversion-symmetric extension: ``nu`` inside, ``conj(nu(1/conj(w))) w^2/conj(w)^2`` outside."""
    w = np.asarray(w, dtype=complex)
    out = np.zeros(w.shape, dtype=complex)
    inside = np.abs(w) < 1
    out[inside] = nu(w[inside])
    wo = w[~inside]
    out[~inside] = np.conj(nu(1.0 / np.conj(wo))) * wo ** 2 / np.conj(wo) ** 2
    return out


def _fit_circle(pts: np.ndarray):
    """Algebraic least-squares circle through points: centre, radius."""
    x, y = pts.real, pts.imag
    A = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    cx, cy, c = np.linalg.lstsq(A, b, rcond=None)[0]
    cx, cy = cx / 2, cy / 2
    return complex(cx, cy), float(math.sqrt(c + cx * cx + cy * cy))


def _moebius(b: complex):
    bc = np.conj(b)
    return (lambda z: (z - b) / (1 - bc * z)), (lambda z: (1 - abs(b) ** 2) / (1 - bc * z) ** 2)


def disk_normalized_qc(nu: BeltramiCoefficient, n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT,
                       tol: float = 1e-8, max_iter: int = 200, samples: int = 2048) -> QCMap:
    """Quasiconformal self-map ``G`` of the disk with dilatation ``nu``, ``G(0) = 0``, ``G(1) = 1``.

    ``nu`` is extended by reflection in the circle (zero beyond radius ``L``),
    the principal solution is fitted to a circle and normalized by an affine
    map, a disk automorphism and a rotation.  If the image of the circle still
    deviates by more than ``1e-3`` (tail of the truncated extension), a
    conformal map of the image domain onto the disk is composed instead.
    """
    h = 2 * L / n
    Z = grid_points(n, L)
    ext = reflect_coefficient(nu, Z)
    ext[np.abs(Z) >= L - 2 * h] = 0.0
    F = principal_solution(nu, tol, max_iter, mu_grid=GridField(ext, L))
    tau = 2 * np.pi * np.arange(samples) / samples
    circ = np.exp(1j * tau)
    img = F.raw(circ)
    c, R = _fit_circle(img)
    aff = (lambda z: (z - c) / R)
    b = complex(aff(F.raw(np.array([0j])))[0])
    mob, mob_d = _moebius(b)
    one = complex(mob(aff(F.raw(np.array([1 + 0j]))))[0])
    rot = np.conj(one) / abs(one)

    def post(z):
        return rot * mob(aff(z))

    def post_d(z):
        return rot * mob_d(aff(z)) / R

    dev = float(np.max(np.abs(np.abs(post(img)) - 1)))
    norm = {"G(0)": 0, "G(1)": 1, "method": "reflection", "raw_circle_deviation": dev}
    if dev > CIRCLE_TOL:
        post, post_d = _conformal_correction(aff, F.raw(np.array([0j]))[0], img, tau)
        norm["method"] = "reflection+conformal"
    G = QCMap(F.F, F.Fz, F.Fzbar, L, post, post_d, norm, dict(F.report), reflect_outside=True)
    final = float(np.max(np.abs(np.abs(G.forward(circ)) - 1)))
    G.normalization["circle_deviation"] = final
    G.normalization["G(0)"] = complex(G.forward(np.array([0j]))[0])
    if final > CIRCLE_TOL:
        raise ResolutionError(f"disk map deviates from the circle by {final:.2e}")
    return G


def _conformal_correction(aff, F0, img, tau):
    """Analytic map of the region bounded by ``aff(img)`` onto the disk, centre to 0, 1 -> 1."""
    from .conformal import riemann_map
    from .curves import starlike

    curve = aff(img)
    p = complex(aff(np.array([F0]))[0])
    ang = np.unwrap(np.angle(curve - p))
    if np.any(np.diff(ang) <= 0):
        raise ResolutionError("image of the circle is not starlike about the image of 0")
    rad = np.abs(curve - p)
    a0 = ang[0]
    th = np.concatenate([ang, [a0 + 2 * np.pi]])
    spl = CubicSpline(th, np.log(np.concatenate([rad, [rad[0]]])), bc_type="periodic")

    def radius(t):
        t = np.mod(np.asarray(t, dtype=float) - a0, 2 * np.pi) + a0
        return np.exp(spl(t))

    dom = starlike(radius, 1024, center=p, name="qc-image")
    psi = riemann_map(dom, "theodorsen")
    def on_boundary_or_inside(z):
        z = np.asarray(z, dtype=complex)
        rel = z - p
        r = np.abs(rel)
        rb = radius(np.angle(rel))
        out = np.empty(z.shape, dtype=complex)
        edge = r >= rb * (1 - 1e-9)
        if np.any(~edge):
            out[~edge] = psi.forward(z[~edge])
        if np.any(edge):
            s = np.mod(np.angle(rel[edge]) / (2 * np.pi), 1.0)
            out[edge] = np.exp(2j * np.pi * psi.boundary_map(s))
        return out

    w1 = complex(on_boundary_or_inside(aff(img[:1]))[0])
    rot = np.conj(w1) / abs(w1)

    def post(z):
        return rot * on_boundary_or_inside(aff(z))

    def post_d(z):
        return rot * psi.derivative(aff(z)) * (aff(1.0) - aff(0.0))

    return post, post_d


def boundary_correspondence(G: QCMap, samples: int = 8192):
    """``(tau, psi)``: circle angles and unwrapped image angles ``arg G(e^{i tau})``."""
    tau = 2 * np.pi * np.arange(samples) / samples
    psi = np.unwrap(np.angle(G.forward(np.exp(1j * tau))))
    if np.any(np.diff(psi) <= 0):
        raise ResolutionError("boundary map of the disk map is not monotone")
    return tau, psi


def pushforward_coefficient(mu: BeltramiCoefficient, g) -> BeltramiCoefficient:
    """Coefficient on the disk of ``f o g^{-1}``: ``(mu g'/conj(g')) o g^{-1}``."""
    def nu(w):
        w = np.asarray(w, dtype=complex)
        z = g.inverse(w)
        d = 1.0 / g.inverse_derivative(w)
        return mu(z) * d / np.conj(d)

    return BeltramiCoefficient(nu, mu.k, None, f"pushforward of {mu.description}")


# --------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True, eq=False)
class RegularSolution:
    """``f = A o h`` with ``h = G o g``: ``g`` conformal onto the disk, ``G`` the
    normalized quasiconformal self-map of the disk, ``A`` the disk Hilbert solution."""

    domain: object
    mu: BeltramiCoefficient
    g: object
    G: QCMap
    hilbert: object
    report: dict
    h_star: Optional[Callable] = field(default=None, repr=False)

    def boundary_param(self, s):
        """Disk-side parameter of the boundary point with curve parameter ``s``."""
        return self.h_star(s)

    def h(self, z):
        return self.G.forward(self.g.forward(np.asarray(z, dtype=complex)))

    def f(self, z):
        return self.hilbert.f(self.h(z))

    __call__ = f

    def h_derivatives(self, z):
        z = np.asarray(z, dtype=complex)
        w = self.g.forward(z)
        d = self.g.derivative(z)
        Gz, Gzb = self.G.derivatives(w)
        return Gz * d, Gzb * np.conj(d)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - tag and re-raise
        raise StageError(name, exc) from exc


def inward_normals(curve, s) -> np.ndarray:
    """Unit inward normals of a counterclockwise curve from central differences."""
    s = np.asarray(s, dtype=float)
    d = 1e-6
    t = curve.point(s + d) - curve.point(s - d)
    return 1j * t / np.abs(t)


def interior_samples(domain, count: int = 48, margin: float = 0.1) -> np.ndarray:
    """Grid points of the domain at least ``margin * diameter`` from the boundary."""
    x0, x1, y0, y1 = domain.bbox
    xs = np.linspace(x0, x1, count)
    ys = np.linspace(y0, y1, count)
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    Z = Z[domain.contains(Z)]
    if Z.size == 0:
        return Z
    return Z[domain.boundary_distance(Z) > margin * domain.diameter]


def beltrami_residual(f: Callable, mu: Callable, z, step: float):
    """``(max |f_zbar - mu f_z|, max |f_z|)`` by centred differences."""
    z = np.asarray(z, dtype=complex)
    fx = (f(z + step) - f(z - step)) / (2 * step)
    fy = (f(z + 1j * step) - f(z - 1j * step)) / (2 * step)
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    r = np.abs(fzb - mu(z) * fz)
    return float(np.max(r)) if r.size else 0.0, float(np.max(np.abs(fz))) if r.size else 0.0


def transport_boundary_data(G: QCMap, g, lam, phi, M: int):
    """Data on the disk nodes ``psi_j = 2 pi j / M`` pulled back through ``h_* = G_* o g_*``.

    Returns ``(Lambda, Phi, exceptional disk params, h_* as a function of s)``.
    """
    from .boundary import BoundaryFunction

    tau, psi = boundary_correspondence(G)
    psi = psi - psi[0]
    tau_ext = np.concatenate([tau, [2 * np.pi]])
    psi_ext = np.concatenate([psi, [2 * np.pi]])
    nodes = np.arange(M) / M
    t_nodes = np.interp(2 * np.pi * nodes, psi_ext, tau_ext)
    s_nodes = g.boundary_inverse(t_nodes / (2 * np.pi))

    def h_star(s):
        t = 2 * np.pi * g.boundary_map(np.asarray(s, dtype=float))
        return np.mod(np.interp(t, tau_ext, psi_ext) / (2 * np.pi), 1.0)

    exc_s = tuple(lam.partition.exceptional) + tuple(phi.exceptional)
    exc = tuple(sorted(set(float(x) for x in h_star(np.array(exc_s))))) if exc_s else ()
    Lam = BoundaryFunction(nodes, lam.base.at(s_nodes), None, None, exc)
    Phi = BoundaryFunction(nodes, np.asarray(phi.at(s_nodes)).real, None, None, exc)
    return Lam, Phi, exc, h_star


def assemble_regular_solution(domain, mu: BeltramiCoefficient, lam, phi, g=None,
                              N: int = 1024, n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT,
                              tol: float = 1e-8, aperture: float = math.pi / 3, radii=None,
                              check_nodes: int = 512) -> RegularSolution:
    """Regular solution of ``f_zbar = mu f_z`` in ``domain`` with ``Re(conj(lambda) f) -> phi``.

    ``lam`` is a CBVFunction on the domain boundary, ``phi`` a BoundaryFunction.
    The report carries the finite-difference Beltrami residual on interior
    samples and the boundary residual of cone limits at non-exceptional nodes.
    """
    from .boundary import ArcPartition, certify_cbv
    from .conformal import riemann_map
    from .disk import DEFAULT_RADII, EXCLUSION_BAND, cone_limits, solve_hilbert_disk

    radii = DEFAULT_RADII if radii is None else radii
    if g is None:
        circle_like = np.max(np.abs(np.abs(domain.boundary.samples - domain.z0) - 1)) < 1e-9
        g = _stage("conformal", riemann_map, domain,
                   "moebius" if circle_like else "theodorsen", a=domain.z0)
    nu = _stage("pushforward", pushforward_coefficient, mu, g)
    G = _stage("disk-map", disk_normalized_qc, nu, n, L, tol)
    M = 4 * N
    Lam, Phi, exc, h_star = _stage("transport", transport_boundary_data, G, g, lam, phi, M)
    part = ArcPartition.from_breakpoints(exc) if exc else ArcPartition.full()
    Lam = Lam if exc else Lam.with_values(Lam.values, exceptional=part.exceptional)
    lam_disk = _stage("certify", certify_cbv, Lam, part)
    hil = _stage("hilbert", solve_hilbert_disk, lam_disk, Phi, N, 1e-6, aperture, radii)
    sol = RegularSolution(domain, mu, g, G, hil, {}, h_star)

    # interior Beltrami residual
    step = DERIV_STEPS * 2 * L / n
    pts = interior_samples(domain)
    res, fz = beltrami_residual(sol.f, mu, pts, step)

    # boundary residual along cones
    s = np.arange(check_nodes) / check_nodes
    zeta = domain.boundary.point(s)
    normals = inward_normals(domain.boundary, s)
    lim, spread, drift = cone_limits(sol.f, zeta, normals, aperture, radii)
    bres = np.abs((np.conj(lam.base.at(s)) * lim).real - np.asarray(phi.at(s)).real)
    disk_s = h_star(s)
    excluded = np.zeros(check_nodes, dtype=bool)
    for e in exc:
        excluded |= np.abs(np.mod(disk_s - e + 0.5, 1.0) - 0.5) <= EXCLUSION_BAND / N
    checked = bres[~excluded]
    report = {
        "beltrami_residual": res,
        "fz_sup": fz,
        "beltrami_relative": res / fz if fz > 0 else res,
        "boundary_residual": float(np.max(checked)) if checked.size else 0.0,
        "boundary_nodes": int(check_nodes),
        "excluded_nodes": int(excluded.sum()),
        "interior_samples": int(pts.size),
        "disk_hilbert_residual": hil.report.max_residual,
        "neumann_iterations": G.report["iterations"],
        "contraction": G.report["contraction"],
        "normalization": G.normalization.get("method"),
        "circle_deviation": G.normalization.get("circle_deviation"),
        "exceptional_params": [float(e) for e in exc],
    }
    return RegularSolution(domain, mu, g, G, hil, report, h_star)


def stoilow_report(f: Callable, A: Callable, h: Callable, points, jacobian: Optional[Callable] = None,
                   tol: float = 1e-9) -> dict:
    """Check ``f = A o h`` on sample points and positivity of the Jacobian of ``h``."""
    pts = np.asarray(points, dtype=complex)
    mismatch = float(np.max(np.abs(f(pts) - A(h(pts))))) if pts.size else 0.0
    out = {"max_mismatch": mismatch, "consistent": mismatch <= tol}
    if jacobian is not None:
        J = np.asarray(jacobian(pts), dtype=float)
        out["min_jacobian"] = float(np.min(J)) if J.size else 0.0
        out["local_homeomorphism"] = bool(np.all(J > 0))
    return out


def solution_jacobian(sol: RegularSolution) -> Callable:
    def J(z):
        a, b = sol.h_derivatives(z)
        return np.abs(a) ** 2 - np.abs(b) ** 2

    return J
