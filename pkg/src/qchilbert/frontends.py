"""Dirichlet, directional-derivative, Neumann and Poincare problems, and the
correspondence between Beltrami coefficients and unit-determinant elliptic matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .beltrami import (DEFAULT_EXTENT, DEFAULT_GRID, BeltramiCoefficient, assemble_regular_solution,
                       inward_normals, interior_samples, principal_solution)
from .boundary import ArcPartition, BoundaryFunction, CBVFunction, certify_cbv
from .conformal import ConformalMap, riemann_map
from .curves import PlanarDomain
from .disk import (DEFAULT_APERTURE, DEFAULT_MODES, DEFAULT_RADII, EXCLUSION_BAND, NODE_FACTOR,
                   AnalyticDiskFunction, HilbertSolution, antiderivative, cone_limits,
                   null_family, solve_hilbert_disk)
from .errors import DomainError, InputError, ResolutionError, UnsupportedError

TABLE_TOL = 1e-4
TABLE_PASS_FRACTION = 0.99
EXTENSION_MARGIN = 0.25
FD_RATIO = 0.25
MAX_MODES = 8192

ScalarField = Callable[[np.ndarray], np.ndarray]


def _field(value) -> ScalarField:
    if callable(value):
        return value
    c = value

    def const(z):
        return np.full(np.shape(z), c, dtype=np.result_type(c, float))

    return const


def _probe_points(domain: Optional[PlanarDomain], count: int = 24) -> np.ndarray:
    if domain is None:
        r = np.linspace(0, 0.99, count)
        t = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return (r[:, None] * np.exp(1j * t[None, :])).ravel()
    pts = interior_samples(domain, count, margin=0.0)
    return np.concatenate([pts, domain.boundary.samples])


# --------------------------------------------------------------------------
# mu <-> A dictionary


@dataclass(frozen=True, eq=False)
class EllipticMatrix:
    """Symmetric matrix field ``[[a11, a12], [a21, a22]]`` with unit determinant."""

    a11: ScalarField
    a12: ScalarField
    a21: ScalarField
    a22: ScalarField
    symmetric: bool = True
    unit_determinant: bool = True
    ellipticity: float = 0.0

    @classmethod
    def constant(cls, a11, a12, a22, probe=None) -> "EllipticMatrix":
        return cls.from_fields(a11, a12, a12, a22, probe)

    @classmethod
    def from_fields(cls, a11, a12, a21, a22, probe=None) -> "EllipticMatrix":
        """Validate symmetry, ``det = 1`` and uniform ellipticity on probe points."""
        f = [_field(a) for a in (a11, a12, a21, a22)]
        z = _probe_points(None) if probe is None else np.asarray(probe, dtype=complex)
        v = [np.asarray(g(z), dtype=float) for g in f]
        if np.max(np.abs(v[1] - v[2])) > 1e-12:
            raise InputError("matrix field is not symmetric")
        det = v[0] * v[3] - v[1] * v[2]
        if np.max(np.abs(det - 1)) > 1e-9:
            raise InputError(f"matrix determinant deviates from 1 by {np.max(np.abs(det - 1)):.2e}")
        lam_min = 0.5 * (v[0] + v[3]) - np.sqrt(0.25 * (v[0] - v[3]) ** 2 + v[1] ** 2)
        eps = float(np.min(lam_min))
        if eps <= 0:
            raise InputError("matrix field is not uniformly elliptic")
        return cls(*f, True, True, eps)

    def at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        a = [np.broadcast_to(np.asarray(g(z), dtype=float), z.shape) for g in
             (self.a11, self.a12, self.a21, self.a22)]
        return np.stack([np.stack(a[:2], -1), np.stack(a[2:], -1)], -2)

    def apply(self, z, gx, gy):
        """``A(z) (gx, gy)``."""
        M = self.at(z)
        return M[..., 0, 0] * gx + M[..., 0, 1] * gy, M[..., 1, 0] * gx + M[..., 1, 1] * gy


def _mu_field(mu) -> ScalarField:
    if isinstance(mu, BeltramiCoefficient):
        return mu
    return _field(complex(mu)) if not callable(mu) else mu


def matrix_from_mu(mu, probe=None) -> EllipticMatrix:
    """Unit-determinant matrix whose A-harmonic functions are real parts of solutions of
    ``f_zbar = mu f_z``."""
    m = _mu_field(mu)
    z = _probe_points(None) if probe is None else np.asarray(probe, dtype=complex)
    if np.max(np.abs(np.broadcast_to(m(z), z.shape))) >= 1:
        raise DomainError("|mu| >= 1: the matrix degenerates")

    def d(z):
        return 1 - np.abs(m(z)) ** 2

    return EllipticMatrix.from_fields(
        lambda z: np.abs(1 - m(z)) ** 2 / d(z),
        lambda z: -2 * np.imag(m(z)) / d(z),
        lambda z: -2 * np.imag(m(z)) / d(z),
        lambda z: np.abs(1 + m(z)) ** 2 / d(z),
        z)


def mu_from_matrix(A: EllipticMatrix) -> ScalarField:
    """``mu = (a22 - a11 - 2i a21) / (1 + tr A + det A)`` as a field."""
    if not (A.symmetric and A.unit_determinant and A.ellipticity > 0):
        raise InputError("matrix must be symmetric, unimodular and uniformly elliptic")

    def mu(z):
        a11, a21, a22 = A.a11(z), A.a21(z), A.a22(z)
        det = a11 * a22 - A.a12(z) * a21
        return (a22 - a11 - 2j * a21) / (1 + a11 + a22 + det)

    return mu


def mu_value(A: EllipticMatrix, z=0j) -> complex:
    return complex(np.asarray(mu_from_matrix(A)(np.asarray(z, dtype=complex))).ravel()[0])


def dilatation_bound(mu):
    """``K = (1 + |mu|) / (1 - |mu|)``: a scalar for scalar input, else a field."""
    if not callable(mu):
        k = abs(complex(mu))
        if k >= 1:
            raise DomainError("|mu| >= 1")
        return (1 + k) / (1 - k)
    m = _mu_field(mu)
    return lambda z: (1 + np.abs(m(z))) / (1 - np.abs(m(z)))


# --------------------------------------------------------------------------
# problem and solution records


@dataclass(frozen=True, eq=False)
class PoincareProblemSpec:
    """``a u + b du/dnu = phi`` on the boundary; ``kind`` names the special case."""

    domain: PlanarDomain
    phi: BoundaryFunction
    kind: str = "poincare"
    nu: Optional[CBVFunction] = None
    a: Optional[BoundaryFunction] = None
    b: Optional[BoundaryFunction] = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "directional", "neumann", "poincare"):
            raise InputError(f"unknown problem kind {self.kind!r}")
        if self.kind in ("directional", "poincare") and self.nu is None:
            raise InputError(f"{self.kind} problem needs a direction field")
        if self.nu is not None:
            v = self.nu.base.values
            ok = np.isfinite(v)
            if np.max(np.abs(np.abs(v[ok]) - 1)) > 1e-6:
                raise InputError("direction field must be unimodular")


@dataclass(frozen=True)
class LimitTable:
    """Per-node limits and residuals; exceptional nodes are listed, not checked."""

    name: str
    params: np.ndarray
    limits: np.ndarray
    residuals: np.ndarray
    exceptional: np.ndarray
    tol: float
    converged: Optional[np.ndarray] = None

    @property
    def checked(self) -> np.ndarray:
        mask = np.ones(self.params.size, dtype=bool)
        mask[self.exceptional.astype(int)] = False
        return mask

    @property
    def pass_fraction(self) -> float:
        ok = self.residuals <= self.tol
        if self.converged is not None:
            ok &= self.converged
        c = self.checked
        return float(np.mean(ok[c])) if c.any() else 1.0

    @property
    def max_residual(self) -> float:
        r = self.residuals[self.checked]
        return float(np.max(r)) if r.size else 0.0

    @property
    def passed(self) -> bool:
        return self.pass_fraction >= TABLE_PASS_FRACTION

    def to_json(self) -> dict:
        return {"name": self.name, "nodes": int(self.params.size),
                "exceptional": [float(self.params[i]) for i in self.exceptional.astype(int)],
                "max_residual": self.max_residual, "pass_fraction": self.pass_fraction,
                "tol": self.tol, "passed": self.passed}


@dataclass(frozen=True, eq=False)
class SolutionField:
    """``u`` with its interior grid samples, limit tables and the analytic factors behind it."""

    u: Callable
    grid: np.ndarray
    values: np.ndarray
    tables: tuple
    provenance: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.u(z)

    def table(self, name: str) -> LimitTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tables)

    def to_json(self) -> dict:
        return {"tables": [t.to_json() for t in self.tables], "report": self.report,
                "passed": self.passed}


# --------------------------------------------------------------------------
# analytic solutions on a domain through its disk map


def default_map(domain: PlanarDomain) -> ConformalMap:
    z = domain.boundary.samples
    if np.max(np.abs(np.abs(z) - 1)) < 1e-9:
        return riemann_map(domain, "identity" if domain.z0 == 0 else "moebius", a=domain.z0)
    if domain.radial is None:
        raise UnsupportedError("domain is not starlike and no conformal map was supplied")
    return riemann_map(domain, "theodorsen")


def pull_to_disk(g: ConformalMap, fn: BoundaryFunction, M: int, extra_exceptional=()) -> BoundaryFunction:
    """Values of a boundary function of the domain at the disk nodes ``p_j = j / M``."""
    p = np.arange(M) / M
    s = g.boundary_inverse(p)
    exc = tuple(fn.exceptional) + tuple(extra_exceptional)
    exc_p = tuple(float(x) for x in np.atleast_1d(g.boundary_map(np.array(exc)))) if exc else ()
    vals = np.asarray(fn.at(s))
    if fn.source is None and np.iscomplexobj(vals) and np.allclose(np.abs(fn.values), 1.0):
        # chords between unit samples leave the circle; project back
        m = np.abs(vals)
        vals = np.where(m > 0, vals / np.where(m > 0, m, 1.0), vals)
    return BoundaryFunction(p, vals, None, None, exc_p)


def _disk_partition(exc) -> ArcPartition:
    return ArcPartition.from_breakpoints(sorted(set(exc))) if exc else ArcPartition.full()


@dataclass(frozen=True, eq=False)
class AnalyticOnDomain:
    """``F = F_disk o g`` for an analytic function given on the disk."""

    g: ConformalMap
    disk: AnalyticDiskFunction

    def __call__(self, z):
        return self.disk(self.g.forward(np.asarray(z, dtype=complex)))


def _dz_series(g: ConformalMap) -> Optional[AnalyticDiskFunction]:
    if g.method == "identity":
        return None
    c = np.asarray(g.series, dtype=complex)
    return AnalyticDiskFunction.polynomial(c[1:] * np.arange(1, c.size))


def _solve_analytic(domain, g, lam: BoundaryFunction, phi: BoundaryFunction, N, radii, aperture,
                    max_modes: int = MAX_MODES):
    """Hilbert problem on the domain via the disk map; returns ``(disk solution, exceptional)``.

    ``N`` doubles while the truncated ``exp(i g)`` is under-resolved.
    """
    while True:
        M = NODE_FACTOR * N
        lam_d = pull_to_disk(g, lam, M)
        phi_d = pull_to_disk(g, phi, M)
        exc = tuple(sorted(set(lam_d.exceptional) | set(phi_d.exceptional)))
        part = _disk_partition(exc)
        lam_d = lam_d.with_values(lam_d.values, exceptional=part.exceptional)
        try:
            hil = solve_hilbert_disk(certify_cbv(lam_d, part), phi_d, N, 1e-6, aperture, radii)
        except ResolutionError:
            if 2 * N > max_modes:
                raise
            N *= 2
            continue
        return least_norm_member(hil), exc


def least_norm_member(hil: HilbertSolution) -> HilbertSolution:
    """Replace ``f`` by the member ``f + i c A`` of least Taylor-coefficient norm.

    The boundary data do not determine ``c``; when ``A`` is unbounded this picks
    the bounded solution if there is one.
    """
    a, f = hil.A.taylor, hil.f.taylor
    n = min(a.size, f.size)
    c = -float(np.real(np.vdot(1j * a[:n], f[:n]))) / float(np.vdot(a, a).real)
    if c == 0.0:
        return hil
    return replace(hil, f=null_family(hil, c), metadata=dict(hil.metadata, null_shift=c))


def _exceptional_nodes(g: ConformalMap, s: np.ndarray, exc_disk, N: int) -> np.ndarray:
    p = g.boundary_map(s)
    mask = np.zeros(s.size, dtype=bool)
    for e in exc_disk:
        mask |= np.abs(np.mod(p - e + 0.5, 1.0) - 0.5) <= EXCLUSION_BAND / N + 1e-12
    return np.nonzero(mask)[0]


def directional_difference(u: Callable, zetas, directions, ratio: float = FD_RATIO) -> Callable:
    """Central difference of ``u`` along ``directions`` at points approaching ``zetas``.

    The step is ``ratio`` times the distance to the boundary point, so the
    stencil stays inside the domain as the point approaches it.
    """
    zetas = np.asarray(zetas, dtype=complex)
    directions = np.asarray(directions, dtype=complex)

    def quotient(z):
        d = ratio * np.abs(z - zetas)
        return (u(z + d * directions) - u(z - d * directions)) / (2 * d)

    return quotient


def _limit_table(name, evaluate, zetas, normals, s, target, exceptional, tol, aperture, radii):
    lim, spread, drift = cone_limits(evaluate, zetas, normals, aperture, radii)
    lim = np.real(lim) if np.isrealobj(target) else lim
    res = np.abs(lim - target) if target is not None else np.maximum(spread, drift)
    conv = np.maximum(spread, drift) <= tol * np.maximum(1.0, np.abs(lim))
    return LimitTable(name, s, lim, res, np.asarray(exceptional, dtype=int), tol, conv)


def _interior_grid(domain: PlanarDomain, u: Callable, count: int = 64):
    pts = interior_samples(domain, count, margin=0.02)
    return pts, np.real(u(pts))


def _constant_data(phi: BoundaryFunction) -> bool:
    return bool(np.all(phi.values == 0))


def solve_directional(domain: PlanarDomain, nu: CBVFunction, phi: BoundaryFunction,
                      g: Optional[ConformalMap] = None, N: int = DEFAULT_MODES,
                      nodes: int = 512, tol: float = TABLE_TOL, aperture: float = DEFAULT_APERTURE,
                      radii=DEFAULT_RADII) -> SolutionField:
    """Harmonic ``u`` whose derivative along ``nu`` tends to ``phi`` nontangentially.

    Solves ``Re(nu f) = phi`` for analytic ``f``, takes ``F`` the antiderivative with
    ``F(z0) = 0`` and ``u = Re F``; then ``grad u = conj(f)``.
    """
    g = default_map(domain) if g is None else g
    lam = nu.base.with_values(np.conj(nu.base.values), exceptional=nu.partition.exceptional)
    lam = BoundaryFunction(lam.params, lam.values, nu.base.curve,
                           None if nu.base.source is None else (lambda s: np.conj(nu.base.source(s))),
                           nu.partition.exceptional)
    hil, exc = _solve_analytic(domain, g, lam, phi, N, radii, aperture)
    dz = _dz_series(g)
    integrand = hil.f if dz is None else hil.f * dz
    F_disk = antiderivative(integrand)
    f = AnalyticOnDomain(g, hil.f)
    F = AnalyticOnDomain(g, F_disk)

    def u(z):
        return np.real(F(z))

    s = np.arange(nodes) / nodes
    zetas = domain.boundary.point(s)
    normals = inward_normals(domain.boundary, s)
    directions = nu.base.at(s)
    N = hil.metadata["N"]
    ex = _exceptional_nodes(g, s, exc, N)
    target = np.real(phi.at(s))
    deriv = directional_difference(u, zetas, directions)
    t_dir = _limit_table("directional_derivative", deriv, zetas, normals, s, target, ex, tol,
                         aperture, radii)
    grid, vals = _interior_grid(domain, u)
    report = {"disk_hilbert_residual": hil.report.max_residual, "N": N,
              "exceptional_params": [float(x) for x in exc],
              "gradient_identity": gradient_identity_error(u, f, grid)}
    return SolutionField(u, grid, vals, (t_dir,), {"f": f, "F": F, "hilbert": hil}, report)


def gradient_identity_error(u: Callable, f: Callable, points, step: float = 1e-4) -> float:
    """``max |(u_x - i u_y) - f|`` with centred differences: ``grad u = conj(f)``."""
    z = np.asarray(points, dtype=complex)
    if z.size == 0:
        return 0.0
    ux = (u(z + step) - u(z - step)) / (2 * step)
    uy = (u(z + 1j * step) - u(z - 1j * step)) / (2 * step)
    return float(np.max(np.abs(ux - 1j * uy - f(z))))


def normal_field(domain: PlanarDomain, n: int = 4096) -> CBVFunction:
    """Interior unit normal of the boundary as a CBV direction field (cut at 0)."""
    curve = domain.boundary

    def source(s):
        return inward_normals(curve, s)

    base = BoundaryFunction(np.arange(n) / n, source(np.arange(n) / n), curve, source, (0.0,))
    return certify_cbv(base, ArcPartition.full())


def solve_neumann(domain: PlanarDomain, phi: BoundaryFunction, g: Optional[ConformalMap] = None,
                  N: int = DEFAULT_MODES, nodes: int = 512, tol: float = TABLE_TOL,
                  aperture: float = DEFAULT_APERTURE, radii=DEFAULT_RADII) -> SolutionField:
    """Directional problem along the interior normal, with three limit tables:
    the limit of ``u`` along the normal, the normal derivative, and the
    nontangential limit of the derivative along the normal direction."""
    nu = normal_field(domain)
    sol = solve_directional(domain, nu, phi, g, N, nodes, tol, aperture, radii)
    t_dir = sol.tables[0]
    s = t_dir.params
    zetas = domain.boundary.point(s)
    normals = inward_normals(domain.boundary, s)
    target = np.real(phi.at(s))
    ex = t_dir.exceptional
    t_u = _limit_table("normal_limit", sol.u, zetas, normals, s, None, ex, tol, 0.0, radii)
    deriv = directional_difference(sol.u, zetas, normals)
    t_n = _limit_table("normal_derivative", deriv, zetas, normals, s, target, ex, tol, 0.0, radii)
    t_a = LimitTable("angular_derivative", s, t_dir.limits, t_dir.residuals, ex, tol, t_dir.converged)
    report = dict(sol.report)
    report["flux"] = float(np.mean(target) * domain.boundary.length())
    return SolutionField(sol.u, sol.grid, sol.values, (t_u, t_n, t_a), sol.provenance, report)


def solve_dirichlet(domain: PlanarDomain, phi: BoundaryFunction, mu=None,
                    g: Optional[ConformalMap] = None, N: int = DEFAULT_MODES, n: int = DEFAULT_GRID,
                    L: float = DEFAULT_EXTENT, nodes: int = 512, tol: Optional[float] = None,
                    aperture: float = DEFAULT_APERTURE, radii=DEFAULT_RADII) -> SolutionField:
    """``u -> phi`` nontangentially: harmonic without ``mu``, else ``u = Re f`` for the
    Beltrami solution, which is A-harmonic for the matrix of ``mu``.

    The table tolerance defaults to 1e-4 without ``mu`` and 1e-2 with it."""
    if tol is None:
        tol = TABLE_TOL if mu is None else 1e-2
    one = BoundaryFunction(np.arange(4 * N) / (4 * N), np.ones(4 * N, dtype=complex), phi.curve,
                           lambda s: np.ones(np.shape(s), dtype=complex), (0.0,))
    s = np.arange(nodes) / nodes
    zetas = domain.boundary.point(s)
    normals = inward_normals(domain.boundary, s)
    target = np.real(phi.at(s))
    if mu is None:
        g = default_map(domain) if g is None else g
        hil, exc = _solve_analytic(domain, g, one, phi, N, radii, aperture)
        f = AnalyticOnDomain(g, hil.f)
        prov = {"f": f, "hilbert": hil}
        ex = _exceptional_nodes(g, s, exc, hil.metadata["N"])
        report = {"disk_hilbert_residual": hil.report.max_residual}
    else:
        mu = mu if isinstance(mu, BeltramiCoefficient) else BeltramiCoefficient.constant(complex(mu))
        lam = certify_cbv(one, ArcPartition.full())
        sol = assemble_regular_solution(domain, mu, lam, phi, g, N, n, L, aperture=aperture, radii=radii)
        f = sol.f
        prov = {"f": f, "regular": sol}
        report = dict(sol.report)
        ex = np.nonzero(_near(sol.boundary_param(s), sol.report["exceptional_params"],
                              EXCLUSION_BAND / N))[0]

    def u(z):
        return np.real(f(z))

    t = _limit_table("boundary_limit", u, zetas, normals, s, target, ex, tol, aperture, radii)
    grid, vals = _interior_grid(domain, u)
    if mu is not None:
        A = matrix_from_mu(mu, probe=grid)
        report["stencil_residual"] = stencil_residual(u, A, grid, 8 * 2 * L / n, domain)
    return SolutionField(u, grid, vals, (t,), prov, report)


def _near(s, exc, band):
    s = np.asarray(s, dtype=float)
    mask = np.zeros(s.size, dtype=bool)
    for e in exc:
        mask |= np.abs(np.mod(s - e + 0.5, 1.0) - 0.5) <= band + 1e-12
    return mask


def stencil_residual(u: Callable, A: EllipticMatrix, points, step: float,
                     domain: Optional[PlanarDomain] = None) -> float:
    """``max |div(A grad u)|`` from nested centred differences, relative to ``max |grad u|``.

    With ``domain`` given, points closer than the stencil reach to the boundary are dropped."""
    z = np.asarray(points, dtype=complex)
    if domain is not None and z.size:
        z = z[domain.boundary_distance(z) > 2.5 * step]
    if z.size == 0:
        return 0.0

    def grad(w):
        gx = (u(w + step) - u(w - step)) / (2 * step)
        gy = (u(w + 1j * step) - u(w - 1j * step)) / (2 * step)
        return gx, gy

    def flux(w):
        return A.apply(w, *grad(w))

    div = (flux(z + step)[0] - flux(z - step)[0] + flux(z + 1j * step)[1]
           - flux(z - 1j * step)[1]) / (2 * step)
    gx, gy = grad(z)
    g = np.hypot(gx, gy)
    return float(np.max(np.abs(div)) / max(float(np.max(g)), 1e-300))


def solve_poincare(spec: PoincareProblemSpec, **kw) -> SolutionField:
    """``a u + b du/dnu = phi`` for ``a = 0``: the directional problem with data ``phi / b``."""
    if spec.kind == "dirichlet":
        return solve_dirichlet(spec.domain, spec.phi, **kw)
    if spec.kind == "neumann":
        return solve_neumann(spec.domain, spec.phi, **kw)
    if spec.a is not None and np.any(np.abs(np.asarray(spec.a.values)) > 0):
        raise UnsupportedError("only a = 0 is supported")
    phi = spec.phi
    if spec.b is not None:
        s = phi.params
        b = np.real(spec.b.at(s))
        bad = np.abs(b) < 1e-12
        vals = np.where(bad, 0.0, np.real(phi.values) / np.where(bad, 1.0, b))
        phi = BoundaryFunction(s, vals, phi.curve, None,
                               tuple(phi.exceptional) + tuple(float(x) for x in s[bad]))
        if bad.any() and bad.mean() > 0.01:
            raise InputError("b vanishes on a set that is not negligible")
    return solve_directional(spec.domain, spec.nu, phi, **kw)


# --------------------------------------------------------------------------
# A-harmonic directional problem


def extend_coefficient(domain: PlanarDomain, mu: Callable, margin: Optional[float] = None) -> BeltramiCoefficient:
    """``mu`` inside, its nearest boundary value within ``margin`` outside, zero beyond;
    magnitudes are clipped at ``(1 + k) / 2``."""
    margin = EXTENSION_MARGIN * domain.diameter if margin is None else margin
    probe = np.concatenate([interior_samples(domain, 48, 0.0), domain.boundary.samples])
    k = float(np.max(np.abs(np.broadcast_to(mu(probe), probe.shape))))
    if k >= 1:
        raise DomainError("|mu| >= 1 on the domain")
    k_star = 0.5 * (1 + k)

    def ext(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        flat = z.ravel()
        res = out.ravel()
        inside = domain.contains(flat)
        if inside.any():
            res[inside] = np.broadcast_to(mu(flat[inside]), flat[inside].shape)
        rest = ~inside
        if rest.any():
            d, near = domain.boundary_distance(flat[rest], return_nearest=True)
            vals = np.where(d <= margin, np.broadcast_to(mu(near), near.shape), 0.0)
            res[rest] = vals
        m = np.abs(res)
        res = np.where(m > k_star, res * k_star / np.maximum(m, 1e-300), res)
        return res.reshape(z.shape)

    return BeltramiCoefficient(ext, k_star, None, "extension by nearest boundary value")


def image_domain(h: Callable, domain: PlanarDomain, samples: int = 4096, name: str = "image"):
    """``h(D)`` as a starlike domain about ``h(z0)``; also returns the angle of ``h(zeta(s))``."""
    from .curves import starlike

    s = np.arange(samples) / samples
    w = h(domain.boundary.point(s))
    c = complex(h(np.array([domain.z0]))[0])
    ang = np.unwrap(np.angle(w - c))
    step = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    if abs(ang[-1] - ang[0] + step[-1] - 2 * np.pi) > 1e-6 or np.any(step <= 0):
        raise UnsupportedError("image domain is not starlike; supply a conformal map")
    a0 = ang[0]
    t = np.mod(ang - a0, 2 * np.pi)
    order = np.argsort(t)
    t_sorted = np.concatenate([t[order], [t[order][0] + 2 * np.pi]])
    r_sorted = np.abs(w - c)[order]
    spl = CubicSpline(t_sorted, np.log(np.concatenate([r_sorted, r_sorted[:1]])), bc_type="periodic")

    def radius(th):
        return np.exp(spl(np.mod(np.asarray(th) - a0, 2 * np.pi)))

    dom = starlike(radius, samples, c, name)
    angle_of_s = np.mod((ang - np.angle(0j + 1)) / (2 * np.pi), 1.0)
    return dom, s, angle_of_s


def solve_a_harmonic_directional(domain: PlanarDomain, A: EllipticMatrix, nu: CBVFunction,
                                 phi: BoundaryFunction, g_image: Optional[ConformalMap] = None,
                                 N: int = DEFAULT_MODES, n: int = DEFAULT_GRID, L: float = DEFAULT_EXTENT,
                                 nodes: int = 512, tol: float = 5e-2,
                                 aperture: float = DEFAULT_APERTURE, radii=None) -> SolutionField:
    """A-harmonic ``u`` with ``<nu, grad u> -> phi`` by transport through a quasiconformal ``h``.

    ``h`` solves the Beltrami equation of the matrix, extended past the domain;
    on ``D* = h(D)`` the harmonic directional problem has direction
    ``h_nu / |h_nu|`` and data ``phi / |h_nu|``, where ``h_nu = h_z nu + h_zbar conj(nu)``
    is the derivative of ``h`` along ``nu``; then ``u = U o h``.
    """
    radii = tuple(1 - 2.0 ** -j for j in range(2, 8)) if radii is None else radii
    mu = mu_from_matrix(A)
    probe = np.concatenate([interior_samples(domain, 24, 0.0), domain.boundary.samples])
    if np.max(np.abs(np.broadcast_to(mu(probe), probe.shape))) < 1e-14:
        sol = solve_directional(domain, nu, phi, None, N, nodes, tol, aperture, radii)
        return SolutionField(sol.u, sol.grid, sol.values, sol.tables,
                             dict(sol.provenance, h=lambda z: np.asarray(z, dtype=complex)),
                             dict(sol.report, holder_class="not certified (sampled entries)"))
    ext = extend_coefficient(domain, mu)
    H = principal_solution(ext, n=n, L=L)
    h = H.forward
    dom_star, s_dense, ang = image_domain(h, domain)
    g_star = riemann_map(dom_star, "theodorsen") if g_image is None else g_image

    # transported direction and data on D*, indexed by the curve parameter of D*
    M = NODE_FACTOR * N
    zeta = domain.boundary.point(s_dense)
    v = nu.base.at(s_dense)
    hz, hzb = H.derivatives(zeta)
    h_nu = hz * v + hzb * np.conj(v)
    small = np.abs(h_nu) < 1e-10
    h_nu = np.where(small, 1.0, h_nu)
    order = np.argsort(ang)
    a_sorted = ang[order]
    star_params = np.arange(M) / M
    s_of_star = np.interp(star_params, np.concatenate([a_sorted - 1, a_sorted, a_sorted + 1]),
                          np.concatenate([s_dense[order] - 1, s_dense[order], s_dense[order] + 1]))
    s_of_star = np.mod(s_of_star, 1.0)
    zs = domain.boundary.point(s_of_star)
    hz, hzb = H.derivatives(zs)
    vv = nu.base.at(s_of_star)
    hn = hz * vv + hzb * np.conj(vv)
    bad_star = np.abs(hn) < 1e-10
    hn = np.where(bad_star, 1.0, hn)
    exc_s = tuple(nu.partition.exceptional) + tuple(phi.exceptional) + tuple(s_dense[small])
    exc_star = tuple(sorted(set(float(x) for x in np.interp(np.array(exc_s), s_dense, ang)))) if exc_s else ()
    exc_star = exc_star + tuple(float(x) for x in star_params[bad_star])
    dir_star = BoundaryFunction(star_params, hn / np.abs(hn), dom_star.boundary, None, exc_star)
    data_star = BoundaryFunction(star_params, np.real(phi.at(s_of_star)) / np.abs(hn),
                                 dom_star.boundary, None, exc_star)
    part = _disk_partition(exc_star)
    dir_star = dir_star.with_values(dir_star.values, exceptional=part.exceptional)
    nu_star = certify_cbv(dir_star, part)
    inner = solve_directional(dom_star, nu_star, data_star, g_star, N, nodes, 1.0, aperture)

    def u(z):
        return inner.u(h(np.asarray(z, dtype=complex)))

    s = np.arange(nodes) / nodes
    zetas = domain.boundary.point(s)
    normals = inward_normals(domain.boundary, s)
    directions = nu.base.at(s)
    target = np.real(phi.at(s))
    ex = np.nonzero(_near(np.interp(s, s_dense, ang), exc_star, EXCLUSION_BAND / inner.report["N"]))[0]
    deriv = directional_difference(u, zetas, directions)
    t = _limit_table("directional_derivative", deriv, zetas, normals, s, target, ex, tol, aperture, radii)
    grid, vals = _interior_grid(domain, u, 32)
    report = {"inner_table_max": inner.tables[0].max_residual,
              "neumann_iterations": H.report["iterations"], "contraction": H.report["contraction"],
              "k_star": ext.k, "holder_class": "not certified (sampled entries)",
              "stencil_residual": stencil_residual(u, A, grid, 8 * 2 * L / n, domain)}
    prov = {"h": h, "H": H, "image_domain": dom_star, "inner": inner}
    return SolutionField(u, grid, vals, (t,), prov, report)
