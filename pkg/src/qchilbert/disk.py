"""Harmonic and analytic functions on the unit disk.

Analytic functions are truncated Taylor series.  Boundary data with jump
discontinuities is handled by splitting off sawtooth functions whose Schwartz
integrals are logarithms; those pieces are evaluated in closed form while the
full Taylor coefficients are still kept for coefficient-level work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .boundary import (ArcPartition, ArgumentFunction, BoundaryFunction, CBVFunction,
                       argument_function, certify_cbv, one_sided_jumps)
from .capacity import fattened_capacity
from .errors import DomainError, InputError, ResolutionError

DEFAULT_MODES = 1024
NODE_FACTOR = 4
DEFAULT_RADII = tuple(1.0 - 2.0 ** -j for j in range(4, 15))
DEFAULT_APERTURE = math.pi / 3
EXCLUSION_BAND = 4
RICHARDSON_POINTS = 4


def _trunc(a: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1, dtype=complex)
    m = min(n + 1, a.size)
    out[:m] = a[:m]
    return out


def _cauchy(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Truncated Cauchy product, order ``n``."""
    if not np.any(a) or not np.any(b):
        return np.zeros(n + 1, dtype=complex)
    return _trunc(np.convolve(a[: n + 1], b[: n + 1]), n)


def _log_series(w: complex, q: complex, n: int) -> np.ndarray:
    """Taylor coefficients of ``w log(1 - q z)``."""
    k = np.arange(1, n + 1)
    out = np.zeros(n + 1, dtype=complex)
    out[1:] = -w * q ** k / k
    return out


def _power_series(p: float, q: complex, n: int) -> np.ndarray:
    """Taylor coefficients of ``(1 - q z)^p``."""
    out = np.zeros(n + 1, dtype=complex)
    out[0] = 1.0
    for k in range(1, n + 1):
        out[k] = out[k - 1] * (k - 1 - p) / k * q
    return out


def exp_series(g: np.ndarray, n: int) -> np.ndarray:
    """Coefficients of ``exp(g)`` from ``A' = g' A``: ``k A_k = sum_j j g_j A_{k-j}``."""
    g = _trunc(g, n)
    A = np.zeros(n + 1, dtype=complex)
    A[0] = np.exp(g[0])
    jg = np.arange(n + 1) * g
    for k in range(1, n + 1):
        A[k] = np.dot(jg[1: k + 1], A[k - 1:: -1][:k]) / k
    return A


@dataclass(frozen=True, eq=False)
class AnalyticDiskFunction:
    """``f(z) = P(z) * prod (1 - q z)^p + sum w log(1 - q z)``.

    ``taylor`` always holds the full truncated Taylor coefficients ``a_0..a_N``.
    ``smooth`` is the polynomial ``P``; ``power_terms`` holds ``(p, q)`` and
    ``log_terms`` holds ``(w, q)``.  Without singular terms ``P`` equals the
    Taylor polynomial.
    """

    taylor: np.ndarray
    smooth: Optional[np.ndarray] = None
    log_terms: tuple = ()
    power_terms: tuple = ()

    def __post_init__(self):
        a = np.asarray(self.taylor, dtype=complex).ravel()
        object.__setattr__(self, "taylor", a)
        if self.smooth is None:
            object.__setattr__(self, "smooth", a)
        else:
            object.__setattr__(self, "smooth", _trunc(np.asarray(self.smooth, dtype=complex), a.size - 1))

    @classmethod
    def structured(cls, smooth, log_terms=(), power_terms=()) -> "AnalyticDiskFunction":
        P = np.asarray(smooth, dtype=complex)
        n = P.size - 1
        full = P
        for p, q in power_terms:
            full = _cauchy(full, _power_series(p, q, n), n)
        for w, q in log_terms:
            full = full + _log_series(w, q, n)
        return cls(full, P, tuple(log_terms), tuple(power_terms))

    @classmethod
    def polynomial(cls, coeffs, n: Optional[int] = None) -> "AnalyticDiskFunction":
        c = np.asarray(coeffs, dtype=complex)
        return cls(_trunc(c, (c.size - 1) if n is None else n))

    @classmethod
    def constant(cls, c, n: int) -> "AnalyticDiskFunction":
        return cls.polynomial([c], n)

    @property
    def N(self) -> int:
        return self.taylor.size - 1

    @property
    def is_plain(self) -> bool:
        return not self.log_terms and not self.power_terms

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = npoly.polyval(z, self.smooth)
        for p, q in self.power_terms:
            out = out * np.exp(p * np.log(1 - q * z))
        for w, q in self.log_terms:
            out = out + w * np.log(1 - q * z)
        return out

    def deriv(self, z):
        """Evaluate ``f'`` from the structured form."""
        z = np.asarray(z, dtype=complex)
        P = npoly.polyval(z, self.smooth)
        dP = npoly.polyval(z, npoly.polyder(self.smooth)) if self.N > 0 else np.zeros_like(z)
        fac = np.ones_like(z)
        dlog = np.zeros_like(z)
        for p, q in self.power_terms:
            fac = fac * np.exp(p * np.log(1 - q * z))
            dlog = dlog - p * q / (1 - q * z)
        out = (dP + P * dlog) * fac
        for w, q in self.log_terms:
            out = out - w * q / (1 - q * z)
        return out

    def derivative(self) -> "AnalyticDiskFunction":
        """Coefficient shift ``(k+1) a_{k+1}``; order drops by one."""
        k = np.arange(1, self.N + 1)
        return AnalyticDiskFunction(k * self.taylor[1:] if self.N else np.zeros(1))

    def antiderivative(self) -> "AnalyticDiskFunction":
        return antiderivative(self)

    def _same_singular(self, other) -> bool:
        return self.power_terms == other.power_terms

    def __add__(self, other):
        if not isinstance(other, AnalyticDiskFunction):
            other = AnalyticDiskFunction.constant(complex(other), self.N)
        n = max(self.N, other.N)
        full = _trunc(self.taylor, n) + _trunc(other.taylor, n)
        if self._same_singular(other):
            return AnalyticDiskFunction(full, _trunc(self.smooth, n) + _trunc(other.smooth, n),
                                        self.log_terms + other.log_terms, self.power_terms)
        if not self.power_terms and not np.any(self.smooth):
            return AnalyticDiskFunction(full, _trunc(other.smooth, n),
                                        self.log_terms + other.log_terms, other.power_terms)
        if not other.power_terms and not np.any(other.smooth):
            return AnalyticDiskFunction(full, _trunc(self.smooth, n),
                                        self.log_terms + other.log_terms, self.power_terms)
        return AnalyticDiskFunction(full)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, AnalyticDiskFunction) else -complex(other))

    def scale(self, c: complex) -> "AnalyticDiskFunction":
        c = complex(c)
        return AnalyticDiskFunction(c * self.taylor, c * self.smooth,
                                    tuple((c * w, q) for w, q in self.log_terms), self.power_terms)

    def __mul__(self, other):
        if not isinstance(other, AnalyticDiskFunction):
            return self.scale(other)
        n = min(self.N, other.N)
        full = _cauchy(self.taylor, other.taylor, n)
        if self.log_terms or other.log_terms:
            return AnalyticDiskFunction(full)
        return AnalyticDiskFunction(full, _cauchy(self.smooth, other.smooth, n), (),
                                    self.power_terms + other.power_terms)

    __rmul__ = __mul__

    def exp_i(self) -> "AnalyticDiskFunction":
        """``exp(i f)``; logarithmic terms become power factors."""
        if self.power_terms:
            return AnalyticDiskFunction(exp_series(1j * self.taylor, self.N))
        P = exp_series(1j * self.smooth, self.N)
        powers = tuple((1j * w, q) for w, q in self.log_terms)
        if any(abs(p.imag) > 1e-12 for p, _ in powers):
            return AnalyticDiskFunction(exp_series(1j * self.taylor, self.N))
        return AnalyticDiskFunction.structured(P, (), tuple((float(p.real), q) for p, q in powers))

    def to_json(self) -> dict:
        return {"N": self.N,
                "taylor": [[float(a.real), float(a.imag)] for a in self.taylor],
                "log_terms": [[[w.real, w.imag], [q.real, q.imag]] for w, q in self.log_terms],
                "power_terms": [[p, [q.real, q.imag]] for p, q in self.power_terms]}


def antiderivative(f: AnalyticDiskFunction) -> AnalyticDiskFunction:
    """``F`` with ``F' = f`` and ``F(0) = 0``: ``b_{k+1} = a_k / (k+1)``."""
    b = np.zeros(f.N + 2, dtype=complex)
    b[1:] = f.taylor / np.arange(1, f.N + 2)
    return AnalyticDiskFunction(b)


# --------------------------------------------------------------------------
# Fourier data


@dataclass(frozen=True, eq=False)
class FourierBoundaryData:
    """Coefficients ``c_k``, ``|k| <= N`` (``coeffs[k + N]``).

    ``jumps`` lists ``(t, J)``: boundary angle and jump size of sawtooth parts
    split off before quadrature; ``smooth`` are the coefficients of the rest.
    """

    coeffs: np.ndarray
    real_flag: bool
    smooth: np.ndarray
    jumps: tuple = ()

    @property
    def N(self) -> int:
        return (self.coeffs.size - 1) // 2

    def c(self, k: int) -> complex:
        return complex(self.coeffs[k + self.N])


def _jump_coeffs(jumps, N: int) -> np.ndarray:
    k = np.arange(-N, N + 1)
    out = np.zeros(2 * N + 1, dtype=complex)
    nz = k != 0
    for t, J in jumps:
        out[nz] += J * np.exp(-1j * k[nz] * t) / (2j * np.pi * k[nz])
    return out


def sawtooth(t):
    """``(pi - t) / 2 pi`` on ``(0, 2 pi)``, periodic, 0 at the jump."""
    u = np.mod(np.asarray(t, dtype=float), 2 * np.pi)
    return np.where(u == 0, 0.0, (np.pi - u) / (2 * np.pi))


def _patch_nodes(values: np.ndarray, bad: np.ndarray) -> np.ndarray:
    """Replace flagged samples of a continuous periodic sequence by cubic interpolation."""
    v = values.copy()
    M = v.size
    for j in np.nonzero(bad)[0]:
        nb = [(j + d) % M for d in (-2, -1, 1, 2)]
        if not bad[nb].any():
            v[j] = (-v[nb[0]] + 4 * v[nb[1]] + 4 * v[nb[2]] - v[nb[3]]) / 6
            continue
        lo = next(((j - d) % M for d in range(1, M) if not bad[(j - d) % M]), None)
        hi = next(((j + d) % M for d in range(1, M) if not bad[(j + d) % M]), None)
        if lo is not None and hi is not None:
            dl, dh = (j - lo) % M, (hi - j) % M
            v[j] = (dh * v[lo] + dl * v[hi]) / (dl + dh)
    return v


def fourier_analyze(fn: BoundaryFunction, N: int, jumps: Sequence = ()) -> FourierBoundaryData:
    """Trapezoid-rule (FFT) coefficients ``c_k``, ``|k| <= N``.

    ``jumps`` are ``(parameter s, size J)``.  Each is removed as ``J * S(t - t_j)``
    (``S`` the unit sawtooth) before the FFT and added back exactly.  Samples at
    exceptional parameters are replaced by interpolation of the continuous rest.
    """
    M = fn.n
    if M < 2 * N + 1:
        raise InputError(f"need at least {2 * N + 1} samples for N={N}, got {M}")
    if not fn.is_equispaced():
        raise InputError("fourier_analyze needs equispaced samples")
    t = fn.theta
    jt = tuple((2 * np.pi * float(s), float(J)) for s, J in jumps)
    vals = fn.values.astype(complex)
    for tj, J in jt:
        vals = vals - J * sawtooth(t - tj)
    bad = fn.exceptional_mask(0.0)
    if bad.any() and not bad.all():
        vals = _patch_nodes(vals, bad)
    F = np.fft.fft(vals) / M
    k = np.arange(-N, N + 1)
    smooth = F[np.mod(k, M)]
    real = fn.is_real
    if real:
        smooth = 0.5 * (smooth + np.conj(smooth[::-1]))
    coeffs = smooth + _jump_coeffs(jt, N)
    return FourierBoundaryData(coeffs, real, smooth, jt)


def direct_coefficients(fn: BoundaryFunction, N: int) -> np.ndarray:
    """O(N M) quadrature of the same coefficients (oracle for the FFT route)."""
    k = np.arange(-N, N + 1)[:, None]
    return (np.exp(-1j * k * fn.theta[None, :]) @ fn.values.astype(complex)) / fn.n


def poisson_extend(data: FourierBoundaryData, z) -> float | np.ndarray:
    """``sum_k c_k r^|k| e^{ik theta}`` over the stored coefficients."""
    if not data.real_flag:
        raise InputError("poisson_extend needs real boundary data")
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise DomainError("poisson_extend is defined for |z| < 1")
    N = data.N
    pos = data.coeffs[N:]
    u = npoly.polyval(z, pos) + npoly.polyval(np.conj(z), data.coeffs[N::-1]) - pos[0]
    u = u.real
    return float(u) if u.ndim == 0 else u


def schwartz_integral(data: FourierBoundaryData) -> AnalyticDiskFunction:
    """Analytic ``f`` with boundary real part the data and ``Im f(0) = 0``:
    ``a_0 = c_0``, ``a_k = 2 c_k``."""
    if not data.real_flag:
        raise InputError("schwartz_integral needs real boundary data")
    N = data.N
    P = np.concatenate([[data.smooth[N].real], 2 * data.smooth[N + 1:]])
    logs = tuple((1j * J / np.pi, np.exp(-1j * t)) for t, J in data.jumps)
    if not logs:
        return AnalyticDiskFunction(P)
    full = np.concatenate([[data.coeffs[N].real], 2 * data.coeffs[N + 1:]])
    return AnalyticDiskFunction(full, P, logs, ())


# --------------------------------------------------------------------------
# Boundary limits


@dataclass(frozen=True)
class AngularLimit:
    value: complex
    converged: bool
    spread: float


@dataclass(frozen=True, eq=False)
class AngularLimitReport:
    params: np.ndarray
    boundary_values: np.ndarray
    residuals: np.ndarray
    exceptional: np.ndarray
    tol: float
    converged: np.ndarray = field(default=None)

    @property
    def checked(self) -> np.ndarray:
        mask = np.ones(self.params.size, dtype=bool)
        mask[self.exceptional] = False
        return mask

    @property
    def max_residual(self) -> float:
        r = self.residuals[self.checked]
        return float(np.max(r)) if r.size else 0.0

    @property
    def pass_fraction(self) -> float:
        r = self.residuals[self.checked]
        return float(np.mean(r <= self.tol)) if r.size else 1.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def to_json(self) -> dict:
        return {"nodes": int(self.params.size),
                "checked": int(self.checked.sum()),
                "exceptional_params": [float(s) for s in self.params[self.exceptional]],
                "max_residual": self.max_residual,
                "pass_fraction": self.pass_fraction,
                "tol": self.tol,
                "passed": self.passed}


def richardson_weights(eps: Sequence[float]) -> np.ndarray:
    """Weights ``w`` with ``sum w_j p(eps_j) = p(0)`` for polynomials of degree < len(eps)."""
    e = np.asarray(eps, dtype=float)
    w = np.ones(e.size)
    for j in range(e.size):
        for m in range(e.size):
            if m != j:
                w[j] *= e[m] / (e[m] - e[j])
    return w


def cone_limits(evaluate, zetas, normals, aperture: float, radii=DEFAULT_RADII,
                points: int = RICHARDSON_POINTS):
    """Extrapolated limits of ``evaluate`` along directions in a cone.

    Points ``zeta + eps * normal * e^{i psi}`` with ``eps = 1 - r``, ``psi`` in
    ``{-aperture/2, 0, aperture/2}``.  Returns per-node limit (central
    direction), the spread across directions and the extrapolation change
    between the finest and the next-finest stencils.
    """
    zetas = np.atleast_1d(np.asarray(zetas, dtype=complex))
    normals = np.atleast_1d(np.asarray(normals, dtype=complex))
    eps = np.sort(1.0 - np.asarray(radii, dtype=float))
    if eps.size < points + 1 or eps[0] <= 0:
        raise InputError("radii must increase towards 1 with at least "
                         f"{points + 1} values")
    psis = [0.0] if aperture == 0 else [0.0, -aperture / 2, aperture / 2]
    w0 = richardson_weights(eps[:points])
    w1 = richardson_weights(eps[1: points + 1])
    lims, drift = [], None
    for psi in psis:
        d = normals * np.exp(1j * psi)
        vals = np.stack([evaluate(zetas + e * d) for e in eps[: points + 1]])
        lim = np.tensordot(w0, vals[:points], axes=1)
        if drift is None:
            drift = np.abs(lim - np.tensordot(w1, vals[1:], axes=1))
        lims.append(lim)
    lims = np.stack(lims)
    spread = np.max(np.abs(lims - lims[0]), axis=0)
    return lims[0], spread, drift


def angular_limit(f, zeta: complex, aperture: float = DEFAULT_APERTURE, radii=DEFAULT_RADII,
                  tol: float = 1e-6) -> AngularLimit:
    """Limit of ``f`` at the unit-circle point ``zeta`` through a cone about the radius."""
    zeta = complex(zeta)
    lim, spread, drift = cone_limits(f, zeta, -zeta / abs(zeta), aperture, radii)
    s = float(max(spread[0], drift[0]))
    return AngularLimit(complex(lim[0]), bool(s <= tol * max(1.0, abs(lim[0]))), s)


def node_params(M: int) -> np.ndarray:
    return np.arange(M) / M


def _on_nodes(fn: BoundaryFunction, M: int) -> BoundaryFunction:
    if fn.n == M and fn.is_equispaced():
        return fn
    return fn.resample(M)


@dataclass(frozen=True, eq=False)
class ConjugateBoundary:
    beta: BoundaryFunction
    exceptional: np.ndarray
    schwartz: AnalyticDiskFunction
    diagnostics: dict


def conjugate_boundary(alpha, N: int = DEFAULT_MODES, partition: Optional[ArcPartition] = None,
                       tol: float = 1e-8) -> ConjugateBoundary:
    """Boundary values ``beta`` of ``Im`` of the Schwartz integral of real data.

    ``alpha`` is a CBVFunction, an ArgumentFunction, or a BoundaryFunction with
    ``partition``.  Values come from radial Richardson extrapolation; nodes at
    arc endpoints, within the exclusion band of them, or where extrapolation
    does not settle are exceptional; beta is 0 at the endpoints themselves.
    """
    if isinstance(alpha, ArgumentFunction):
        fn, part = alpha.alpha, alpha.partition
    elif isinstance(alpha, CBVFunction):
        fn, part = alpha.base, alpha.partition
    else:
        fn = alpha
        part = partition or ArcPartition.from_breakpoints(fn.exceptional or (0.0,))
    if not fn.is_real:
        raise InputError("conjugate_boundary needs real data")
    if np.any(~np.isfinite(fn.values[part.arc_index(fn.params) >= 0])):
        raise InputError("data must be finite off the exceptional set")
    M = NODE_FACTOR * N
    if fn.n != M or not fn.is_equispaced():
        fn = BoundaryFunction(node_params(M), fn.at(node_params(M)).real, fn.curve, None,
                              part.exceptional)
    fn = BoundaryFunction(fn.params, fn.values.real, fn.curve, None, part.exceptional)
    jumps = one_sided_jumps(fn, part)
    g = schwartz_integral(fourier_analyze(fn, N, jumps))
    zeta = np.exp(1j * fn.theta)
    limit, _, drift = cone_limits(lambda z: g(z).imag, zeta, -zeta, 0.0)
    band = fn.exceptional_mask(EXCLUSION_BAND / N) if part.exceptional else np.zeros(M, bool)
    unsettled = (drift > tol * np.maximum(1.0, np.abs(limit))) & ~band
    exc = band | unsettled | ~np.isfinite(limit)
    # values inside the band stay (they feed e^beta); only singular nodes are zeroed
    singular = fn.exceptional_mask(0.0) | ~np.isfinite(limit)
    beta = np.where(singular, 0.0, limit.real)
    diag = {"jumps": [(float(s), float(J)) for s, J in jumps],
            "unsettled_nodes": [float(s) for s in fn.params[unsettled]],
            "max_drift": float(np.max(drift[~exc])) if np.any(~exc) else 0.0}
    out = BoundaryFunction(fn.params, beta, fn.curve, None, part.exceptional)
    return ConjugateBoundary(out, np.nonzero(exc)[0], g, diag)


def exceptional_capacity(fn: BoundaryFunction, nodes: np.ndarray) -> float:
    """Capacity estimate of the boundary points at the given node indices."""
    pts = fn.curve.point(fn.params[nodes]) if len(nodes) else []
    return fattened_capacity(pts) if len(nodes) > 1 else 0.0


def solve_dirichlet_disk(phi: BoundaryFunction, N: int = DEFAULT_MODES,
                         jumps: Sequence = ()) -> AnalyticDiskFunction:
    """``B`` analytic with ``Re B -> phi`` on the circle and ``Im B(0) = 0``."""
    if not phi.is_real:
        raise InputError("Dirichlet data must be real")
    M = max(NODE_FACTOR * N, phi.n) if not phi.is_equispaced() else phi.n
    if M < 2 * N + 1:
        M = NODE_FACTOR * N
    phi = _on_nodes(phi, M)
    vals = phi.values.real
    if np.any(~np.isfinite(vals[~phi.exceptional_mask(0.0)])):
        raise InputError("Dirichlet data must be finite off the exceptional set")
    phi = phi.with_values(np.nan_to_num(vals))
    return schwartz_integral(fourier_analyze(phi, N, jumps))


# --------------------------------------------------------------------------
# Hilbert problem


@dataclass(frozen=True, eq=False)
class HilbertSolution:
    f: AnalyticDiskFunction
    A: AnalyticDiskFunction
    B: AnalyticDiskFunction
    g: AnalyticDiskFunction
    alpha: ArgumentFunction
    beta: ConjugateBoundary
    lam: BoundaryFunction
    phi: BoundaryFunction
    report: AngularLimitReport
    metadata: dict

    def residuals(self, f: Optional[AnalyticDiskFunction] = None) -> np.ndarray:
        """Boundary residuals ``Re(conj(lambda) f) - phi`` of ``f`` (default the solution)."""
        f = self.f if f is None else f
        return hilbert_residuals(f, self.lam, self.phi, self.report.exceptional)


def hilbert_residuals(f, lam: BoundaryFunction, phi: BoundaryFunction, exceptional=(),
                      aperture: float = DEFAULT_APERTURE, radii=DEFAULT_RADII):
    """Signed residuals ``Re(conj(lambda) f*) - phi`` with ``f*`` the cone limit of ``f``."""
    zeta = np.exp(1j * lam.theta)
    lim, _, _ = cone_limits(f, zeta, -zeta, aperture, radii)
    r = (np.conj(lam.values) * lim).real - phi.values.real
    r = np.asarray(r, dtype=float)
    r[np.asarray(exceptional, dtype=int)] = 0.0
    return r


def _check_exp(g: AnalyticDiskFunction, A: AnalyticDiskFunction, M: int, rtol: float):
    """Compare the truncated exponential with pointwise ``exp(i g)`` on a circle inside."""
    r = 1.0 - 4.0 / g.N if g.N > 8 else 0.5
    z = r * np.exp(2j * np.pi * np.arange(M) / M)
    gs = npoly.polyval(z, g.smooth)
    direct = np.exp(1j * gs)
    approx = npoly.polyval(z, A.smooth)
    scale = max(1.0, float(np.max(np.abs(direct))))
    err = float(np.max(np.abs(direct - approx))) / scale
    if not np.isfinite(err) or err > rtol:
        raise ResolutionError(f"exp(i g) truncated at order {g.N} is off by {err:.2e}; "
                              "increase the number of Fourier modes")
    return err


def solve_hilbert_disk(lam: CBVFunction, phi: BoundaryFunction, N: int = DEFAULT_MODES,
                       tol: float = 1e-6, aperture: float = DEFAULT_APERTURE,
                       radii=DEFAULT_RADII) -> HilbertSolution:
    """Analytic ``f`` on the disk with ``Re(conj(lambda) f) -> phi`` at the nodes.

    Steps: phase ``alpha`` of ``lambda``; ``g`` its Schwartz integral;
    ``A = exp(i g)``; ``beta`` the conjugate boundary values of ``alpha``;
    ``B`` the Dirichlet solution for ``phi e^beta``; ``f = A B``.
    """
    if N < 4 or N & (N - 1):
        raise InputError("N must be a power of two >= 4")
    M = NODE_FACTOR * N
    s = node_params(M)
    part = lam.partition
    base = lam.base
    if base.n != M or not base.is_equispaced():
        base = BoundaryFunction(s, base.at(s), base.curve, base.source, part.exceptional)
        lam = certify_cbv(base, part)
    phi = _on_nodes(phi, M)
    if not phi.is_real:
        raise InputError("phi must be real")
    alpha = argument_function(lam)
    a_jumps = alpha.jumps()
    g = schwartz_integral(fourier_analyze(alpha.alpha, N, a_jumps))
    A = g.exp_i()
    exp_err = _check_exp(g, A, M, 1e-8)
    conj = conjugate_boundary(alpha, N)
    exc_params = tuple(sorted(set(part.exceptional) | set(phi.exceptional)))
    band = np.zeros(M, dtype=bool)
    for e in exc_params:
        band |= np.abs(np.mod(s - e + 0.5, 1.0) - 0.5) <= EXCLUSION_BAND / N + 1e-12
    phi_vals = np.where(np.isfinite(phi.values.real), phi.values.real, 0.0)
    psi_vals = phi_vals * np.exp(conj.beta.values)
    psi = BoundaryFunction(s, psi_vals, phi.curve, None, exc_params)
    psi_jumps = []
    if exc_params:
        # where alpha jumps, e^beta is a power law, not a jump; split off only data jumps
        for e, J in one_sided_jumps(psi, ArcPartition.from_breakpoints(exc_params)):
            if not any(abs(e - ea) < 1e-12 for ea, _ in a_jumps):
                psi_jumps.append((e, J))
    B = solve_dirichlet_disk(psi, N, psi_jumps)
    f = A * B
    exc_nodes = np.nonzero(band | np.isin(np.arange(M), conj.exceptional))[0]
    zeta = np.exp(2j * np.pi * s)
    lim, spread, drift = cone_limits(f, zeta, -zeta, aperture, radii)
    res = np.abs((np.conj(lam.base.values) * lim).real - phi_vals)
    report = AngularLimitReport(s, lim, res, exc_nodes, tol,
                                (np.maximum(spread, drift) <= max(tol, 1e-12) * np.maximum(1, np.abs(lim))))
    meta = {"N": N, "nodes": M, "alpha_jumps": a_jumps, "data_jumps": psi_jumps,
            "exp_truncation_error": exp_err, "alpha_bound": alpha.bound}
    return HilbertSolution(f, A, B, g, alpha, conj, lam.base, phi, report, meta)


def null_family(solution: HilbertSolution, c: float) -> AnalyticDiskFunction:
    """``f + A * (i c)``: another solution of the same boundary problem."""
    return solution.f + solution.A.scale(1j * float(c))
