"""Conformal maps of a domain onto the unit disk.

``forward`` is g: D -> unit disk with g(z0) = 0 and g'(z0) > 0; ``inverse`` is
its inverse, represented as a Taylor series in the disk variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .curves import PlanarDomain
from .disk import exp_series
from .errors import ConvergenceError, DomainError, InputError, UnsupportedError

NEWTON_TOL = 1e-12
THEODORSEN_TOL = 1e-8
SERIES_TAIL = 1e-10
MAX_NODES = 16384


def conjugate_periodic(values: np.ndarray) -> np.ndarray:
    """Harmonic conjugate (zero mean) of equispaced periodic samples: ``e^{ik t} -> -i sgn(k) e^{ik t}``."""
    n = values.size
    c = np.fft.fft(values)
    k = np.fft.fftfreq(n, 1.0 / n)
    mult = -1j * np.sign(k)
    if n % 2 == 0:
        mult[n // 2] = 0.0
    return np.fft.ifft(c * mult).real


@dataclass(frozen=True, eq=False)
class ConformalMap:
    """Map D -> disk.  ``series`` are Taylor coefficients of the inverse about 0."""

    domain: PlanarDomain
    method: str
    series: np.ndarray
    forward_exact: Optional[Callable] = field(default=None, repr=False)
    inverse_exact: Optional[Callable] = field(default=None, repr=False)
    derivative_exact: Optional[Callable] = field(default=None, repr=False)
    theta_of_phi: Optional[np.ndarray] = field(default=None, repr=False)
    accuracy: dict = field(default_factory=dict)
    _seed_tree: object = field(default=None, init=False, repr=False)
    _seed_w: object = field(default=None, init=False, repr=False)
    _spl: object = field(default=None, init=False, repr=False)

    # inverse map g^{-1}: disk -> D
    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        if self.inverse_exact is not None:
            return self.inverse_exact(w)
        return npoly.polyval(w, self.series)

    def inverse_derivative(self, w):
        w = np.asarray(w, dtype=complex)
        if self.derivative_exact is not None:
            return 1.0 / self.derivative_exact(self.inverse(w))
        return npoly.polyval(w, npoly.polyder(self.series))

    def _seeds(self, z):
        if self._seed_tree is None:
            r = np.sqrt(np.linspace(0, 1, 48, endpoint=False))
            t = 2 * np.pi * np.arange(192) / 192
            w = (r[:, None] * np.exp(1j * t[None, :])).ravel()
            zz = self.inverse(w)
            object.__setattr__(self, "_seed_w", w)
            object.__setattr__(self, "_seed_tree", cKDTree(np.column_stack([zz.real, zz.imag])))
        _, idx = self._seed_tree.query(np.column_stack([z.real, z.imag]))
        return self._seed_w[idx]

    def forward(self, z):
        """g(z) by Newton iteration on the inverse map."""
        z = np.asarray(z, dtype=complex)
        if self.forward_exact is not None:
            return self.forward_exact(z)
        flat = z.ravel()
        w = self._seeds(flat)
        for _ in range(60):
            step = (self.inverse(w) - flat) / self.inverse_derivative(w)
            nw = w - step
            for _ in range(30):
                out = np.abs(nw) >= 1
                if not out.any():
                    break
                step[out] *= 0.5
                nw[out] = w[out] - step[out]
            w = nw
            if np.max(np.abs(step)) < NEWTON_TOL:
                break
        else:
            if np.max(np.abs(self.inverse(w) - flat)) > 1e-9:
                raise ConvergenceError("Newton inversion of the conformal map did not converge")
        return w.reshape(z.shape)

    def derivative(self, z):
        """g'(z) = 1 / (g^{-1})'(g(z))."""
        z = np.asarray(z, dtype=complex)
        d = self.derivative_exact(z) if self.derivative_exact is not None else \
            1.0 / self.inverse_derivative(self.forward(z))
        if np.any(np.abs(d) < 1e-12):
            raise DomainError("conformal map derivative degenerates")
        return d

    # boundary correspondence: curve parameter s -> disk angle phi / 2 pi
    def boundary_map(self, s) -> np.ndarray:
        """Disk-side parameter of the boundary point with curve parameter ``s``."""
        s = np.asarray(s, dtype=float)
        if self.forward_exact is not None:
            z = self.domain.boundary.point(s)
            return np.mod(np.angle(self.forward_exact(z)) / (2 * np.pi), 1.0)
        th = 2 * np.pi * np.mod(s, 1.0)
        return np.mod(self._phi_of_theta(th) / (2 * np.pi), 1.0)

    def boundary_inverse(self, p) -> np.ndarray:
        """Curve parameter of the boundary point with disk parameter ``p``."""
        p = np.asarray(p, dtype=float)
        if self.inverse_exact is not None:
            w = np.exp(2j * np.pi * p)
            z = self.inverse_exact(w)
            # exact maps live on the unit circle, parameterized by angle
            return np.mod(np.angle(z) / (2 * np.pi), 1.0)
        phi = 2 * np.pi * np.mod(p, 1.0)
        return np.mod(self._theta_of_phi(phi) / (2 * np.pi), 1.0)

    def _splines(self):
        if self._spl is None:
            n = self.theta_of_phi.size
            phi = 2 * np.pi * np.arange(n + 1) / n
            th = np.concatenate([self.theta_of_phi, [self.theta_of_phi[0] + 2 * np.pi]])
            fwd = CubicSpline(phi, th - phi, bc_type="periodic")
            inv = CubicSpline(th, phi - th, bc_type="periodic")
            object.__setattr__(self, "_spl", (fwd, inv, th[0]))
        return self._spl

    def _theta_of_phi(self, phi):
        fwd, _, _ = self._splines()
        phi = np.mod(np.asarray(phi, dtype=float), 2 * np.pi)
        return phi + fwd(phi)

    def _phi_of_theta(self, th):
        _, inv, base = self._splines()
        t = np.mod(np.asarray(th, dtype=float) - base, 2 * np.pi) + base
        return t + inv(t)

    def to_json(self) -> dict:
        s = np.arange(256) / 256
        return {"method": self.method,
                "series": [[float(a.real), float(a.imag)] for a in self.series],
                "boundary_correspondence": [[float(a), float(b)] for a, b in zip(s, self.boundary_map(s))],
                "accuracy": self.accuracy}


def _moebius_series(a: complex, n: int) -> np.ndarray:
    """Taylor coefficients of ``(w + a) / (1 + conj(a) w)``."""
    k = np.arange(1, n + 1)
    out = np.zeros(n + 1, dtype=complex)
    out[0] = a
    out[1:] = (1 - abs(a) ** 2) * (-np.conj(a)) ** (k - 1)
    return out


def _is_unit_disk(domain: PlanarDomain) -> bool:
    z = domain.boundary.samples
    return bool(np.max(np.abs(np.abs(z) - 1.0)) < 1e-9)


def riemann_map(domain: PlanarDomain, method: str = "theodorsen", a: complex = 0j,
                n: int = 1024, max_iter: int = 500, tol: float = THEODORSEN_TOL) -> ConformalMap:
    """Conformal map of ``domain`` onto the disk, ``g(z0) = 0``.

    ``identity`` and ``moebius`` (z - a)/(1 - conj(a) z) need the unit disk;
    ``theodorsen`` needs a starlike domain with radius function about ``z0``;
    the node count doubles from ``n`` until the inverse series has decayed.
    """
    if method in ("identity", "moebius"):
        if not _is_unit_disk(domain):
            raise UnsupportedError(f"{method} map needs the unit disk")
        if method == "identity":
            a = 0j
        a = complex(a)
        if abs(a) >= 1:
            raise InputError("moebius parameter must lie in the disk")
        ac = np.conj(a)
        return ConformalMap(
            domain, method, _moebius_series(a, 64),
            forward_exact=lambda z: (z - a) / (1 - ac * z),
            inverse_exact=lambda w: (w + a) / (1 + ac * w),
            derivative_exact=lambda z: (1 - abs(a) ** 2) / (1 - ac * z) ** 2,
            accuracy={"exact": True})
    if method != "theodorsen":
        raise InputError(f"unknown mapping method {method!r}")
    if domain.radial is None:
        raise UnsupportedError("theodorsen needs a starlike domain with a radius function")
    while True:
        cmap = _theodorsen(domain, n, max_iter, tol)
        if cmap.accuracy["series_tail"] <= SERIES_TAIL or n >= MAX_NODES:
            return cmap
        n *= 2


def _theodorsen(domain: PlanarDomain, n: int, max_iter: int, tol: float) -> ConformalMap:
    r = domain.radial
    phi = 2 * np.pi * np.arange(n) / n
    rr = r(phi)
    if np.any(rr <= 0) or not np.all(np.isfinite(rr)):
        raise UnsupportedError("radius function must be positive and finite")
    ratio = float(rr.max() / rr.min())
    omega = 0.5 if ratio >= 2 else 1.0
    theta = phi.copy()
    history = []
    for it in range(1, max_iter + 1):
        target = phi + conjugate_periodic(np.log(r(np.mod(theta, 2 * np.pi))))
        delta = target - theta
        theta = theta + omega * delta
        res = float(np.max(np.abs(delta)))
        history.append(res)
        if res <= tol:
            break
        if not np.isfinite(res) or (it > 20 and res > 10 * min(history)):
            raise ConvergenceError(f"Theodorsen iteration diverged (residual {res:.2e})")
    else:
        raise ConvergenceError(f"Theodorsen iteration stalled at residual {history[-1]:.2e}")
    if np.any(np.diff(theta) <= 0):
        raise ConvergenceError("boundary correspondence is not monotone; increase resolution")
    logr = np.log(r(np.mod(theta, 2 * np.pi)))
    c = np.fft.fft(logr) / n
    m = n // 2
    S = np.zeros(m, dtype=complex)
    S[0] = c[0].real
    S[1:] = 2 * c[1:m]
    E = exp_series(S, m - 1)
    series = np.concatenate([[domain.z0], E])
    tail = float(np.max(np.abs(E[-m // 8:])))
    acc = {"iterations": len(history), "residual": history[-1], "damping": omega,
           "radius_ratio": ratio, "series_tail": tail}
    return ConformalMap(domain, "theodorsen", series, theta_of_phi=theta, accuracy=acc)


def holder_exponent_estimate(cmap: ConformalMap, scales=None, samples: int = 2048) -> dict:
    """Log-log slope of the worst-case boundary displacement against curve distance.

    Returns exponents for the boundary map and its inverse.
    """
    if scales is None:
        scales = 2.0 ** -np.arange(4, 11)
    s = np.arange(samples) / samples
    curve = cmap.domain.boundary

    def slope(fwd: Callable, src_pt: Callable, dst_pt: Callable):
        xs, ys = [], []
        p = fwd(s)
        for d in scales:
            q = fwd(s + d)
            num = np.abs(dst_pt(q) - dst_pt(p))
            den = np.abs(src_pt(s + d) - src_pt(s))
            xs.append(math.log(float(np.max(den))))
            ys.append(math.log(float(np.max(num))))
        return float(np.polyfit(xs, ys, 1)[0])

    def disk_pt(p):
        return np.exp(2j * np.pi * np.asarray(p))

    fwd = slope(cmap.boundary_map, curve.point, disk_pt)
    inv = slope(cmap.boundary_inverse, disk_pt, curve.point)
    return {"forward": fwd, "inverse": inv}
