"""Jordan curves, planar domains and the metric geometry of their interiors.

Curves are closed polylines (counterclockwise, last point joined to the first)
that may also carry an analytic parameterization ``s -> z`` on ``[0, 1)``.
Built-in fixtures always carry one; JSON sample lists do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from matplotlib.path import Path as _MplPath
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import ConvexHull, cKDTree

from .errors import DomainError, InfeasibleError, InputError, UnsupportedError

Param = Callable[[np.ndarray], np.ndarray]

DEFAULT_SAMPLES = 512
TANGENT_TOL = 1e-3


def _as_complex(z) -> np.ndarray:
    z = np.asarray(z)
    if z.dtype.kind != "c" and z.ndim >= 1 and z.shape[-1] == 2:
        return z[..., 0] + 1j * z[..., 1]
    return z.astype(complex)


def signed_area(samples: np.ndarray) -> float:
    x, y = samples.real, samples.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p1, p2, q1, q2):
    """Proper intersection test, vectorized over broadcast arrays."""

    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    d1 = cross(q2 - q1, p1 - q1)
    d2 = cross(q2 - q1, p2 - q1)
    d3 = cross(p2 - p1, q1 - p1)
    d4 = cross(p2 - p1, q2 - p1)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


@dataclass(frozen=True, eq=False)
class JordanCurve:
    """Closed counterclockwise polyline with an optional exact parameterization."""

    samples: np.ndarray
    param: Optional[Param] = None
    kind: str = "polyline"
    params: dict = field(default_factory=dict)
    tangent_flags: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        z = _as_complex(self.samples)
        if z.ndim != 1 or z.size < 3:
            raise InputError("a Jordan curve needs at least 3 samples")
        if np.abs(z[0] - z[-1]) < 1e-14 * max(1.0, np.abs(z).max()):
            z = z[:-1]
        if not np.all(np.isfinite(z)):
            raise InputError("curve samples must be finite")
        if signed_area(z) <= 0:
            raise InputError("curve must be counterclockwise (positive signed area)")
        object.__setattr__(self, "samples", z)
        if self.tangent_flags is None:
            flags = np.array([tangent_at(self, j / z.size) is not None for j in range(z.size)]) \
                if self.param is not None and z.size <= 8192 else _polyline_tangent_flags(z)
            object.__setattr__(self, "tangent_flags", flags)

    @classmethod
    def from_points(cls, points, **kw) -> "JordanCurve":
        """Build from raw points, reversing clockwise input."""
        z = _as_complex(points)
        if z.size >= 2 and np.abs(z[0] - z[-1]) < 1e-14:
            z = z[:-1]
        if signed_area(z) < 0:
            z = z[::-1]
        return cls(z, **kw)

    @property
    def n(self) -> int:
        return self.samples.size

    def point(self, s) -> np.ndarray:
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        if self.param is not None:
            return np.asarray(self.param(s), dtype=complex)
        t = s * self.n
        j = np.floor(t).astype(int) % self.n
        frac = t - np.floor(t)
        z = self.samples
        return z[j] + frac * (z[(j + 1) % self.n] - z[j])

    def segments(self):
        return self.samples, np.roll(self.samples, -1)

    def length(self) -> float:
        a, b = self.segments()
        return float(np.abs(b - a).sum())

    def is_simple(self) -> bool:
        """Pairwise check of non-adjacent segments (O(n^2), chunked)."""
        a, b = self.segments()
        n = self.n
        idx = np.arange(n)
        chunk = max(1, 4_000_000 // n)
        for start in range(0, n, chunk):
            i = idx[start:start + chunk, None]
            hit = _segments_intersect(a[i], b[i], a[None, :], b[None, :])
            gap = np.abs(i - idx[None, :])
            hit &= (gap > 1) & (gap < n - 1)
            if hit.any():
                return False
        return True

    def locate(self, zeta: complex) -> float:
        """Parameter of the boundary point nearest to ``zeta``."""
        j = int(np.argmin(np.abs(self.samples - zeta)))
        s = j / self.n
        if self.param is None:
            return s
        # golden-section refinement on the exact parameterization
        lo, hi = s - 1.0 / self.n, s + 1.0 / self.n
        gr = (math.sqrt(5) - 1) / 2
        for _ in range(60):
            m1 = hi - gr * (hi - lo)
            m2 = lo + gr * (hi - lo)
            if abs(self.point(m1) - zeta) < abs(self.point(m2) - zeta):
                hi = m2
            else:
                lo = m1
        return float(np.mod(0.5 * (lo + hi), 1.0))


def _polyline_tangent_flags(z: np.ndarray) -> np.ndarray:
    d_minus = z - np.roll(z, 1)
    d_plus = np.roll(z, -1) - z
    ang = np.abs(np.angle(d_plus / d_minus))
    ang = np.minimum(ang, np.pi - ang)
    return ang <= max(TANGENT_TOL, 4 * np.pi / z.size)


@dataclass(frozen=True, eq=False)
class PlanarDomain:
    """Interior of a Jordan curve with a basepoint ``z0``.

    ``indicator`` may supply an exact membership test (used by the built-in
    fixtures); otherwise the polygon is used.  ``radial`` is the boundary
    radius ``r(theta)`` about ``z0`` for starlike fixtures.
    """

    boundary: JordanCurve
    z0: complex = 0j
    name: str = "domain"
    indicator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    _tree: cKDTree = field(default=None, init=False, repr=False)
    _path: _MplPath = field(default=None, init=False, repr=False)

    def __post_init__(self):
        z = self.boundary.samples
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "_tree", cKDTree(np.column_stack([z.real, z.imag])))
        verts = np.column_stack([z.real, z.imag])
        object.__setattr__(self, "_path", _MplPath(np.vstack([verts, verts[:1]]), closed=True))
        if winding_number(self.boundary, self.z0) != 1:
            raise DomainError(f"basepoint {self.z0} is not interior to {self.name}")
        if self.boundary_distance(np.array([self.z0]))[0] <= 0:
            raise DomainError("basepoint lies on the boundary")

    def contains(self, z) -> np.ndarray:
        z = np.atleast_1d(_as_complex(z))
        if self.indicator is not None:
            return np.asarray(self.indicator(z), dtype=bool)
        pts = np.column_stack([z.real, z.imag])
        return self._path.contains_points(pts)

    def boundary_distance(self, z, return_nearest=False):
        """Distance to the boundary polyline for arbitrary points (no interior check)."""
        z = np.atleast_1d(_as_complex(z)).ravel()
        a, b = self.boundary.segments()
        n = a.size
        k = min(6, n)
        _, idx = self._tree.query(np.column_stack([z.real, z.imag]), k=k)
        idx = np.atleast_2d(idx)
        cand = np.concatenate([idx, (idx - 1) % n], axis=1)
        pa, pb = a[cand], b[cand]
        seg = pb - pa
        t = ((z[:, None] - pa) * np.conj(seg)).real / np.maximum(np.abs(seg) ** 2, 1e-300)
        proj = pa + np.clip(t, 0.0, 1.0) * seg
        dist = np.abs(z[:, None] - proj)
        j = np.argmin(dist, axis=1)
        rows = np.arange(z.size)
        if return_nearest:
            return dist[rows, j], proj[rows, j]
        return dist[rows, j]

    @property
    def bbox(self):
        z = self.boundary.samples
        return z.real.min(), z.real.max(), z.imag.min(), z.imag.max()

    @property
    def diameter(self) -> float:
        z = self.boundary.samples
        hull = z[ConvexHull(np.column_stack([z.real, z.imag])).vertices]
        return float(np.abs(hull[:, None] - hull[None, :]).max())


def winding_number(curve: JordanCurve, z: complex) -> int:
    w = curve.samples - z
    if np.any(np.abs(w) == 0):
        return 0
    turn = np.angle(np.roll(w, -1) / w).sum()
    return int(round(turn / (2 * np.pi)))


@dataclass(frozen=True)
class NontangentialRay:
    vertex: complex
    aperture: float
    radii: tuple

    def __post_init__(self):
        if not (0 <= self.aperture < np.pi / 2):
            raise InputError("aperture must lie in [0, pi/2)")
        r = np.asarray(self.radii, dtype=float)
        if r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
            raise InputError("radii must be positive and strictly decreasing")
        object.__setattr__(self, "radii", tuple(float(x) for x in r))

    def directions(self) -> np.ndarray:
        """Angular offsets from the inward normal used for sampling."""
        if self.aperture == 0:
            return np.array([0.0])
        h = self.aperture / 2
        return np.array([-h, 0.0, h])


# --------------------------------------------------------------------------
# fixtures


def circle(center=0j, radius=1.0, n=DEFAULT_SAMPLES) -> JordanCurve:
    c, r = complex(center), float(radius)

    def param(s):
        return c + r * np.exp(2j * np.pi * np.asarray(s))

    s = np.arange(n) / n
    return JordanCurve(param(s), param=param, kind="circle",
                       params={"center": [c.real, c.imag], "radius": r})


def unit_disk(n=DEFAULT_SAMPLES) -> PlanarDomain:
    return PlanarDomain(circle(0j, 1.0, n), 0j, "unit-disk",
                        indicator=lambda z: np.abs(z) < 1.0,
                        radial=lambda th: np.ones_like(np.asarray(th, dtype=float)))


THREE_DISK_CENTERS = (0j, 1 + 1j, 1 - 1j)


def _three_disk_param(s):
    """Arclength parameterization of the boundary of the union of the unit
    disks centred at 0 and 1 +/- i, starting at the tangency point 1."""
    s = np.mod(np.asarray(s, dtype=float), 1.0)
    t = s * 4 * np.pi  # total length: 3pi/2 + pi + 3pi/2
    out = np.empty(t.shape, dtype=complex)
    a = t < 1.5 * np.pi
    out[a] = (1 + 1j) + np.exp(1j * (-np.pi / 2 + t[a]))
    b = (t >= 1.5 * np.pi) & (t < 2.5 * np.pi)
    out[b] = np.exp(1j * (np.pi / 2 + t[b] - 1.5 * np.pi))
    c = t >= 2.5 * np.pi
    out[c] = (1 - 1j) + np.exp(1j * (np.pi + t[c] - 2.5 * np.pi))
    return out


def three_disks(n=4096) -> PlanarDomain:
    s = np.arange(n) / n
    curve = JordanCurve(_three_disk_param(s), param=_three_disk_param, kind="three_disks",
                        params={})

    def indicator(z):
        z = np.asarray(z)
        return np.any([np.abs(z - c) < 1.0 for c in THREE_DISK_CENTERS], axis=0)

    return PlanarDomain(curve, 0j, "three-disks", indicator=indicator)


def square(half_width=1.0, n=DEFAULT_SAMPLES) -> PlanarDomain:
    w = float(half_width)
    corners = np.array([w - 1j * w, w + 1j * w, -w + 1j * w, -w - 1j * w])

    def param(s):
        s = np.mod(np.asarray(s, dtype=float), 1.0) * 4
        k = np.floor(s).astype(int) % 4
        f = s - np.floor(s)
        return corners[k] + f * (corners[(k + 1) % 4] - corners[k])

    s = (np.arange(n) + 0.5) / n if n % 4 else np.arange(n) / n
    curve = JordanCurve(param(s), param=param, kind="square", params={"half_width": w})
    return PlanarDomain(curve, 0j, "square",
                        indicator=lambda z: (np.abs(np.real(z)) < w) & (np.abs(np.imag(z)) < w))


def starlike(radius: Callable[[np.ndarray], np.ndarray], n=DEFAULT_SAMPLES, center=0j,
             name="starlike", params=None) -> PlanarDomain:
    """Domain bounded by ``center + r(theta) e^{i theta}``."""
    c = complex(center)

    def param(s):
        th = 2 * np.pi * np.mod(np.asarray(s, dtype=float), 1.0)
        return c + radius(th) * np.exp(1j * th)

    def indicator(z):
        w = np.asarray(z) - c
        return np.abs(w) < radius(np.mod(np.angle(w), 2 * np.pi))

    s = np.arange(n) / n
    curve = JordanCurve(param(s), param=param, kind="starlike", params=params or {})
    return PlanarDomain(curve, c, name, indicator=indicator, radial=radius)


def fourier_radius(mean=1.0, cos=(), sin=()):
    """``r(theta) = mean + sum a_k cos k theta + sum b_k sin k theta``."""
    cos = [(int(k), float(a)) for k, a in cos]
    sin = [(int(k), float(b)) for k, b in sin]

    def r(th):
        th = np.asarray(th, dtype=float)
        out = np.full(th.shape, float(mean))
        for k, a in cos:
            out = out + a * np.cos(k * th)
        for k, b in sin:
            out = out + b * np.sin(k * th)
        return out

    return r


def ellipse_radius(a, b):
    def r(th):
        th = np.asarray(th, dtype=float)
        return a * b / np.sqrt((b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2)

    return r


def domain_from_json(obj: dict) -> PlanarDomain:
    """``{"samples": [[x, y], ...]}`` or ``{"parametric": {"kind": ..., "params": {...}}}``."""
    if "samples" in obj:
        curve = JordanCurve.from_points(np.asarray(obj["samples"], dtype=float))
        if not curve.is_simple():
            raise InputError("sampled curve is self-intersecting")
        z0 = obj.get("z0")
        z0 = complex(*z0) if z0 is not None else complex(curve.samples.mean())
        return PlanarDomain(curve, z0, obj.get("name", "polygon"))
    if "parametric" not in obj:
        raise InputError("domain needs 'samples' or 'parametric'")
    spec = obj["parametric"]
    kind = spec.get("kind")
    p = spec.get("params", {}) or {}
    n = int(p.get("n", obj.get("n", 0)) or 0)
    if kind == "circle":
        c = complex(*p.get("center", [0.0, 0.0]))
        r = float(p.get("radius", 1.0))
        if c == 0 and r == 1.0:
            return unit_disk(n or DEFAULT_SAMPLES)
        return PlanarDomain(circle(c, r, n or DEFAULT_SAMPLES), c, "circle",
                            indicator=lambda z: np.abs(np.asarray(z) - c) < r,
                            radial=lambda th: np.full(np.shape(th), r))
    if kind == "three_disks":
        return three_disks(n or 4096)
    if kind == "square":
        return square(float(p.get("half_width", 1.0)), n or DEFAULT_SAMPLES)
    if kind == "starlike":
        r = fourier_radius(p.get("mean", 1.0), p.get("cos", ()), p.get("sin", ()))
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        if np.any(r(th) <= 0):
            raise InputError("starlike radius must stay positive")
        return starlike(r, n or DEFAULT_SAMPLES, name="starlike", params=p)
    if kind == "ellipse":
        a, b = float(p["a"]), float(p["b"])
        return starlike(ellipse_radius(a, b), n or DEFAULT_SAMPLES, name="ellipse", params=p)
    raise InputError(f"unknown parametric curve kind {kind!r}")


# --------------------------------------------------------------------------
# operations


def _require_interior(domain: PlanarDomain, z) -> np.ndarray:
    z = np.atleast_1d(_as_complex(z))
    inside = domain.contains(z)
    if not np.all(inside):
        raise DomainError(f"point(s) {z[~inside][:3]} not interior to {domain.name}")
    d = domain.boundary_distance(z)
    if np.any(d <= 0):
        raise DomainError("point on the boundary")
    return d


def distance_to_boundary(domain: PlanarDomain, z) -> float | np.ndarray:
    d = _require_interior(domain, z)
    return float(d[0]) if np.ndim(z) == 0 else d


class _QHGrid:
    """8-neighbour grid graph on the interior, weighted by length / min distance."""

    OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))

    def __init__(self, domain: PlanarDomain, spacing: float, origin: complex):
        x0, x1, y0, y1 = domain.bbox
        h = float(spacing)
        i0 = math.floor((x0 - origin.real) / h) - 1
        i1 = math.ceil((x1 - origin.real) / h) + 1
        j0 = math.floor((y0 - origin.imag) / h) - 1
        j1 = math.ceil((y1 - origin.imag) / h) + 1
        xs = origin.real + h * np.arange(i0, i1 + 1)
        ys = origin.imag + h * np.arange(j0, j1 + 1)
        self.h, self.xs, self.ys = h, xs, ys
        self.i0, self.j0 = i0, j0
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        Z = X + 1j * Y
        inside = domain.contains(Z.ravel()).reshape(Z.shape)
        d = np.zeros(Z.shape)
        d[inside] = domain.boundary_distance(Z[inside])
        inside &= d > 0
        self.domain, self.Z, self.inside, self.d = domain, Z, inside, d
        self.index = -np.ones(Z.shape, dtype=np.int64)
        self.index[inside] = np.arange(inside.sum())
        self.n_nodes = int(inside.sum())

        rows, cols, w = [], [], []
        nx, ny = Z.shape
        for di, dj in self.OFFSETS:
            a = (slice(max(0, -di), nx - max(0, di)), slice(max(0, -dj), ny - max(0, dj)))
            b = (slice(a[0].start + di, a[0].stop + di), slice(a[1].start + dj, a[1].stop + dj))
            ok = inside[a] & inside[b]
            length = h * math.hypot(di, dj)
            rows.append(self.index[a][ok])
            cols.append(self.index[b][ok])
            w.append(length / np.minimum(d[a][ok], d[b][ok]))
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.w = np.concatenate(w)

    def _attach(self, z: complex):
        """Edges from an off-grid point to the interior corners of its cell."""
        i = math.floor((z.real - self.xs[0]) / self.h)
        j = math.floor((z.imag - self.ys[0]) / self.h)
        dz = float(self.domain.boundary_distance(np.array([z]))[0])
        out = []
        for a in (i, i + 1):
            for b in (j, j + 1):
                if 0 <= a < self.Z.shape[0] and 0 <= b < self.Z.shape[1] and self.inside[a, b]:
                    node = self.Z[a, b]
                    out.append((int(self.index[a, b]), abs(z - node) / min(dz, self.d[a, b])))
        return out

    def node_of(self, z: complex) -> Optional[int]:
        i = (z.real - self.xs[0]) / self.h
        j = (z.imag - self.ys[0]) / self.h
        ri, rj = round(i), round(j)
        if abs(i - ri) < 1e-9 and abs(j - rj) < 1e-9:
            if 0 <= ri < self.Z.shape[0] and 0 <= rj < self.Z.shape[1] and self.inside[ri, rj]:
                return int(self.index[ri, rj])
        return None

    def distances(self, source: complex, targets: Sequence[complex]) -> np.ndarray:
        rows, cols, w = [self.rows], [self.cols], [self.w]
        extra = 0
        ids = []
        for z in [source, *targets]:
            node = self.node_of(complex(z))
            if node is None:
                nid = self.n_nodes + extra
                extra += 1
                links = self._attach(complex(z))
                if not links:
                    raise InfeasibleError(f"point {z} is not connected to the grid graph")
                rows.append(np.array([nid] * len(links)))
                cols.append(np.array([l[0] for l in links]))
                w.append(np.array([l[1] for l in links]))
                node = nid
            ids.append(node)
        n = self.n_nodes + extra
        r, c, ww = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
        graph = coo_matrix((ww, (r, c)), shape=(n, n)).tocsr()
        dist = dijkstra(graph, directed=False, indices=ids[0])
        return dist[np.array(ids[1:], dtype=int)]


def quasihyperbolic_distance(domain: PlanarDomain, z, z0, resolution: float = 1 / 128) -> float:
    """Shortest-path approximation of the quasihyperbolic distance."""
    z, z0 = complex(z), complex(z0)
    _require_interior(domain, np.array([z, z0]))
    if z == z0:
        return 0.0
    grid = _QHGrid(domain, resolution, origin=z0)
    k = float(grid.distances(z0, [z])[0])
    if not np.isfinite(k):
        raise InfeasibleError("points lie in different grid components; refine the resolution")
    return k


def _segment_qh_length(domain: PlanarDomain, a: complex, b: complex, n: int = 400) -> float:
    """Integral of ds / d(., boundary) along the straight segment from a to b,
    on nodes graded geometrically toward ``a`` (where the distance is smallest)."""
    L = abs(b - a)
    if L == 0:
        return 0.0
    u = (b - a) / L
    x = np.concatenate([[0.0], np.geomspace(1e-7, 1.0, n)])
    pts = a + L * x * u
    d = domain.boundary_distance(pts)
    return float(np.trapezoid(1.0 / d, L * x))


@dataclass(frozen=True)
class QHBFit:
    a: float
    b: float
    max_residual: float
    violations: int
    verdict: str
    k: np.ndarray
    log_ratio: np.ndarray
    distances: np.ndarray
    tol: float

    @property
    def holds(self) -> bool:
        return self.verdict == "holds numerically"


def qh_distances(domain: PlanarDomain, z0, probes, resolution: float = 1 / 128,
                 anchor_depth: float = 6.0) -> np.ndarray:
    """Quasihyperbolic distances from ``z0`` to every probe, one Dijkstra run.

    Probes closer to the boundary than ``anchor_depth`` grid cells are joined
    to the graph by a straight segment pushed away from their nearest boundary
    point; the segment's exact weight is added.  Every value is the weight of
    an admissible path, hence an upper estimate of the true distance.
    """
    z0 = complex(z0)
    probes = np.asarray(probes, dtype=complex)
    d, near = domain.boundary_distance(probes, return_nearest=True)
    grid = _QHGrid(domain, resolution, origin=z0)
    depth = anchor_depth * resolution
    anchors = probes.copy()
    tails = np.zeros(probes.size)
    for i, z in enumerate(probes):
        if d[i] >= depth:
            continue
        u = (z - near[i]) / abs(z - near[i])
        t = depth
        for _ in range(40):
            z1 = z + t * u
            if domain.contains(np.array([z1]))[0] and domain.boundary_distance(np.array([z1]))[0] >= depth:
                break
            t *= 1.25
        else:
            raise InfeasibleError(f"cannot anchor probe {z} to the interior grid")
        anchors[i] = z1
        tails[i] = _segment_qh_length(domain, complex(z), complex(z1))
    k = grid.distances(z0, list(anchors)) + tails
    k[probes == z0] = 0.0
    if not np.all(np.isfinite(k)):
        raise InfeasibleError("some probes are not connected to the basepoint")
    return k


def check_qhb_condition(domain: PlanarDomain, z0, probe_points, resolution: float = 1 / 128,
                        tol: float = 0.25, fixed: Optional[tuple] = None) -> QHBFit:
    """Fit ``k(z, z0) <= a ln(d(z0)/d(z)) + b`` over probes approaching the boundary.

    The slope is a least-squares fit over all probes; the intercept is the
    smallest one that bounds the shallower half of the probes.  The deeper half
    then acts as a held-out check: a violation there means the distance grows
    faster than logarithmically.
    """
    probes = np.asarray(probe_points, dtype=complex).ravel()
    if probes.size < 3:
        raise InputError("need at least 3 probe points")
    d = _require_interior(domain, probes)
    d0 = float(_require_interior(domain, np.array([complex(z0)]))[0])
    ell = np.log(d0 / d)
    k = qh_distances(domain, z0, probes, resolution)
    if fixed is not None:
        a, b = map(float, fixed)
    else:
        A = np.column_stack([ell, np.ones_like(ell)])
        a = max(float(np.linalg.lstsq(A, k, rcond=None)[0][0]), 0.0)
        shallow = ell <= np.median(ell)
        b = float(np.max(k[shallow] - a * ell[shallow]))
    resid = k - (a * ell + b)
    viol = resid > tol
    verdict = "holds numerically" if not viol.any() and np.isfinite(a) else "violated"
    return QHBFit(a, b, float(max(resid.max(), 0.0)), int(viol.sum()), verdict, k, ell, d, tol)


def boundary_probes(domain: PlanarDomain, params, depths) -> np.ndarray:
    """Points at the given depths along the inward normal at each boundary parameter."""
    out = []
    for s in params:
        t = tangent_at(domain.boundary, s)
        if t is None:
            continue
        zeta = domain.boundary.point(s)
        n = 1j * t
        for rho in depths:
            z = complex(zeta + rho * n)
            if domain.contains(np.array([z]))[0]:
                out.append(z)
    return np.array(out)


@dataclass(frozen=True)
class AConditionReport:
    radii: np.ndarray
    ratios: np.ndarray
    theta0: float
    rho0: float
    verdict: str
    trend: str
    tol: float


def check_A_condition(domain: PlanarDomain, zeta, radii, n_samples: int = 100_000,
                      seed: int = 0, tol: float = 0.02) -> AConditionReport:
    """Density profile ``mes(D ∩ B(zeta, rho)) / mes B(zeta, rho)``.

    Area fractions come from one stratified pattern (jittered cells of the
    square around the ball) rescaled to every radius.  ``trend`` is
    "to-one"/"to-zero" when the ratios move monotonically toward a degenerate
    value as rho decreases.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise InputError("radii must be a nonempty list of positive numbers")
    rng = np.random.default_rng(seed)
    m = max(1, int(math.sqrt(n_samples * 4 / math.pi)))
    cell = 2.0 / m
    gx, gy = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    u = -1 + cell * (gx.ravel() + rng.random(m * m))
    v = -1 + cell * (gy.ravel() + rng.random(m * m))
    unit = u + 1j * v
    unit = unit[np.abs(unit) < 1]
    zeta = complex(zeta)
    ratios = np.array([domain.contains(zeta + rho * unit).mean() for rho in radii])
    order = np.argsort(-radii)
    r_sorted = ratios[order]
    steps = np.diff(r_sorted)
    noise = 3.0 / math.sqrt(unit.size)
    if np.all(steps >= -noise) and r_sorted[-1] > r_sorted[0]:
        trend = "to-one"
    elif np.all(steps <= noise) and r_sorted[-1] < r_sorted[0]:
        trend = "to-zero"
    else:
        trend = "flat"
    last = r_sorted[-1]
    verdict = "fails" if (last >= 1 - tol or last <= tol) else "holds"
    return AConditionReport(radii, ratios, float(ratios.max()), float(radii.max()),
                            verdict, trend, tol)


def tangent_at(curve: JordanCurve, s: float, tol: float = TANGENT_TOL):
    """Unit tangent direction at parameter ``s`` or ``None``.

    A tangent line exists when the one-sided secant lines agree (directions
    compared modulo pi, so cusps qualify).  With an exact parameterization the
    secants are taken at a fine parameter step; for bare polylines the adjacent
    samples are used and the tolerance widens to the sampling turn angle.
    """
    s = float(s)
    if curve.param is not None:
        z = complex(curve.point(s))
        delta = 1e-6
        d_minus = z - complex(curve.point(s - delta))
        d_plus = complex(curve.point(s + delta)) - z
        eff = tol
    else:
        n = curve.n
        j = int(round(s * n)) % n
        z = curve.samples[j]
        d_minus = z - curve.samples[j - 1]
        d_plus = curve.samples[(j + 1) % n] - z
        eff = max(tol, 4 * np.pi / n)
    if abs(d_minus) == 0 or abs(d_plus) == 0:
        return None
    ang = abs(np.angle(d_plus / d_minus))
    if min(ang, np.pi - ang) > eff:
        return None
    if ang > np.pi / 2:
        return d_plus / abs(d_plus)
    t = d_minus / abs(d_minus) + d_plus / abs(d_plus)
    return t / abs(t)


def nontangential_points(ray: NontangentialRay, domain: PlanarDomain) -> np.ndarray:
    """Interior points at each radius along directions inside the approach cone."""
    s = domain.boundary.locate(ray.vertex)
    t = tangent_at(domain.boundary, s)
    if t is None:
        raise UnsupportedError(f"no tangent at vertex {ray.vertex}; nontangential cone undefined")
    normal = 1j * t
    offsets = ray.directions()
    pts = np.array([ray.vertex + rho * normal * np.exp(1j * psi)
                    for rho in ray.radii for psi in offsets])
    inside = domain.contains(pts)
    if not inside.all():
        raise DomainError("approach points leave the domain; use smaller radii")
    return pts


def ray_radius(domain: PlanarDomain, theta, r_max: Optional[float] = None, steps: int = 60):
    """Exit radius along rays from ``z0`` by bisection on the membership test."""
    th = np.asarray(theta, dtype=float)
    lo = np.zeros_like(th)
    hi = np.full_like(th, r_max or 2.0 * domain.diameter)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        inside = domain.contains(domain.z0 + mid * np.exp(1j * th))
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def starlike_smoothing(domain: PlanarDomain, width: float = 0.2, n: int = 4096, modes: int = 200,
                       samples: int = 2048) -> PlanarDomain:
    """Starlike domain whose log-radius is a Gaussian-smoothed copy of ``domain``'s.

    Needs ``domain`` starlike about ``z0``; ``width`` is the smoothing scale in radians.
    """
    th = 2 * np.pi * np.arange(n) / n
    logr = np.log(ray_radius(domain, th))
    k = np.fft.fftfreq(n, 1.0 / n)
    c = np.fft.fft(logr) * np.exp(-0.5 * (k * width) ** 2) / n
    kk = np.arange(-modes, modes + 1)
    ck = c[np.mod(kk, n)]

    def radius(t):
        t = np.asarray(t, dtype=float)
        return np.exp(np.real(np.exp(1j * np.multiply.outer(t, kk)) @ ck))

    return starlike(radius, samples, center=domain.z0, name=f"{domain.name}-smoothed",
                    params={"width": width})
