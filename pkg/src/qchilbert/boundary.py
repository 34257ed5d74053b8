"""Sampled boundary functions, countable-bounded-variation structure and
argument (phase) functions of unimodular coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .capacity import is_negligible
from .curves import JordanCurve, circle
from .errors import CertificationError, InputError

UNIMODULAR_TOL = 1e-6
_UNIT_CIRCLE: Optional[JordanCurve] = None


def unit_circle() -> JordanCurve:
    global _UNIT_CIRCLE
    if _UNIT_CIRCLE is None:
        _UNIT_CIRCLE = circle(0j, 1.0, 512)
    return _UNIT_CIRCLE


def _in_open_arc(s, a, b):
    """Membership of parameters in the cyclic open interval (a, b), b - a <= 1."""
    pos = np.mod(np.asarray(s, dtype=float) - a, 1.0)
    eps = 1e-12  # endpoints computed as a + 1 may round past b
    inside = (pos > eps) & (pos < 1.0 - eps)
    return inside & (pos < (b - a) - eps) if b - a < 1 else inside


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Values at increasing parameters ``s`` in ``[0, 1)`` on a Jordan curve.

    ``source`` (parameter -> value) is kept when the function came from a
    formula, so refinement checks can resample it.  ``exceptional`` lists
    parameters where the function may be undefined or jump.
    """

    params: np.ndarray
    values: np.ndarray
    curve: Optional[JordanCurve] = None
    source: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    exceptional: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.params, dtype=float).ravel()
        v = np.asarray(self.values).ravel()
        if s.shape != v.shape:
            raise InputError("params and values differ in length")
        if s.size and (s[0] < 0 or s[-1] >= 1 or np.any(np.diff(s) <= 0)):
            raise InputError("sample parameters must be strictly increasing in [0, 1)")
        object.__setattr__(self, "params", s)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "exceptional", tuple(sorted(float(np.mod(e, 1.0))
                                                             for e in self.exceptional)))
        if self.curve is None:
            object.__setattr__(self, "curve", unit_circle())

    @classmethod
    def from_callable(cls, fn, n: int, curve=None, exceptional=(), of="theta"):
        """Sample ``fn`` at ``n`` equispaced parameters; ``of`` = "theta" or "s"."""
        s = np.arange(n) / n

        if of == "theta":
            def source(p):
                return fn(2 * np.pi * np.asarray(p))
        else:
            source = fn
        with np.errstate(all="ignore"):
            vals = np.asarray(source(s))
        if vals.ndim == 0:
            vals = np.full(n, vals)
        return cls(s, vals, curve, source, exceptional)

    @property
    def n(self) -> int:
        return self.params.size

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * self.params

    @property
    def points(self) -> np.ndarray:
        return self.curve.point(self.params)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))

    def is_equispaced(self) -> bool:
        return np.allclose(self.params, np.arange(self.n) / self.n, atol=1e-12)

    def exceptional_mask(self, band: float = 0.0) -> np.ndarray:
        """Samples within ``band`` (parameter units) of an exceptional parameter."""
        mask = np.zeros(self.n, dtype=bool)
        for e in self.exceptional:
            d = np.abs(np.mod(self.params - e + 0.5, 1.0) - 0.5)
            mask |= d <= band + 1e-12
        return mask

    def with_values(self, values, exceptional=None) -> "BoundaryFunction":
        return BoundaryFunction(self.params, values, self.curve, None,
                                self.exceptional if exceptional is None else exceptional)

    def at(self, s) -> np.ndarray:
        """Periodic linear interpolation (or the source formula when known)."""
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        if self.source is not None:
            return np.asarray(self.source(s))
        p = np.concatenate([self.params, [self.params[0] + 1.0]])
        v = np.concatenate([self.values, [self.values[0]]])
        s = np.where(s < p[0], s + 1.0, s)
        if np.iscomplexobj(v):
            return np.interp(s, p, v.real) + 1j * np.interp(s, p, v.imag)
        return np.interp(s, p, v)

    def resample(self, n: int) -> "BoundaryFunction":
        s = np.arange(n) / n
        return BoundaryFunction(s, self.at(s), self.curve, self.source, self.exceptional)


@dataclass(frozen=True)
class ArcPartition:
    """Disjoint open parameter arcs ``(a, b)`` (cyclic, ``a < b <= a + 1``) and
    the exceptional parameters left over."""

    arcs: tuple
    exceptional: tuple

    def __post_init__(self):
        arcs = tuple((float(a), float(b)) for a, b in self.arcs)
        for a, b in arcs:
            if not (a < b <= a + 1 + 1e-15):
                raise InputError(f"bad arc ({a}, {b})")
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "exceptional",
                           tuple(sorted(float(np.mod(e, 1.0)) for e in self.exceptional)))
        probe = np.array([np.mod(a + (b - a) * t, 1.0) for a, b in arcs for t in (0.25, 0.5, 0.75)])
        for i, (a, b) in enumerate(arcs):
            for j, (c, d) in enumerate(arcs):
                if i < j and (np.any(_in_open_arc(probe[3 * j:3 * j + 3], a, b))
                              or np.any(_in_open_arc(probe[3 * i:3 * i + 3], c, d))
                              or _in_open_arc(c, a, b) or _in_open_arc(a, c, d)):
                    raise InputError(f"arcs {i} and {j} overlap")

    @classmethod
    def from_breakpoints(cls, breaks: Sequence[float]) -> "ArcPartition":
        b = sorted(float(np.mod(x, 1.0)) for x in breaks)
        if not b:
            raise InputError("need at least one breakpoint")
        arcs = [(b[i], b[i + 1]) for i in range(len(b) - 1)] + [(b[-1], b[0] + 1.0)]
        return cls(tuple(arcs), tuple(b))

    @classmethod
    def full(cls, cut: float = 0.0) -> "ArcPartition":
        return cls.from_breakpoints([cut])

    def arc_index(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = -np.ones(s.shape, dtype=int)
        for i, (a, b) in enumerate(self.arcs):
            out[_in_open_arc(s, a, b)] = i
        return out

    def arc_samples(self, fn: BoundaryFunction, i: int) -> np.ndarray:
        """Sample indices of arc ``i`` in order of increasing position along the arc."""
        a, b = self.arcs[i]
        idx = np.nonzero(_in_open_arc(fn.params, a, b))[0]
        pos = np.mod(fn.params[idx] - a, 1.0)
        return idx[np.argsort(pos, kind="stable")]


@dataclass(frozen=True, eq=False)
class CBVFunction:
    base: BoundaryFunction
    partition: ArcPartition
    per_arc_variation: tuple
    sup_variation: float


@dataclass(frozen=True, eq=False)
class ArgumentFunction:
    alpha: BoundaryFunction
    bound: float
    partition: ArcPartition
    lam: CBVFunction

    def jumps(self):
        """``(parameter, alpha(s+) - alpha(s-))`` at the exceptional parameters."""
        return one_sided_jumps(self.alpha, self.partition)


def _edge_limit(fn: BoundaryFunction, idx, e) -> float:
    s = fn.params[idx]
    x = np.mod(s - e + 0.5, 1.0) - 0.5
    y = fn.values[idx].real
    return float(np.polyval(np.polyfit(x, y, 2), 0.0))


def one_sided_jumps(fn: BoundaryFunction, partition: ArcPartition, tiny: float = 1e-9):
    """Jumps ``f(s+) - f(s-)`` at exceptional parameters bounded by two arcs.

    One-sided limits come from quadratic extrapolation over the three samples
    of each adjacent arc nearest the point.  Jumps below ``tiny`` are dropped.
    """
    out = []
    for e in partition.exceptional:
        left = right = None
        for i, (a, b) in enumerate(partition.arcs):
            idx = partition.arc_samples(fn, i)
            if idx.size < 3:
                continue
            if abs(np.mod(b - e + 0.5, 1.0) - 0.5) < 1e-12:
                left = _edge_limit(fn, idx[-3:], e)
            if abs(np.mod(a - e + 0.5, 1.0) - 0.5) < 1e-12:
                right = _edge_limit(fn, idx[:3], e)
        if left is not None and right is not None and np.isfinite(right - left) \
                and abs(right - left) > tiny:
            out.append((e, float(right - left)))
    return out


def total_variation(fn: BoundaryFunction, interval=None) -> float:
    """Chord-sum variation over the samples.

    ``interval=None`` is the whole closed curve (cyclic sum); ``(a, b)`` is an
    open parameter arc, summed without wrap.
    """
    v = fn.values
    if interval is None:
        return float(np.sum(np.abs(np.roll(v, -1) - v)))
    a, b = interval
    idx = np.nonzero(_in_open_arc(fn.params, a, b))[0]
    if idx.size < 2:
        return 0.0
    idx = idx[np.argsort(np.mod(fn.params[idx] - a, 1.0), kind="stable")]
    return float(np.sum(np.abs(np.diff(v[idx]))))


def _arc_growth(fn: BoundaryFunction, arc) -> tuple[float, float]:
    """Variation on an arc at the given resolution and at a 4x finer/coarser one."""
    if fn.source is not None:
        fine = fn.resample(4 * fn.n)
        return total_variation(fn, arc), total_variation(fine, arc)
    coarse = BoundaryFunction(fn.params[::4], fn.values[::4], fn.curve)
    return total_variation(coarse, arc), total_variation(fn, arc)


def certify_cbv(fn: BoundaryFunction, partition: ArcPartition,
                growth_limit: float = 1.5) -> CBVFunction:
    """Check finite variation on every arc and negligibility of the leftovers.

    Blow-up is detected by a refinement test: if the sampled variation keeps
    growing by more than ``growth_limit`` under 4x refinement the arc fails.
    """
    idx = partition.arc_index(fn.params)
    loose = fn.params[idx < 0]
    exc = np.array(partition.exceptional)
    for s in loose:
        if exc.size == 0 or np.min(np.abs(np.mod(exc - s + 0.5, 1.0) - 0.5)) > 1e-12:
            raise InputError(f"sample at s={s} is in no arc and not declared exceptional")
    variations = []
    for i, arc in enumerate(partition.arcs):
        v0, v1 = _arc_growth(fn, arc)
        if not np.isfinite(v1) or (v1 > growth_limit * v0 and v1 - v0 > 1.0):
            raise CertificationError(
                f"variation on arc {i} {arc} grows under refinement ({v0:.3g} -> {v1:.3g})",
                arc=i)
        variations.append(total_variation(fn, arc))
    pts = fn.curve.point(np.array(partition.exceptional)) if partition.exceptional else []
    if not is_negligible(pts):
        raise CertificationError("exceptional set is not negligible")
    return CBVFunction(fn, partition, tuple(variations), float(max(variations, default=0.0)))


def argument_function(lam: CBVFunction) -> ArgumentFunction:
    """Arc-wise continuous phase of a unimodular coefficient.

    On each arc the phase is unwrapped along the samples, then shifted by a
    multiple of 2 pi so that its value at the sample nearest the arc midpoint
    lies in (-pi, pi] (ties go to +pi).  Exceptional samples get 0.
    """
    fn, part = lam.base, lam.partition
    idx = part.arc_index(fn.params)
    ok = idx >= 0
    mod = np.abs(fn.values[ok])
    if np.any(np.abs(mod - 1) > UNIMODULAR_TOL):
        bad = fn.params[ok][np.argmax(np.abs(mod - 1))]
        raise InputError(f"coefficient is not unimodular (e.g. at s={bad})")
    alpha = np.zeros(fn.n)
    for i, (a, b) in enumerate(part.arcs):
        order = part.arc_samples(fn, i)
        if order.size == 0:
            continue
        v = fn.values[order].astype(complex)
        steps = np.angle(v[1:] / v[:-1])
        phase = np.angle(v[0]) + np.concatenate([[0.0], np.cumsum(steps)])
        mid = np.mod(0.5 * (a + b), 1.0)
        pos = np.mod(fn.params[order] - a, 1.0)
        m = int(np.argmin(np.abs(pos - np.mod(mid - a, 1.0))))
        shift = _principal_shift(phase[m])
        alpha[order] = phase - shift
    # variation of lambda on an arc bounds the excursion of alpha from its midpoint value
    bound = math.pi + 1.5 * math.pi * lam.sup_variation
    out = BoundaryFunction(fn.params, alpha, fn.curve, None, part.exceptional)
    return ArgumentFunction(out, bound, part, lam)


def _principal_shift(x: float) -> float:
    """Multiple of 2 pi taking ``x`` into (-pi, pi], ties to +pi."""
    k = math.ceil((x - math.pi) / (2 * math.pi))
    r = x - 2 * math.pi * k
    if r <= -math.pi + 1e-9:
        k -= 1
    return 2 * math.pi * k


# --------------------------------------------------------------------------
# JSON ingestion

_EXPR_NAMES = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sign", "arctan2", "where",
    "real", "imag", "conj", "angle", "pi", "sinh", "cosh", "tanh", "floor", "mod")}


def eval_expr(expr: str, theta: np.ndarray, point: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluate a formula in ``theta`` (and ``z``, ``x``, ``y`` for the boundary point)."""
    if point is None:
        point = np.exp(1j * theta)
    env = dict(_EXPR_NAMES, theta=theta, t=theta, z=point, x=point.real, y=point.imag,
               i=1j, j=1j, e=np.e)
    try:
        out = eval(compile(expr, "<expr>", "eval"), {"__builtins__": {}}, env)
    except Exception as exc:  # noqa: BLE001 - user formula
        raise InputError(f"cannot evaluate expression {expr!r}: {exc}") from exc
    out = np.asarray(out)
    return np.broadcast_to(out, theta.shape).copy() if out.shape != theta.shape else out


def boundary_from_json(obj, n: int, curve: Optional[JordanCurve] = None) -> BoundaryFunction:
    """Boundary data descriptor: ``expr``, ``samples`` or ``piecewise``.

    Parameters in descriptors are angles ``theta`` in radians, mapped to the
    curve parameter ``s = theta / 2 pi``.
    """
    if isinstance(obj, (int, float)):
        obj = {"kind": "expr", "expr": repr(float(obj))}
    if isinstance(obj, str):
        obj = {"kind": "expr", "expr": obj}
    kind = obj.get("kind")
    curve = curve or unit_circle()
    exc = tuple(float(t) / (2 * np.pi) for t in obj.get("exceptional", ()))
    if kind == "expr":
        expr = obj["expr"]

        def source(s):
            s = np.asarray(s, dtype=float)
            return eval_expr(expr, 2 * np.pi * s, curve.point(s))

        return BoundaryFunction.from_callable(source, n, curve, exc, of="s")
    if kind == "samples":
        th = np.asarray(obj["theta"], dtype=float)
        vals = np.asarray(obj["values"], dtype=float)
        vals = vals[:, 0] + 1j * vals[:, 1] if vals.ndim == 2 else vals
        s = np.mod(th / (2 * np.pi), 1.0)
        order = np.argsort(s)
        return BoundaryFunction(s[order], vals[order], curve, None, exc).resample(n)
    if kind == "piecewise":
        pieces = obj["arcs"]

        def source(s):
            s = np.asarray(s, dtype=float)
            out = np.zeros(s.shape, dtype=complex)
            for piece in pieces:
                a = float(piece["from"]) / (2 * np.pi)
                b = float(piece["to"]) / (2 * np.pi)
                m = _in_open_arc(s, a, b)
                val = piece["value"]
                if isinstance(val, str):
                    out[m] = eval_expr(val, 2 * np.pi * s[m], curve.point(s[m]))
                elif isinstance(val, (list, tuple)):
                    out[m] = complex(val[0], val[1])
                else:
                    out[m] = float(val)
            return out if np.any(out.imag) else out.real

        return BoundaryFunction.from_callable(source, n, curve, exc, of="s")
    raise InputError(f"unknown boundary data kind {kind!r}")


def partition_from_json(obj, fn: BoundaryFunction) -> ArcPartition:
    """``{"breakpoints": [theta, ...]}`` or explicit ``{"arcs": [[a, b], ...], "exceptional": [...]}``
    (angles in radians); default is one arc cut at the function's first exceptional
    parameter, or at theta = 0."""
    if obj is None:
        return ArcPartition.from_breakpoints(fn.exceptional or (0.0,))
    if "breakpoints" in obj:
        return ArcPartition.from_breakpoints([float(t) / (2 * np.pi) for t in obj["breakpoints"]])
    arcs = [(float(a) / (2 * np.pi), float(b) / (2 * np.pi)) for a, b in obj["arcs"]]
    return ArcPartition(tuple(arcs), tuple(float(t) / (2 * np.pi) for t in obj.get("exceptional", ())))
