"""Logarithmic capacity through the transfinite diameter.

All products are accumulated as sums of logarithms, in a fixed order, so
results do not depend on evaluation order and neither overflow nor underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InputError

Sampler = Union[Callable[[], np.ndarray], np.ndarray, Sequence[complex]]

EXCHANGE_RTOL = 1e-9
MAX_PASSES = 200


@dataclass(frozen=True)
class MassDistribution:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.points, dtype=complex))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if p.shape != w.shape:
            raise InputError("points and weights differ in length")
        if np.any(w < 0):
            raise InputError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must sum to 1")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class CapacityEstimate:
    n: int
    log_V_n: float
    tau_n: dict
    extrapolated_tau: float
    metadata: dict = field(default_factory=dict)

    @property
    def V_n(self) -> float:
        return math.exp(self.log_V_n) if self.log_V_n < 700 else math.inf

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "V_n": self.V_n,
            "log_V_n": self.log_V_n,
            "tau_n": {str(k): v for k, v in sorted(self.tau_n.items())},
            "extrapolated_tau": self.extrapolated_tau,
            "metadata": self.metadata,
        }


def log_vandermonde(points) -> float:
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 2:
        raise InputError("need at least 2 points")
    total = 0.0
    with np.errstate(divide="ignore"):
        for k in range(z.size - 1):
            total += float(np.sum(np.log(np.abs(z[k + 1:] - z[k]))))
    return total


def vandermonde_product(points) -> float:
    """``prod_{k<l} |z_k - z_l|``."""
    lv = log_vandermonde(points)
    return 0.0 if lv == -math.inf else math.exp(lv)


class _Candidates:
    """Candidate set with a log-distance oracle.

    Plain point sets use ``log|c - p|``.  Fattened sets (each centre replaced
    by a tiny circle of radius ``exp(log_eps)``) keep the radius symbolic so
    distances far below double precision still order correctly.
    """

    def __init__(self, points, log_eps=None, per_point=12):
        pts = np.asarray(points, dtype=complex).ravel()
        self.log_eps = log_eps
        if log_eps is None:
            self.points = pts
            self.size = pts.size
        else:
            self.centers = pts
            self.m = per_point
            self.offsets = np.exp(2j * np.pi * np.arange(per_point) / per_point)
            self.size = pts.size * per_point
            self.cluster = np.repeat(np.arange(pts.size), per_point)
            self.slot = np.tile(np.arange(per_point), pts.size)
            self.points = np.repeat(pts, per_point)

    def logdist(self, i: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            if self.log_eps is None:
                return np.log(np.abs(self.points - self.points[i]))
            ci, si = self.cluster[i], self.slot[i]
            out = np.log(np.abs(self.centers[self.cluster] - self.centers[ci]))
            same = self.cluster == ci
            out[same] = self.log_eps + np.log(np.abs(self.offsets[self.slot[same]] - self.offsets[si]))
            return out


def _log_V(cands: _Candidates, chosen: list) -> float:
    total = 0.0
    for a, i in enumerate(chosen[:-1]):
        total += float(np.sum(cands.logdist(i)[chosen[a + 1:]]))
    return total


def _fekete(cands: _Candidates, n: int, start: list | None = None):
    """Greedy insertion then single-point exchange passes on a candidate set."""
    chosen = list(start or [])
    S = np.zeros(cands.size)
    for i in chosen:
        S += cands.logdist(i)
    while len(chosen) < n:
        score = S.copy()
        score[chosen] = -np.inf
        if len(chosen) == 0:
            j = 0
        else:
            j = int(np.argmax(score))
        chosen.append(j)
        S += cands.logdist(j)
    passes, stagnated = 0, False
    if n >= 2:
        improved = True
        while improved:
            improved = False
            passes += 1
            if passes > MAX_PASSES:
                stagnated = True
                break
            for a in range(n):
                i = chosen[a]
                ld_i = cands.logdist(i)
                others = [c for c in chosen if c != i]
                current = float(np.sum(ld_i[others]))
                with np.errstate(invalid="ignore"):
                    without = S - ld_i
                without[i] = current
                score = without.copy()
                score[others] = -np.inf
                j = int(np.argmax(score))
                gain = float(score[j]) - current
                if j != i and gain > EXCHANGE_RTOL * max(1.0, abs(current)):
                    chosen[a] = j
                    S = without + cands.logdist(j)
                    improved = True
    return chosen, passes, stagnated


def _candidates(sampler: Sampler) -> np.ndarray:
    pts = sampler() if callable(sampler) else sampler
    pts = np.asarray(pts, dtype=complex).ravel()
    if pts.size == 0:
        raise InputError("sampler produced no points")
    return pts


def fekete_points(sampler: Sampler, n: int):
    """Approximate Fekete configuration of ``n`` points from the sampled candidates.

    Returns ``(points, V_n)``.
    """
    if n < 2:
        raise InputError("n must be at least 2")
    cands = _Candidates(_candidates(sampler))
    if cands.size < n:
        raise InputError(f"sampler has only {cands.size} candidates, need {n}")
    chosen, _, _ = _fekete(cands, n)
    pts = cands.points[chosen]
    return pts, vandermonde_product(pts)


def _tau(log_v: float, n: int) -> float:
    return math.exp(2.0 * log_v / (n * (n - 1))) if log_v > -math.inf else 0.0


def _extrapolate(ns: np.ndarray, taus: np.ndarray) -> float:
    """Limit of tau_n from the upper half of the sequence.

    Model ``log tau_n = c0 + c1 ln(n)/n + c2/n``; the ``ln n / n`` term is the
    leading correction for Fekete points on smooth arcs (exact for the circle).
    """
    keep = ns >= np.median(ns)
    n = ns[keep].astype(float)
    y = np.log(taus[keep])
    if n.size >= 3:
        A = np.column_stack([np.ones_like(n), np.log(n) / n, 1.0 / n])
    else:
        A = np.column_stack([np.ones_like(n), 1.0 / n])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(math.exp(coef[0]))


def transfinite_diameter(sampler: Sampler, n_max: int) -> CapacityEstimate:
    """tau_n for n = 3..n_max (warm-started) and the extrapolated limit."""
    if n_max < 3:
        raise InputError("n_max must be at least 3")
    pts = _candidates(sampler)
    uniq = np.unique(np.round(pts, 14))
    if uniq.size < 2:
        return CapacityEstimate(n_max, -math.inf, {n: 0.0 for n in range(3, n_max + 1)}, 0.0,
                                {"degenerate": True})
    cands = _Candidates(pts)
    if cands.size < n_max:
        raise InputError(f"sampler has only {cands.size} candidates, need {n_max}")
    chosen: list = []
    tau, stagn, total_passes = {}, [], 0
    log_v = -math.inf
    for n in range(2, n_max + 1):
        chosen, passes, stagnated = _fekete(cands, n, start=chosen)
        total_passes += passes
        if stagnated:
            stagn.append(n)
        log_v = _log_V(cands, chosen)
        if n >= 3:
            tau[n] = _tau(log_v, n)
    ns = np.array(sorted(tau))
    ts = np.array([tau[k] for k in ns])
    extrap = _extrapolate(ns, ts) if np.all(ts > 0) else 0.0
    meta = {"candidates": int(cands.size), "exchange_passes": total_passes,
            "stagnated_at": stagn, "model": "log tau = c0 + c1 ln(n)/n + c2/n"}
    return CapacityEstimate(n_max, log_v, tau, extrap, meta)


def logarithmic_potential(mass: MassDistribution, z) -> float:
    """``sum_j w_j log(1/|z - zeta_j|)``; ``+inf`` at a mass point of positive weight."""
    z = complex(z)
    d = np.abs(z - mass.points)
    pos = mass.weights > 0
    if np.any(d[pos] == 0):
        return math.inf
    return float(-np.sum(mass.weights[pos] * np.log(d[pos])))


def fattened_capacity(points, log_eps: float = -1000.0, per_point: int = 12,
                      max_n: int = 240) -> float:
    """Transfinite-diameter estimate tau_n of a finite set fattened into tiny circles."""
    pts = np.unique(np.asarray(points, dtype=complex).ravel())
    if pts.size == 0:
        return 0.0
    cands = _Candidates(pts, log_eps=log_eps, per_point=per_point)
    n = min(max(2, per_point // 2 * pts.size), max_n)
    chosen, _, _ = _fekete(cands, n)
    return _tau(_log_V(cands, chosen), n)


def is_negligible(points, threshold: float = 1e-3, log_eps: float = -1000.0) -> bool:
    """True when the finite set behaves as a capacity-zero set at this resolution."""
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size <= 1:
        return True
    return fattened_capacity(pts, log_eps) < threshold


def circle_sampler(center=0j, radius=1.0, m=2048):
    return lambda: complex(center) + radius * np.exp(2j * np.pi * np.arange(m) / m)


def segment_sampler(a=-1.0, b=1.0, m=4001):
    """Cosine-spaced points of [a, b] (endpoints included)."""
    x = np.cos(np.pi * np.arange(m) / (m - 1))[::-1]
    return lambda: (0.5 * (a + b) + 0.5 * (b - a) * x).astype(complex)


def sampler_from_json(obj: dict):
    kind = obj.get("kind")
    m = int(obj.get("m", 0) or 0)
    if kind == "circle":
        c = complex(*obj.get("center", [0.0, 0.0]))
        return circle_sampler(c, float(obj.get("radius", 1.0)), m or 2048)
    if kind == "segment":
        a, b = obj.get("endpoints", [-1.0, 1.0])
        return segment_sampler(float(a), float(b), m or 4001)
    if kind == "points":
        pts = np.asarray(obj["points"], dtype=float)
        return lambda: pts[:, 0] + 1j * pts[:, 1]
    raise InputError(f"unknown set kind {kind!r}")
