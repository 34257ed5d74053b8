"""Command-line front end: read a problem file, run the pipeline, write reports."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import beltrami, boundary, capacity, curves, disk, frontends
from .errors import InputError, QCHilbertError, StageError

SCHEMA_VERSION = 1
DEFAULT_NUMERICS = {
    "fourier_modes": disk.DEFAULT_MODES,
    "grid_size": beltrami.DEFAULT_GRID,
    "grid_extent": beltrami.DEFAULT_EXTENT,
    "tol": 1e-8,
    "max_iter": 200,
    "radii": list(disk.DEFAULT_RADII),
    "aperture": disk.DEFAULT_APERTURE,
    "seed": 0,
    "residual_tol": None,
    "check_nodes": 512,
}
KINDS = ("hilbert", "dirichlet", "neumann", "directional", "poincare", "capacity", "qhb",
         "a-condition")
COMMANDS = {
    "solve-hilbert": "hilbert", "solve-dirichlet": "dirichlet", "solve-neumann": "neumann",
    "solve-directional": "directional", "solve-poincare": "poincare", "capacity": "capacity",
    "qhb-check": "qhb", "a-condition": "a-condition",
}


# --------------------------------------------------------------------------
# problem files


@dataclass
class ProblemSpec:
    kind: str
    domain: Optional[dict] = None
    coefficient: Optional[dict] = None
    data: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        out = {"version": self.version, "kind": self.kind}
        if self.domain is not None:
            out["domain"] = self.domain
        if self.coefficient is not None:
            out["coefficient"] = self.coefficient
        out.update(self.data)
        out["numerics"] = {k: v for k, v in self.numerics.items() if v != DEFAULT_NUMERICS.get(k)}
        if self.outputs:
            out["outputs"] = self.outputs
        return out


def _line_of(text: str, key: str) -> str:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f"line {i}: "
    return ""


def _power_of_two(x) -> bool:
    return isinstance(x, int) and x > 0 and not x & (x - 1)


def problem_from_dict(obj: dict, text: str = "", kind: Optional[str] = None) -> ProblemSpec:
    """Validate a decoded problem; ``kind`` (from the subcommand) must agree with the file."""
    if not isinstance(obj, dict):
        raise InputError("problem file must hold a JSON object")
    version = obj.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InputError(f"{_line_of(text, 'version')}unsupported schema version {version!r}")
    file_kind = obj.get("kind", kind)
    if file_kind not in KINDS:
        raise InputError(f"{_line_of(text, 'kind')}unknown problem kind {file_kind!r}")
    if kind is not None and file_kind != kind:
        raise InputError(f"{_line_of(text, 'kind')}problem kind {file_kind!r} does not match "
                         f"the subcommand ({kind!r})")
    num = dict(DEFAULT_NUMERICS)
    given = obj.get("numerics", {}) or {}
    unknown = set(given) - set(DEFAULT_NUMERICS)
    if unknown:
        raise InputError(f"{_line_of(text, sorted(unknown)[0])}unknown numerics key {sorted(unknown)[0]!r}")
    num.update(given)
    for key in ("fourier_modes", "grid_size"):
        if not _power_of_two(num[key]):
            raise InputError(f"{_line_of(text, key)}{key} must be a power of two, got {num[key]!r}")
    if not 0 < float(num["tol"]) < 1:
        raise InputError(f"{_line_of(text, 'tol')}tol must lie in (0, 1)")
    if not 0 <= float(num["aperture"]) < math.pi:
        raise InputError(f"{_line_of(text, 'aperture')}aperture must lie in [0, pi)")
    radii = [float(r) for r in num["radii"]]
    if len(radii) < 5 or any(not 0 < r < 1 for r in radii):
        raise InputError(f"{_line_of(text, 'radii')}radii need at least 5 values in (0, 1)")
    num["radii"] = radii
    if file_kind not in ("capacity",) and "domain" not in obj:
        raise InputError(f"{file_kind} problem needs a 'domain'")
    data = {k: v for k, v in obj.items()
            if k not in ("version", "kind", "domain", "coefficient", "numerics", "outputs")}
    return ProblemSpec(file_kind, obj.get("domain"), obj.get("coefficient"), data, num,
                       obj.get("outputs", {}) or {}, version)


def parse_problem(path, kind: Optional[str] = None) -> ProblemSpec:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"problem file not found: {path}")
    text = p.read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return problem_from_dict(obj, text, kind)


# --------------------------------------------------------------------------
# running


@dataclass
class RunReport:
    kind: str
    verdict: str
    residuals: dict
    exceptional: list
    details: dict
    timings: dict = field(default_factory=dict)
    field_rows: Optional[list] = None
    field_header: tuple = ()

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        """Everything but timings, so repeated runs serialize identically."""
        return {"kind": self.kind, "verdict": self.verdict, "residuals": self.residuals,
                "exceptional": self.exceptional, "details": self.details}

    def dumps(self) -> str:
        return json.dumps(_plain(self.to_json()), indent=2, sort_keys=True) + "\n"

    def text(self) -> str:
        lines = [f"{self.kind}: {self.verdict.upper()}"]
        for k, v in sorted(self.residuals.items()):
            lines.append(f"  {k}: {v:.3e}" if isinstance(v, float) else f"  {k}: {v}")
        if self.exceptional:
            lines.append(f"  exceptional: {len(self.exceptional)} parameter(s)")
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.field_header)
        for row in self.field_rows or ():
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


class _Clock:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def stage(self, name):
        t = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except QCHilbertError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - t


def _point(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]) if len(v) > 1 else 0.0)
    return complex(v)


def _coefficient(spec: ProblemSpec):
    """``(mu, matrix)``: a BeltramiCoefficient or None, and an EllipticMatrix or None."""
    c = spec.coefficient
    if c is None or (c.get("kind") == "constant" and _point(c.get("value", 0)) == 0):
        return None, None
    if c.get("kind") == "matrix":
        def entry(key):
            v = c[key]
            return float(v) if not isinstance(v, str) else (
                lambda z, e=v: np.real(boundary.eval_expr(e, np.angle(z), z)))
        A = frontends.EllipticMatrix.constant(entry("a11"), entry("a12"), entry("a22"))
        mu_f = frontends.mu_from_matrix(A)
        probe = beltrami.grid_points(64, 1.0).ravel()
        return beltrami.BeltramiCoefficient.from_callable(mu_f, probe, None, "from matrix"), A
    return beltrami.coefficient_from_json(c), None


def _interior_rows(domain, fn, count=33):
    pts = beltrami.interior_samples(domain, count, margin=0.02)
    vals = fn(pts)
    return [(p.real, p.imag) + tuple(v) for p, v in zip(pts, vals)]


def _table_residuals(sol) -> dict:
    out = {}
    for t in sol.tables:
        out[f"{t.name}_max"] = t.max_residual
        out[f"{t.name}_pass_fraction"] = t.pass_fraction
    return out


def _boundary(spec, key, n, curve, default=None):
    obj = spec.data.get(key, default)
    if obj is None:
        raise InputError(f"problem needs boundary data {key!r}")
    return boundary.boundary_from_json(obj, n, curve)


def run(spec: ProblemSpec) -> RunReport:
    """Execute a parsed problem.  Stage failures surface as StageError."""
    clock = _Clock()
    num = spec.numerics
    N, n, L = int(num["fourier_modes"]), int(num["grid_size"]), float(num["grid_extent"])
    radii, aperture = tuple(num["radii"]), float(num["aperture"])
    runner = _RUNNERS[spec.kind]
    report = runner(spec, clock, N, n, L, radii, aperture)
    report.timings = clock.timings
    return report


def _run_hilbert(spec, clock, N, n, L, radii, aperture):
    with clock.stage("input"):
        domain = curves.domain_from_json(spec.domain)
        M = disk.NODE_FACTOR * N
        lam_b = _boundary(spec, "lambda", M, domain.boundary, 1.0)
        phi = _boundary(spec, "phi", M, domain.boundary)
        part = boundary.partition_from_json(spec.data.get("partition"), lam_b)
        lam_b = lam_b.with_values(lam_b.values, exceptional=part.exceptional) \
            if lam_b.source is None else boundary.BoundaryFunction(
                lam_b.params, lam_b.values, lam_b.curve, lam_b.source, part.exceptional)
        lam = boundary.certify_cbv(lam_b, part)
        mu, _ = _coefficient(spec)
    unit = np.max(np.abs(np.abs(domain.boundary.samples) - 1)) < 1e-9 and domain.z0 == 0
    rtol = num_tol(spec, mu)
    if mu is None and unit:
        with clock.stage("hilbert"):
            sol = disk.solve_hilbert_disk(lam, phi, N, rtol, aperture, radii)
        rep = sol.report
        res = {"boundary_residual": rep.max_residual, "pass_fraction": rep.pass_fraction}
        exc = [float(s) for s in rep.params[rep.exceptional]]
        details = {"modes": N, "nodes": M, "alpha_jumps": sol.metadata["alpha_jumps"],
                   "exp_truncation_error": sol.metadata["exp_truncation_error"],
                   "taylor_head": [complex(c) for c in sol.f.taylor[:8]]}
        ok = rep.max_residual <= rtol
        rows = _interior_rows(domain, lambda z: np.stack([sol.f(z).real, sol.f(z).imag], -1))
    else:
        mu = mu or beltrami.BeltramiCoefficient.constant(0.0)
        with clock.stage("pipeline"):
            sol = beltrami.assemble_regular_solution(
                domain, mu, lam, phi, None, N, n, L, float(spec.numerics["tol"]),
                aperture, radii, int(spec.numerics["check_nodes"]))
        r = sol.report
        res = {"boundary_residual": r["boundary_residual"],
               "beltrami_relative": r["beltrami_relative"]}
        exc = r["exceptional_params"]
        details = {k: v for k, v in r.items() if k not in ("exceptional_params",)}
        ok = r["boundary_residual"] <= rtol and r["beltrami_relative"] <= rtol
        rows = _interior_rows(domain, lambda z: np.stack([sol.f(z).real, sol.f(z).imag], -1))
    return RunReport("hilbert", "pass" if ok else "fail", res, exc, details, field_rows=rows,
                     field_header=("x", "y", "u", "v"))


def num_tol(spec, mu) -> float:
    t = spec.numerics.get("residual_tol")
    if t is not None:
        return float(t)
    return 1e-6 if mu is None else 1e-2


def _direction(spec, domain, M):
    obj = spec.data.get("nu", "normal")
    if obj == "normal":
        return frontends.normal_field(domain, M)
    fn = boundary.boundary_from_json(obj, M, domain.boundary)
    part = boundary.partition_from_json(spec.data.get("partition"), fn)
    fn = boundary.BoundaryFunction(fn.params, fn.values, fn.curve, fn.source, part.exceptional)
    return boundary.certify_cbv(fn, part)


def _solution_report(kind, sol, details=None, extra_ok=True):
    ok = sol.passed and extra_ok
    exc = sorted({float(t.params[i]) for t in sol.tables for i in t.exceptional})
    det = {"tables": [t.to_json() for t in sol.tables]}
    det.update({k: v for k, v in sol.report.items() if k != "exceptional_params"})
    det.update(details or {})
    rows = [(z.real, z.imag, v) for z, v in zip(sol.grid, sol.values)]
    return RunReport(kind, "pass" if ok else "fail", _table_residuals(sol), exc, det,
                     field_rows=rows, field_header=("x", "y", "u"))


def _run_dirichlet(spec, clock, N, n, L, radii, aperture):
    with clock.stage("input"):
        domain = curves.domain_from_json(spec.domain)
        phi = _boundary(spec, "phi", 4 * N, domain.boundary)
        mu, _ = _coefficient(spec)
    with clock.stage("solve"):
        sol = frontends.solve_dirichlet(domain, phi, mu, None, N, n, L,
                                        int(spec.numerics["check_nodes"]),
                                        spec.numerics.get("residual_tol"), aperture, radii)
    return _solution_report("dirichlet", sol)


def _run_directional(spec, clock, N, n, L, radii, aperture, kind="directional"):
    with clock.stage("input"):
        domain = curves.domain_from_json(spec.domain)
        M = 4 * N
        phi = _boundary(spec, "phi", M, domain.boundary)
        nu = _direction(spec, domain, M)
        mu, A = _coefficient(spec)
        tol = spec.numerics.get("residual_tol")
        nodes = int(spec.numerics["check_nodes"])
    with clock.stage("solve"):
        if kind == "neumann":
            sol = frontends.solve_neumann(domain, phi, None, N, nodes, tol or frontends.TABLE_TOL,
                                          aperture, radii)
        elif A is not None or mu is not None:
            A = A or frontends.matrix_from_mu(mu)
            sol = frontends.solve_a_harmonic_directional(domain, A, nu, phi, None, N, n, L, nodes,
                                                         tol or 5e-2, aperture)
        elif kind == "poincare":
            a = spec.data.get("a")
            pspec = frontends.PoincareProblemSpec(
                domain, phi, "poincare", nu,
                None if a is None else boundary.boundary_from_json(a, M, domain.boundary),
                None if spec.data.get("b") is None else
                boundary.boundary_from_json(spec.data["b"], M, domain.boundary))
            sol = frontends.solve_poincare(pspec, N=N, nodes=nodes, tol=tol or frontends.TABLE_TOL,
                                           aperture=aperture, radii=radii)
        else:
            sol = frontends.solve_directional(domain, nu, phi, None, N, nodes,
                                              tol or frontends.TABLE_TOL, aperture, radii)
    return _solution_report(kind, sol)


def _run_capacity(spec, clock, N, n, L, radii, aperture):
    with clock.stage("input"):
        sampler = capacity.sampler_from_json(spec.data.get("set", {}))
        n_max = int(spec.data.get("n_max", 20))
    with clock.stage("capacity"):
        est = capacity.transfinite_diameter(sampler, n_max)
    taus = [est.tau_n[k] for k in sorted(est.tau_n)]
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(taus, taus[1:]))
    expected = spec.data.get("expected")
    res = {"extrapolated_tau": est.extrapolated_tau, "monotone": monotone}
    ok = monotone
    if expected is not None:
        rel = abs(est.extrapolated_tau - float(expected)) / float(expected)
        res["relative_error"] = rel
        ok = ok and rel <= float(spec.data.get("rtol", 0.01))
    return RunReport("capacity", "pass" if ok else "fail", res, [], est.to_json())


def _run_qhb(spec, clock, N, n, L, radii, aperture):
    with clock.stage("input"):
        domain = curves.domain_from_json(spec.domain)
        z0 = _point(spec.data.get("z0", [domain.z0.real, domain.z0.imag]))
        pr = spec.data.get("probes", {}) or {}
        count = int(pr.get("count", 16))
        depths = [float(d) for d in pr.get("depths", [0.2, 0.1, 0.05, 0.025, 0.0125])]
        probes = curves.boundary_probes(domain, np.arange(count) / count + 0.5 / count, depths)
        resolution = float(spec.data.get("resolution", 1 / 128))
    with clock.stage("qhb"):
        fit = curves.check_qhb_condition(domain, z0, probes, resolution)
    res = {"a": fit.a, "b": fit.b, "max_excess": fit.max_residual, "violations": fit.violations}
    ok = fit.holds and math.isfinite(fit.a) and math.isfinite(fit.b)
    return RunReport("qhb", "pass" if ok else "fail", res, [],
                     {"verdict": fit.verdict, "probes": int(probes.size), "tol": fit.tol})


def _run_a_condition(spec, clock, N, n, L, radii, aperture):
    with clock.stage("input"):
        domain = curves.domain_from_json(spec.domain)
        zeta = _point(spec.data.get("zeta", [1.0, 0.0]))
        rhos = [float(r) for r in spec.data.get("radii", [0.2, 0.1, 0.05, 0.025])]
    with clock.stage("a-condition"):
        rep = curves.check_A_condition(domain, zeta, rhos, seed=int(spec.numerics["seed"]))
    res = {"ratios": [float(r) for r in rep.ratios], "trend": rep.trend}
    return RunReport("a-condition", "pass", res, [],
                     {"condition": rep.verdict, "theta0": rep.theta0, "rho0": rep.rho0,
                      "radii": rhos})


_RUNNERS = {
    "hilbert": _run_hilbert,
    "dirichlet": _run_dirichlet,
    "directional": _run_directional,
    "neumann": lambda *a: _run_directional(*a, kind="neumann"),
    "poincare": lambda *a: _run_directional(*a, kind="poincare"),
    "capacity": _run_capacity,
    "qhb": _run_qhb,
    "a-condition": _run_a_condition,
}


# --------------------------------------------------------------------------
# fixtures

_UNIT = {"parametric": {"kind": "circle", "params": {"center": [0.0, 0.0], "radius": 1.0}}}
_THREE = {"parametric": {"kind": "three_disks",
                         "params": {"centers": [[0.0, 0.0], [1.0, 1.0], [1.0, -1.0]], "radius": 1.0}}}


def make_fixture(name: str) -> dict:
    """Problem files of a built-in suite, as ``{file name: problem dict}``."""
    if name == "unit-disk":
        return {
            "domain.json": _UNIT,
            "hilbert-identity.json": {"version": 1, "kind": "hilbert", "domain": _UNIT,
                                      "lambda": "1", "phi": "cos(theta)"},
            "hilbert-negative.json": {"version": 1, "kind": "hilbert", "domain": _UNIT,
                                      "lambda": "-1", "phi": "cos(theta)"},
            "dirichlet-cos.json": {"version": 1, "kind": "dirichlet", "domain": _UNIT,
                                   "phi": "cos(theta)"},
            "neumann-cos.json": {"version": 1, "kind": "neumann", "domain": _UNIT,
                                 "phi": "cos(theta)"},
            "directional-sin.json": {"version": 1, "kind": "directional", "domain": _UNIT,
                                     "nu": {"kind": "expr", "expr": "-exp(i*theta)"},
                                     "phi": "sin(theta)"},
            "poincare-b2.json": {"version": 1, "kind": "poincare", "domain": _UNIT, "nu": "normal",
                                 "a": "0", "b": "2", "phi": "2*cos(theta)"},
            "capacity-circle.json": {"version": 1, "kind": "capacity",
                                     "set": {"kind": "circle", "center": [0, 0], "radius": 2.0},
                                     "n_max": 30, "expected": 2.0},
        }
    if name == "three-disks":
        return {
            "domain.json": _THREE,
            "qhb.json": {"version": 1, "kind": "qhb", "domain": _THREE, "z0": [-0.2, 0.0]},
            "a-condition.json": {"version": 1, "kind": "a-condition", "domain": _THREE,
                                 "zeta": [1.0, 0.0], "radii": [0.2, 0.1, 0.05, 0.025]},
        }
    if name == "constant-mu":
        mu = {"kind": "constant", "value": [0.3, 0.0]}
        return {
            "hilbert-mu.json": {"version": 1, "kind": "hilbert", "domain": _UNIT, "coefficient": mu,
                                "lambda": "1", "phi": "cos(theta)"},
            "dirichlet-mu.json": {"version": 1, "kind": "dirichlet", "domain": _UNIT,
                                  "coefficient": mu, "phi": "cos(theta)"},
        }
    if name == "matrix":
        A = {"kind": "matrix", "a11": 1 / 3, "a12": 0.0, "a22": 3.0}
        return {
            "directional-matrix.json": {"version": 1, "kind": "directional", "domain": _UNIT,
                                        "coefficient": A, "nu": "normal", "phi": "cos(theta)"},
        }
    raise InputError(f"unknown fixture {name!r}; choose from unit-disk, three-disks, "
                     "constant-mu, matrix")


def write_fixture(name: str, out: Path) -> list:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, obj in sorted(make_fixture(name).items()):
        (out / fname).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        written.append(str(out / fname))
    return written


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qchilbert",
                                     description="Boundary value problems for Beltrami equations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--input", required=True, help="problem JSON file")
        p.add_argument("--out", help="directory for report.json, field.csv and timings.json")
        p.add_argument("--tol", type=float, help="iteration tolerance")
        p.add_argument("--modes", type=int, help="Fourier modes (power of two)")
        p.add_argument("--grid", type=int, help="grid size (power of two)")
        p.add_argument("--seed", type=int, help="seed for sampled quantities")
        p.add_argument("--report", choices=("json", "text"), default="json")
    p = sub.add_parser("fixtures")
    p.add_argument("name")
    p.add_argument("--out", default=".")
    return parser


def _apply_flags(spec: ProblemSpec, args) -> ProblemSpec:
    overrides = {"tol": args.tol, "fourier_modes": args.modes, "grid_size": args.grid,
                 "seed": args.seed}
    obj = spec.to_json()
    num = dict(spec.numerics)
    num.update({k: v for k, v in overrides.items() if v is not None})
    obj["numerics"] = {k: v for k, v in num.items() if k in DEFAULT_NUMERICS}
    return problem_from_dict(obj, "", spec.kind)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fixtures":
            for path in write_fixture(args.name, Path(args.out)):
                print(path)
            return 0
        spec = _apply_flags(parse_problem(args.input, COMMANDS[args.command]), args)
        report = run(spec)
    except QCHilbertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.dumps())
        if report.field_rows is not None:
            (out / "field.csv").write_text(report.csv())
        (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(report.dumps() if args.report == "json" else report.text())
    return 0 if report.passed else 3


if __name__ == "__main__":
    sys.exit(main())
