"""``invpress`` command line: analyze, controlset, pressure, estimate, verify.

Exit codes: 0 success, 1 property-suite failure, 2 input error, 3 violated
hypothesis, 4 infeasible discretization, 5 internal invariant failure.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import numerics, oracle, verify
from .errors import InputError, InvPressError
from .potential import Constant, from_dict as potential_from_dict
from .pressure import closed_form_pressure, entropy, unstable_sum
from .regions import Box, HPolytope, control_set_estimate
from .spanning import SpanningConfig, pressure_upper_estimate
from .system import LinearSystem

SCHEMA_VERSION = 1
CSV_HEADER = ["tau", "value", "kind", "dt", "alphabet_size", "grid_points", "contained"]

_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_vector = {"type": "array", "minItems": 1, "items": {"type": "number"}}
_flags = {"oneOf": [{"type": "boolean"}, {"type": "array", "items": {"type": "boolean"}}]}
_region = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["box"],
            "properties": {
                "box": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["lo", "hi"],
                    "properties": {"lo": _vector, "hi": _vector, "lo_closed": _flags, "hi_closed": _flags},
                }
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["hpolytope"],
            "properties": {
                "hpolytope": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["normals", "offsets"],
                    "properties": {"normals": _matrix, "offsets": _vector, "closed": _flags},
                }
            },
        },
    ]
}
SYSTEM_FILE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["A", "B", "U"],
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "A": _matrix,
        "B": _matrix,
        "U": {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}},
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "affine", "norm"]},
                "c": {"type": "number"},
                "w": _vector,
                "alpha": {"type": "number", "minimum": 0},
                "p": {"enum": [1, 2, "inf"]},
                "offset": {"type": "number"},
            },
        },
        "K": _region,
        "Q": _region,
        "T": _matrix,
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "N": {"type": "integer", "minimum": 1},
                "alphabet": _matrix,
                "grid": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "spanning": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "xi": {"type": "number", "exclusiveMinimum": 0},
                "b0": {"type": "number", "exclusiveMinimum": 0},
                "tau0": {"type": "number", "exclusiveMinimum": 0},
                "k": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "steer_steps": {"type": "integer", "minimum": 1},
            },
        },
    },
}


@dataclass
class SystemFile:
    system: LinearSystem
    potential: object
    K: object = None
    Q: object = None
    T: np.ndarray = None
    search: oracle.SearchParams = None
    spanning: SpanningConfig = None
    name: str = ""


def region_from_dict(doc):
    if "box" in doc:
        b = doc["box"]
        return Box(b["lo"], b["hi"], b.get("lo_closed", True), b.get("hi_closed", True))
    h = doc["hpolytope"]
    return HPolytope(h["normals"], h["offsets"], h.get("closed", True))


def parse_system_file(doc):
    """Validate a system document (already decoded JSON) and build its objects."""
    try:
        jsonschema.validate(doc, SYSTEM_FILE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid system file at {path}: {exc.message}") from None
    system = LinearSystem(doc["A"], doc["B"], doc["U"])
    potential = potential_from_dict(doc["potential"]) if "potential" in doc else Constant(0.0)
    K = region_from_dict(doc["K"]) if "K" in doc else None
    Q = region_from_dict(doc["Q"]) if "Q" in doc else None
    for label, r in (("K", K), ("Q", Q)):
        if r is not None and r.dim != system.dim:
            raise InputError(f"{label} has dimension {r.dim}, system has {system.dim}")
    T = numerics.as_matrix(doc["T"], "T", square=True) if "T" in doc else None
    disc = dict(doc.get("discretization", {}))
    if "alphabet" in disc:
        disc["alphabet"] = tuple(tuple(row) for row in disc["alphabet"])
    search = oracle.SearchParams(**disc)
    spanning = SpanningConfig(**doc.get("spanning", {}))
    return SystemFile(system, potential, K, Q, T, search, spanning, doc.get("name", ""))


def load_system_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    return parse_system_file(doc)


def _eig_list(ev):
    return [{"re": float(z.real), "im": float(z.imag)} for z in ev]


def cmd_analyze(sf):
    sysm = sf.system
    spec = numerics.spectral_groups(sysm.A)
    rank = numerics.kalman_rank(sysm.A, sysm.B)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis",
        "dim": sysm.dim,
        "inputs": sysm.n_inputs,
        "eigenvalues": _eig_list(spec.eigenvalues),
        "lyapunov_groups": [{"rho": rho, "multiplicity": d} for rho, d in spec.groups],
        "hyperbolic": spec.hyperbolic,
        "kalman_rank": rank,
        "controllable": rank == sysm.dim,
        "unstable_sum": unstable_sum(spec),
    }


def cmd_controlset(sf):
    est = control_set_estimate(sf.system, sf.T)
    return {"schema_version": SCHEMA_VERSION, "kind": "control_set", **est.to_dict()}


def cmd_pressure(sf, zero_potential=False):
    pv = entropy(sf.system, sf.T) if zero_potential else closed_form_pressure(sf.system, sf.potential, sf.T)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "pressure",
        "potential": (Constant(0.0) if zero_potential else sf.potential).to_dict(),
        **pv.to_dict(),
    }


def _fmt(x):
    return repr(float(x))


def cmd_estimate(sf, mode, tau_grid=None):
    """Rows ``tau, value, kind, dt, alphabet_size, grid_points, contained`` as lists."""
    rows = []
    if mode == "span":
        cfg = sf.spanning
        if tau_grid:
            grid = [(max(1, int(round(t / (cfg.n * cfg.tau0)))), cfg.n) for t in tau_grid]
        else:
            grid = [(k, cfg.n) for k in range(1, cfg.k + 1)]
        series = pressure_upper_estimate(sf.system, sf.potential, cfg, grid, sf.Q, None, sf.T)
        dt = cfg.tau0 / cfg.steer_steps
        for r in series.rows:
            kind = "span" if r.log_sum_exact else "span_bound"
            rows.append([_fmt(r.tau_total), _fmt(r.value), kind, _fmt(dt), "", str(r.count_per_period), str(r.contained).lower()])
        return rows
    if mode not in ("oracle-exact", "oracle-greedy"):
        raise InputError(f"unknown mode {mode!r}")
    if sf.K is None or sf.Q is None:
        raise InputError("oracle modes need K and Q in the system file")
    params = sf.search
    if tau_grid:
        Ns = [max(1, int(round(t / params.dt))) for t in tau_grid]
    else:
        Ns = list(range(1, params.N + 1))
    solver = oracle.a_tau_exact if mode == "oracle-exact" else oracle.a_tau_greedy
    kind = "oracle_exact" if mode == "oracle-exact" else "oracle_greedy"
    for N in Ns:
        prob = oracle.build_problem(sf.system, sf.K, sf.Q, params, N=N)
        sol = solver(prob, sf.potential)
        rows.append(
            [_fmt(prob.tau), _fmt(sol.log_weight / prob.tau), kind, _fmt(prob.dt), str(len(prob.alphabet)), str(len(prob.K_points)), "true"]
        )
    return rows


def _write(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(doc, out):
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", out)


def _text_analysis(doc):
    lines = [f"dimension      {doc['dim']} (inputs {doc['inputs']})"]
    eigs = ", ".join(f"{e['re']:.6g}{e['im']:+.6g}j" if e["im"] else f"{e['re']:.6g}" for e in doc["eigenvalues"])
    lines.append(f"eigenvalues    {eigs}")
    lines.append(f"hyperbolic     {doc['hyperbolic']}")
    lines.append(f"kalman rank    {doc['kalman_rank']}")
    lines.append(f"unstable sum   {doc['unstable_sum']:.12g}")
    return "\n".join(lines) + "\n"


def build_parser():
    p = argparse.ArgumentParser(prog="invpress", description="Invariance pressure of linear control systems.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--out", help="write the artifact to this path instead of stdout")

    a = sub.add_parser("analyze", help="spectrum, hyperbolicity and Kalman rank")
    a.add_argument("file")
    a.add_argument("--format", choices=["json", "text"], default="json")
    add_common(a)

    c = sub.add_parser("controlset", help="control-set estimate in diagonal coordinates")
    c.add_argument("file")
    add_common(c)

    pr = sub.add_parser("pressure", help="closed-form invariance pressure")
    pr.add_argument("file")
    pr.add_argument("--entropy", action="store_true", help="use the zero potential")
    add_common(pr)

    e = sub.add_parser("estimate", help="finite-horizon estimates as CSV")
    e.add_argument("file")
    e.add_argument("--mode", choices=["span", "oracle-exact", "oracle-greedy"], default="span")
    e.add_argument("--tau-grid", help="comma-separated horizons")
    add_common(e)

    v = sub.add_parser("verify", help="run the seeded property suite")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--cases", type=int, default=50)
    v.add_argument("--no-meta", action="store_true", help="omit timing metadata")
    v.add_argument("--inject-fault", action="append", default=[], help=argparse.SUPPRESS)
    add_common(v)
    return p


def _parse_tau_grid(raw):
    if not raw:
        return None
    try:
        vals = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --tau-grid {raw!r}") from None
    if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise InputError("--tau-grid values must be positive")
    return vals


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            try:
                report = verify.run_suite(args.seed, args.cases, inject=tuple(args.inject_fault) or None)
            except verify.PropertyFailure as exc:
                doc = exc.report.payload()
                doc["failing_case"] = exc.case
                _emit_json(doc, args.out)
                print(f"invpress: {exc}", file=sys.stderr)
                return 1
            _write(report.to_json(include_meta=not args.no_meta) + "\n", args.out)
            return 0
        sf = load_system_file(args.file)
        if args.command == "analyze":
            doc = cmd_analyze(sf)
            if args.format == "text":
                _write(_text_analysis(doc), args.out)
            else:
                _emit_json(doc, args.out)
        elif args.command == "controlset":
            _emit_json(cmd_controlset(sf), args.out)
        elif args.command == "pressure":
            _emit_json(cmd_pressure(sf, args.entropy), args.out)
        elif args.command == "estimate":
            rows = cmd_estimate(sf, args.mode, _parse_tau_grid(args.tau_grid))
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(rows)
            _write(buf.getvalue(), args.out)
        return 0
    except InvPressError as exc:
        reason = getattr(exc, "reason", None)
        tag = f" [{reason}]" if reason else ""
        print(f"invpress: error{tag}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
