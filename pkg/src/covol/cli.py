"""Command-line interface: ``covol <command> [options]``.

Commands
--------
simulate   write simulated paths as CSV
estimate   realized statistics of a CSV path
rate       LDP/MDP rate of a vector or of a derived statistic
tail       Monte Carlo tail probability and empirical rate
verify     run the acceptance battery
covcheck   CLT covariance check

Every command that emits JSON embeds the resolved configuration and the tool
version.  Exit codes: 0 success, 1 invalid input, 2 numerical failure (for
``verify``: at least one criterion failed).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coefficients import CoefficientSpec
from .errors import ConsistencyError, ConvergenceError, CovolError, SingularCovarianceError
from .estimators import STATISTICS, realized_vector, statistic, tilde_vector
from .montecarlo import TailQuery, covariance_check, empirical_rate_curve, estimate_tail, resolve_threads
from .ratefn.derived import derived_rate
from .ratefn.ldp import ldp_conjugate
from .ratefn.mdp import mdp_rate
from .simulate import SamplePath, simulate_path
from .verify import LEVELS, run_battery, spec_checks

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

_NUM = {"type": "number"}
_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_THREADS = {"type": ["integer", "null"], "minimum": 1}

#: per-command parameter schemas; unknown fields are rejected
SCHEMAS = {
    "simulate": {
        "n": _INT,
        "seed": _SEED,
        "paths": _INT,
        "x0": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "out": {"type": "string"},
    },
    "estimate": {
        "path": {"type": "string"},
        "t": {"type": "number", "minimum": 0, "maximum": 1},
        "correction": {"enum": ["none", "tilde"]},
    },
    "rate": {
        "x": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
        "u": _NUM,
        "statistic": {"enum": ["correlation", "beta1", "beta2"]},
        "scale": {"enum": ["ldp", "mdp"]},
    },
    "tail": {
        "component": {"enum": list(STATISTICS)},
        "direction": {"enum": [">=", "<=", "abs>="]},
        "threshold": _NUM,
        "n": _INT,
        "paths": _INT,
        "seed": _SEED,
        "scale": {"enum": ["ldp", "mdp"]},
        "gamma": {"type": ["number", "null"], "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "method": {"enum": ["auto", "naive", "tilted"]},
        "curve": {"type": ["array", "null"], "items": _INT},
        "csv": {"type": ["string", "null"]},
        "threads": _THREADS,
    },
    "verify": {
        "level": {"enum": list(LEVELS)},
        "seed": _SEED,
        "only": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 1, "maximum": 10}},
        "threads": _THREADS,
    },
    "covcheck": {"n": _INT, "paths": {"type": "integer", "minimum": 2}, "seed": _SEED, "threads": _THREADS},
}

REQUIRED = {
    "simulate": ["n", "seed", "out"],
    "estimate": ["path"],
    "rate": [],
    "tail": ["component", "direction", "threshold", "n", "paths"],
    "verify": [],
    "covcheck": ["n", "paths"],
}


class InputError(Exception):
    """Invalid command-line input (exit code 1)."""


# ---------------------------------------------------------------------------
# JSON output with 17 significant digits
# ---------------------------------------------------------------------------


def _encode(obj):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """JSON text with every float written to 17 significant digits; ``+inf``
    becomes the string ``"inf"`` and nan becomes ``null``."""
    return _encode(obj)


def _emit(payload, out=None):
    text = dumps(payload) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _load_json(text_or_path, what):
    try:
        p = Path(text_or_path)
        text = p.read_text() if p.exists() else text_or_path
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"could not read {what}: {exc}") from exc


def _load_spec(path):
    if path is None:
        raise InputError("--spec is required")
    doc = _load_json(path, "spec")
    try:
        spec = CoefficientSpec.from_dict(doc)
        return spec, spec.to_dict()
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid spec field {where}: {exc.message}") from exc


def _resolve(command, args, base=None):
    """Merge ``--config`` (and ``base``) with explicit flags and validate."""
    params = {}
    for doc, what in ((args.config, "config"), (base, "query")):
        if doc is None:
            continue
        doc = _load_json(doc, what) if isinstance(doc, str) else doc
        if not isinstance(doc, dict):
            raise InputError(f"{what} must be a JSON object")
        params.update(doc)
    for key in SCHEMAS[command]:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    schema = {
        "type": "object",
        "properties": SCHEMAS[command],
        "required": REQUIRED[command],
        "additionalProperties": False,
    }
    try:
        jsonschema.validate(params, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid parameter {where}: {exc.message}") from exc
    return params


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    spec, spec_doc = _load_spec(args.spec)
    p = _resolve("simulate", args)
    paths = p.get("paths", 1)
    x0 = tuple(p.get("x0", (0.0, 0.0)))
    out = Path(p["out"])
    written = []
    for i in range(paths):
        path = simulate_path(spec, p["n"], p["seed"], x0, stream=() if paths == 1 else (i,))
        target = out if paths == 1 else out.with_name(f"{out.stem}_{i:04d}{out.suffix or '.csv'}")
        with open(target, "w", newline="") as fh:
            path.to_csv(fh)
        written.append(str(target))
    _emit({"version": __version__, "config": {"command": "simulate", "spec": spec_doc, **p}, "files": written})
    return EXIT_OK


def cmd_estimate(args):
    p = _resolve("estimate", args)
    try:
        with open(p["path"]) as fh:
            path = SamplePath.from_csv(fh)
    except OSError as exc:
        raise InputError(f"could not read path: {exc}") from exc
    t = p.get("t", 1.0)
    spec_doc = None
    if p.get("correction", "none") == "tilde":
        spec, spec_doc = _load_spec(args.spec)
        v = tilde_vector(path, spec, t)
    else:
        v = realized_vector(path, t)
    arr = v.as_array()
    result = {
        "q1": v.q1,
        "q2": v.q2,
        "c": v.c,
        "rho_hat": float(statistic(arr, "correlation")),
        "beta1": float(statistic(arr, "beta1")),
        "beta2": float(statistic(arr, "beta2")),
    }
    _emit({"version": __version__, "config": {"command": "estimate", "spec": spec_doc, **p}, **result})
    return EXIT_OK


def cmd_rate(args):
    spec, spec_doc = _load_spec(args.spec)
    p = _resolve("rate", args, base=args.query)
    scale = p.get("scale", "ldp")
    if ("x" in p) == ("u" in p):
        raise InputError("give exactly one of x or u")
    if "x" in p:
        x = np.array(p["x"], dtype=float)
        if scale == "ldp":
            res = ldp_conjugate(x, spec)
            result = {
                "rate": res.value,
                "attained": res.attained,
                "argmax_lambda": res.argmax.tolist(),
                "iterations": res.iterations,
                "gradient_norm": res.gradient_norm,
            }
        else:
            result = {"rate": mdp_rate(x, spec), "attained": True, "argmax_lambda": None}
    else:
        if "statistic" not in p:
            raise InputError("a u query needs a statistic")
        res = derived_rate(p["statistic"], p["u"], spec, scale)
        result = {
            "rate": res.rate,
            "attained": res.attained,
            "argmax_lambda": None,
            "minimizer": res.minimizer.tolist(),
        }
    _emit({"version": __version__, "config": {"command": "rate", "spec": spec_doc, "scale": scale, **p}, **result})
    return EXIT_OK


def cmd_tail(args):
    spec, spec_doc = _load_spec(args.spec)
    p = _resolve("tail", args)
    query = TailQuery(
        p["component"],
        p["direction"],
        p["threshold"],
        p["n"],
        p["paths"],
        p.get("seed", 0),
        p.get("scale", "ldp"),
        p.get("gamma"),
    )
    threads = resolve_threads(p.get("threads"))
    method = p.get("method", "auto")
    config = {"command": "tail", "spec": spec_doc, **query.to_dict(), "method": method, "threads": threads}
    if p.get("curve"):
        curve = empirical_rate_curve(query, spec, p["curve"], method, threads)
        rows = [vars(c) for c in curve]
        if p.get("csv"):
            with open(p["csv"], "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "empirical_rate", "predicted_rate", "p_hat", "std_err"])
                for r in rows:
                    w.writerow([r["n"]] + [format(r[k], ".17g") for k in ("empirical_rate", "predicted_rate", "p_hat", "std_err")])
        _emit({"version": __version__, "config": config, "curve": rows})
        return EXIT_OK
    est = estimate_tail(query, spec, method, threads)
    _emit({"version": __version__, "config": config, **est.to_dict()})
    return EXIT_OK


def cmd_verify(args):
    spec, spec_doc = (None, None) if args.spec is None else _load_spec(args.spec)
    p = _resolve("verify", args)
    threads = resolve_threads(p.get("threads"))
    level = p.get("level", "quick")
    results = run_battery(level, p.get("seed", 0), threads, p.get("only"))
    for r in results:
        print(r.line(), file=sys.stderr)
    payload = {
        "version": __version__,
        "config": {"command": "verify", "spec": spec_doc, "level": level, "seed": p.get("seed", 0), "threads": threads},
        "criteria": [r.to_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    if spec is not None:
        payload["spec_checks"] = spec_checks(spec)
    _emit(payload)
    return EXIT_OK if payload["all_passed"] else EXIT_NUMERICAL


def cmd_covcheck(args):
    spec, spec_doc = _load_spec(args.spec)
    p = _resolve("covcheck", args)
    threads = resolve_threads(p.get("threads"))
    res = covariance_check(spec, p["n"], p["paths"], p.get("seed", 0), threads)
    _emit({"version": __version__, "config": {"command": "covcheck", "spec": spec_doc, **p, "threads": threads}, **res.to_dict()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="covol", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"covol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required, help="coefficient spec (JSON file or text)")
        p.add_argument("--config", help="JSON object with command parameters; flags override it")

    p = sub.add_parser("simulate", help="simulate paths to CSV")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="number of paths; >1 writes OUT_0000.csv, ...")
    p.add_argument("--x0", type=_floats)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="realized statistics of a CSV path")
    common(p, spec_required=False)
    p.add_argument("--path")
    p.add_argument("--t", type=float)
    p.add_argument("--correction", choices=["none", "tilde"])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("rate", help="rate-function evaluation")
    common(p)
    p.add_argument("--x", type=_floats)
    p.add_argument("--u", type=float)
    p.add_argument("--statistic", choices=["correlation", "beta1", "beta2"])
    p.add_argument("--scale", choices=["ldp", "mdp"])
    p.add_argument("--query", help='JSON {"x": [...]} or {"u": ..., "statistic": ..., "scale": ...}')
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("tail", help="Monte Carlo tail estimate")
    common(p)
    p.add_argument("--component", choices=list(STATISTICS))
    p.add_argument("--direction", choices=[">=", "<=", "abs>="])
    p.add_argument("--threshold", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", choices=["ldp", "mdp"])
    p.add_argument("--gamma", type=float)
    p.add_argument("--method", choices=["auto", "naive", "tilted"])
    p.add_argument("--curve", type=_ints, help="comma-separated increasing n values")
    p.add_argument("--csv", help="write the rate curve as CSV")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("verify", help="run the acceptance battery")
    common(p, spec_required=False)
    p.add_argument("--level", choices=list(LEVELS))
    p.add_argument("--seed", type=int)
    p.add_argument("--only", type=_ints, help="comma-separated criterion numbers")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("covcheck", help="CLT covariance relative errors")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_covcheck)
    return parser


def run(argv=None):
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return args.func(args)
    except (ConvergenceError, SingularCovarianceError, ConsistencyError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"covol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, CovolError, ValueError) as exc:
        print(f"covol: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
