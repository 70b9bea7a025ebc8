"""Command-line front end.

Six subcommands (strength, accuracy, faultpaths, truncate, levelred,
threshold) share one shape: load a JSON experiment config, validate it
against the shipped schema, run the corresponding library call, and write a
deterministic report. JSON reports embed the resolved config and provenance
and are emitted with sorted keys, 17-significant-digit floats, and LF line
endings, so identical config + seed gives byte-identical output regardless
of worker count. CSV reports are the flat per-record projection meant for
plotting tools.

Exit codes: 0 success, 2 config/validation error, 3 refused work (an
exhaustive-enumeration cap or the Monte Carlo budget). Errors print a
single JSON object {"error": reason, "exit": code} to stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from . import __version__
from .channels import (
    Channel,
    correlation_grid_from_json,
    diamond_distance,
    hamiltonian_terms_from_json,
    make_noise_channel,
    noise_map_from_json,
    noise_spec_from_json,
    strength_gaussian,
    strength_local_hamiltonian,
    strength_long_range,
    strength_markovian,
    strength_unitary_couplings,
)
from .circuit import (
    circuit_from_json,
    environment_spec_from_json,
    environment_strength,
    gate_from_json,
)
from .faultpaths import (
    SUBSET_SIZE_CAP,
    ExhaustiveCapError,
    accuracy_bound,
    accuracy_delta_exact,
    verify_ie_identity,
    zeta_earliest,
    zeta_subset,
)
from .gadgets import (
    BudgetExceededError,
    FaultConfig,
    gadget_graph_from_json,
    iterate_failure_map,
    level_reduce_mc,
    sample_fault_config,
    truncate_and_classify,
)
from .matcore import matrix_from_json, matrix_to_json, trace_norm
from .threshold import SchemeParams, pseudothreshold_mc, threshold_report, threshold_value

COMMANDS = ("strength", "accuracy", "faultpaths", "truncate", "levelred", "threshold")


# -- deterministic serialization ----------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return "%.17g" % x


def _plain(obj):
    """Coerce numpy scalars/arrays and tuples into plain JSON-ready types."""
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in items]
    return obj


def json_dumps(obj) -> str:
    """Sorted-key JSON with every float printed to 17 significant digits."""
    out: list[str] = []

    def walk(o) -> None:
        if o is None or o is True or o is False:
            out.append("null" if o is None else ("true" if o else "false"))
        elif isinstance(o, str):
            out.append(json.dumps(o, ensure_ascii=False))
        elif isinstance(o, int):
            out.append(str(o))
        elif isinstance(o, float):
            out.append(_fmt_float(o))
        elif isinstance(o, Mapping):
            out.append("{")
            for i, key in enumerate(sorted(o)):
                if i:
                    out.append(",")
                out.append(json.dumps(str(key), ensure_ascii=False) + ":")
                walk(o[key])
            out.append("}")
        elif isinstance(o, Sequence):
            out.append("[")
            for i, v in enumerate(o):
                if i:
                    out.append(",")
                walk(v)
            out.append("]")
        else:
            raise TypeError(f"cannot serialize {type(o).__name__}")

    walk(_plain(obj))
    return "".join(out)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, int):
        return str(v)
    s = str(v)
    if "," in s or "\n" in s or '"' in s:
        raise ValueError(f"CSV field needs quoting, which the dialect forbids: {s!r}")
    return s


@dataclass
class Report:
    command: str
    config: dict
    results: dict
    records: list[dict] = field(default_factory=list)
    csv_header: tuple[str, ...] = ()
    seed: int = 0

    def provenance(self) -> dict:
        return {
            "package": "ftlab",
            "version": __version__,
            "seed": self.seed,
            "numpy": np.__version__,
            "python": platform.python_version(),
        }


def emit_report(report: Report, fmt: str) -> bytes:
    """Serialize a report; identical input gives identical bytes."""
    if fmt == "json":
        doc = {
            "command": report.command,
            "config": report.config,
            "provenance": report.provenance(),
            "results": report.results,
        }
        jsonschema.validate(_plain(doc), _schema("report"))
        return (json_dumps(doc) + "\n").encode("utf-8")
    if fmt == "csv":
        header = list(report.csv_header) or (
            list(report.records[0].keys()) if report.records else []
        )
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for rec in report.records:
            buf.write(",".join(_csv_cell(_plain(rec.get(k))) for k in header) + "\n")
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


# -- config handling -----------------------------------------------------------


def _schema(name: str) -> dict:
    text = resources.files("ftlab").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def _load_config(path: str, args: argparse.Namespace) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    jsonschema.validate(config, _schema("config"))
    if config.get("command", args.command) != args.command:
        raise ValueError(
            f"config is for command {config['command']!r}, invoked as {args.command!r}"
        )
    config["command"] = args.command
    config.setdefault("params", {})
    if args.seed is not None:
        config["seed"] = args.seed
    config.setdefault("seed", 0)
    out = config.setdefault("output", {})
    if args.out is not None:
        out["path"] = args.out
    if args.format is not None:
        out["format"] = args.format
    out.setdefault("format", "json")
    if args.workers is not None:
        config["workers"] = args.workers
    return config


def _resolved_for_embedding(config: dict) -> dict:
    # workers and the output path tune execution/placement, not results;
    # keeping them out preserves byte-identity across worker counts and
    # across runs that only differ in where the report lands
    out = {k: v for k, v in config.items() if k != "workers"}
    out["output"] = {"format": config["output"]["format"]}
    return out


# -- command implementations ---------------------------------------------------


def _ideal_channel_like(noisy: Channel, params: Mapping) -> Channel:
    if "ideal" in params:
        u = gate_from_json(params["ideal"])
        return Channel.unitary(u, noisy.dims, noisy.support)
    return Channel.identity(noisy.dims, noisy.support)


def _cmd_strength(config: dict, workers: int) -> Report:
    params = config["params"]
    ev = params.get("evaluator")
    if ev == "markovian":
        noisy = make_noise_channel(noise_spec_from_json(params["noisy"]))
        eps = strength_markovian(noisy, _ideal_channel_like(noisy, params))
        results = {"evaluator": ev, "strength": eps}
    elif ev == "diamond":
        a = make_noise_channel(noise_spec_from_json(params["a"]))
        b = make_noise_channel(noise_spec_from_json(params["b"]))
        lo, hi = diamond_distance(
            a, b, restarts=int(params.get("restarts", 32)), seed=config["seed"]
        )
        results = {"evaluator": ev, "lower": lo, "upper": hi}
    elif ev == "local_hamiltonian":
        terms = hamiltonian_terms_from_json(params["terms"])
        eps = strength_local_hamiltonian(terms, float(params["t0"]))
        results = {"evaluator": ev, "strength": eps}
    elif ev == "long_range":
        terms = hamiltonian_terms_from_json(params["terms"])
        kwargs = {"c": float(params["c"])} if "c" in params else {}
        eps = strength_long_range(terms, float(params["t0"]), **kwargs)
        results = {
            "evaluator": ev,
            "strength": float(eps),
            "within_validity": eps.within_validity,
        }
    elif ev == "gaussian":
        grid = correlation_grid_from_json(params["grid"])
        kwargs = {"c": float(params["c"])} if "c" in params else {}
        results = {"evaluator": ev, "strength": strength_gaussian(grid, **kwargs)}
    elif ev == "unitary_couplings":
        ops = [matrix_from_json(m) for m in params["couplings"]]
        results = {"evaluator": ev, "strength": strength_unitary_couplings(ops)}
    elif ev == "environment":
        env = environment_spec_from_json(params["environment"])
        results = {"evaluator": ev, "strength": environment_strength(env)}
    else:
        raise ValueError(f"unknown strength evaluator {ev!r}")
    return Report(
        "strength", _resolved_for_embedding(config), results, [dict(results)],
        seed=config["seed"],
    )


def _cmd_accuracy(config: dict, workers: int) -> Report:
    params = config["params"]
    c = circuit_from_json(params["circuit"])
    variant = params.get("variant")
    if "environment" in params:
        env = environment_spec_from_json(params["environment"])
        delta = accuracy_delta_exact(c, env)
        eps = environment_strength(env)
        variant = variant or "non_markovian"
    else:
        noise = noise_map_from_json(params.get("noise", {}))
        delta = accuracy_delta_exact(c, noise)
        eps = 0.0
        for ch in noise.values():
            ident = Channel.identity(ch.dims, ch.support)
            eps = max(eps, strength_markovian(ch, ident))
        variant = variant or "linear"
    bound = accuracy_bound(c.size, eps, variant)
    results = {
        "delta": delta,
        "eps": eps,
        "locations": c.size,
        "variant": variant,
        "bound": bound,
        "within_bound": bool(delta <= bound + 1e-12),
    }
    return Report(
        "accuracy", _resolved_for_embedding(config), results, [dict(results)],
        seed=config["seed"],
    )


def _cmd_faultpaths(config: dict, workers: int) -> Report:
    params = config["params"]
    mode = params.get("mode")
    if mode == "ie_check":
        verdict = verify_ie_identity(int(params["L0"]), int(params["t"]))
        results = {
            "mode": mode,
            "ok": verdict.ok,
            "counterexample": list(verdict.counterexample or ()),
            "detail": verdict.detail,
        }
        rec = {k: results[k] for k in ("mode", "ok", "detail")}
        return Report(
            "faultpaths", _resolved_for_embedding(config), results, [rec],
            seed=config["seed"],
        )
    c = circuit_from_json(params["circuit"])
    noise = noise_map_from_json(params.get("noise", {}))
    if mode == "subset":
        if len(set(params["subset"])) > SUBSET_SIZE_CAP:
            raise ExhaustiveCapError(
                f"subset requests capped at r <= {SUBSET_SIZE_CAP}"
            )
        zeta = zeta_subset(
            c, noise, [int(i) for i in params["subset"]],
            complement=params.get("complement", "noisy"),
        )
        results = {
            "mode": mode,
            "subset": sorted(int(i) for i in params["subset"]),
            "complement": params.get("complement", "noisy"),
        }
    elif mode == "earliest":
        zeta = zeta_earliest(c, noise, int(params["r"]))
        results = {"mode": mode, "r": int(params["r"])}
    else:
        raise ValueError(f"unknown faultpaths mode {mode!r}")
    results["trace_norm"] = trace_norm(zeta.data)
    results["matrix"] = matrix_to_json(zeta)
    rec = {k: v for k, v in results.items() if k not in ("matrix", "subset")}
    return Report(
        "faultpaths", _resolved_for_embedding(config), results, [rec],
        seed=config["seed"],
    )


def _cmd_truncate(config: dict, workers: int) -> Report:
    params = config["params"]
    graph, t = gadget_graph_from_json(params["graph"])
    if "faults" in params:
        fc = FaultConfig(frozenset(int(i) for i in params["faults"]))
    else:
        fc = sample_fault_config(graph, float(params["eps"]), config["seed"])
    cls = truncate_and_classify(graph, fc, t)
    per_gadget = []
    for i, (status, ids) in enumerate(zip(cls.statuses, cls.truncated)):
        per_gadget.append(
            {
                "gadget": i,
                "status": status,
                "fault_count": len(ids & fc.faulty),
                "truncated_size": len(ids),
            }
        )
    results = {
        "t": t,
        "total_locations": graph.total_locations,
        "faults": sorted(fc.faulty),
        "statuses": list(cls.statuses),
        "truncated": [sorted(ids) for ids in cls.truncated],
        "any_bad": cls.any_bad,
    }
    return Report(
        "truncate", _resolved_for_embedding(config), results, per_gadget,
        seed=config["seed"],
    )


def _cmd_levelred(config: dict, workers: int) -> Report:
    params = config["params"]
    levels = int(params["levels"])
    L0, t = int(params["L0"]), int(params["t"])
    eps = float(params["eps"])
    samples = int(params["samples"])
    ests = level_reduce_mc(levels, L0, t, eps, samples, config["seed"], workers=workers)
    exact = iterate_failure_map(levels, L0, t, eps)
    rows = [
        {
            "level": e.level,
            "estimate": e.probability,
            "stderr": e.stderr,
            "trials": e.trials,
            "exact": x,
        }
        for e, x in zip(ests, exact)
    ]
    results = {
        "L0": L0,
        "t": t,
        "eps": eps,
        "samples": samples,
        "levels": rows,
    }
    return Report(
        "levelred", _resolved_for_embedding(config), results, [dict(r) for r in rows],
        seed=config["seed"],
    )


def _cmd_threshold(config: dict, workers: int) -> Report:
    params = config["params"]
    scheme = SchemeParams(
        L0=int(params["L0"]),
        t=int(params["t"]),
        xi=float(params.get("xi", math.e)),
        c_variant=params.get("c_variant", "encoded"),
    )
    results: dict = {
        "L0": scheme.L0,
        "t": scheme.t,
        "xi": scheme.xi,
        "eps0": threshold_value(scheme),
    }
    records: list[dict] = []
    if all(k in params for k in ("L", "delta0", "eps")):
        rep = threshold_report(
            int(params["L"]), float(params["delta0"]), float(params["eps"]), scheme
        )
        results.update(
            per_level=list(rep.per_level),
            k_required=rep.k_required,
            overhead_ratio=rep.overhead_ratio,
            exponent_a=rep.exponent_a,
        )
        records = rep.rows()
    else:
        a = math.log(scheme.L0) / math.log(scheme.t + 1)
        results["exponent_a"] = a
        records = [{"eps0": results["eps0"], "exponent_a": a}]
    if "pseudothreshold" in params:
        sub = params["pseudothreshold"]
        crossing, ci = pseudothreshold_mc(
            scheme,
            int(sub.get("samples", 10**5)),
            config["seed"],
            mode=sub.get("mode", "exact"),
        )
        results["pseudothreshold"] = {
            "crossing": crossing,
            "ci_low": ci[0],
            "ci_high": ci[1],
            "mode": sub.get("mode", "exact"),
        }
    return Report(
        "threshold", _resolved_for_embedding(config), results, records,
        seed=config["seed"],
    )


_RUNNERS = {
    "strength": _cmd_strength,
    "accuracy": _cmd_accuracy,
    "faultpaths": _cmd_faultpaths,
    "truncate": _cmd_truncate,
    "levelred": _cmd_levelred,
    "threshold": _cmd_threshold,
}


# -- entry point ----------------------------------------------------------------


def _fail(code: int, reason: str) -> int:
    sys.stderr.write(json.dumps({"error": reason, "exit": code}) + "\n")
    return code


def _write_atomic(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftlab",
        description="noise-strength accounting and threshold arithmetic",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "strength": "evaluate a noise-strength model",
        "accuracy": "exact output deviation of a noisy circuit vs its bound",
        "faultpaths": "materialize fault-path sums or check counting identities",
        "truncate": "classify gadgets as good/bad after the truncation sweep",
        "levelred": "Monte Carlo level-reduction failure estimates",
        "threshold": "threshold, per-level strengths, required level, overhead",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="report path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument(
            "--workers",
            type=int,
            default=None,
            help="worker pool size (default: machine parallelism)",
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config, args)
        workers = config.get("workers") or os.cpu_count() or 1
        report = _RUNNERS[args.command](config, workers)
        payload = emit_report(report, config["output"]["format"])
        path = config["output"].get("path")
        if path:
            _write_atomic(path, payload)
        else:
            sys.stdout.buffer.write(payload)
            sys.stdout.buffer.flush()
    except (ExhaustiveCapError, BudgetExceededError) as exc:
        return _fail(3, str(exc))
    except (
        ValueError,
        TypeError,
        KeyError,
        OSError,
        json.JSONDecodeError,
        jsonschema.ValidationError,
    ) as exc:
        reason = str(exc) if str(exc) else type(exc).__name__
        if isinstance(exc, KeyError):
            reason = f"missing config key: {reason}"
        return _fail(2, reason)
    return 0


if __name__ == "__main__":
    sys.exit(main())
