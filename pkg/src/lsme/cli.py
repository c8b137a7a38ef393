"""Command-line front end: ``lsme {tce,mtce,allocate,validate,sample} MODEL.json``.

Reports go to standard output as JSON (default) or CSV.  Exit status is 0 on
success, 2 when the input is invalid and 3 when a numerical procedure fails;
nothing is written to standard output on a failure path.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ModelConfig, load_config
from .errors import LSMEError, NumericalFailure, ValidationError
from .model import aggregate, sample_model
from .multivariate import allocate, mtce
from .oracle import DEFAULT_CHUNK, mc_allocation, mc_mtce, mc_tce
from .univariate import Mode, tce_1d, tce_sum

__all__ = ["main", "build_parser", "run"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
Z_CRITERION = 4.0


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _q_list(values):
    out = []
    for v in values:
        for part in str(v).split(","):
            part = part.strip()
            if not part:
                continue
            try:
                out.append(float(part))
            except ValueError:
                raise ValidationError(f"--q: not a number: {part!r}") from None
    if not out:
        raise ValidationError("--q: at least one probability level is required")
    for q in out:
        if not 0.0 < q < 1.0:
            raise ValidationError(f"--q: probability level must lie in (0, 1), got {q}")
    return out


def _effective(cfg: ModelConfig, args) -> ModelConfig:
    opts = cfg.options
    if getattr(args, "mode", None):
        opts = replace(opts, mode=Mode.parse(args.mode))
    if getattr(args, "nodes", None) is not None:
        if args.nodes < 2:
            raise ValidationError("--nodes: expected an integer >= 2")
        opts = replace(opts, quadrature_nodes=args.nodes)
    if getattr(args, "tol", None) is not None:
        if not args.tol > 0:
            raise ValidationError("--tol: must be positive")
        opts = replace(opts, tolerance=args.tol)
    return ModelConfig(cfg.model, opts)


def _request(cfg: ModelConfig, command, **extra) -> dict:
    req = {"command": command, "model": cfg.to_dict()}
    req.update(extra)
    return req


# ---------------------------------------------------------------------------
# Commands.  Each returns (report dict, csv text).
# ---------------------------------------------------------------------------


def cmd_tce(cfg: ModelConfig, qs):
    model, o = cfg.model, cfg.options
    fn = tce_1d if model.n == 1 else tce_sum
    results = [fn(model, q, o.mode, o.quadrature_nodes, o.tolerance) for q in qs]
    report = {
        "request": _request(cfg, "tce", q=qs),
        "results": [{"q": r.q, "var": r.var, "tce": r.value} for r in results],
        "diagnostics": [
            {"q": r.q, "mode": r.mode.value, "tail_probability": r.tail_probability, "nodes": r.nodes, "warnings": list(r.warnings)}
            for r in results
        ],
    }
    text = _csv(
        ["q", "var", "tce", "tail_probability", "mode"],
        [(r.q, r.var, r.value, r.tail_probability, r.mode.value) for r in results],
    )
    return report, text


def cmd_mtce(cfg: ModelConfig, qs):
    model, o = cfg.model, cfg.options
    if len(qs) not in (1, model.n):
        raise ValidationError(f"--q: give one level or {model.n} levels, got {len(qs)}")
    r = mtce(model, qs, o.mode, o.quadrature_nodes, o.tolerance)
    report = {
        "request": _request(cfg, "mtce", q=qs),
        "results": {"q": r.q.tolist(), "var_vector": r.var_vector.tolist(), "mtce": r.value.tolist()},
        "diagnostics": {
            "mode": r.mode.value,
            "joint_tail": r.joint_tail,
            "joint_tail_stderr": r.joint_tail_stderr,
            "nodes": r.nodes,
            "warnings": list(r.warnings),
        },
    }
    text = _csv(
        ["component", "q", "var", "mtce", "joint_tail"],
        [(k + 1, r.q[k], r.var_vector[k], r.value[k], r.joint_tail) for k in range(model.n)],
    )
    return report, text


def cmd_allocate(cfg: ModelConfig, qs):
    model, o = cfg.model, cfg.options
    if len(qs) != 1:
        raise ValidationError("--q: allocate takes a single probability level")
    r = allocate(model, qs[0], o.mode, o.quadrature_nodes, o.tolerance)
    report = {
        "request": _request(cfg, "allocate", q=qs),
        "results": {"q": r.q, "s_q": r.s_q, "contributions": r.contributions.tolist(), "total": r.total},
        "diagnostics": {
            "mode": r.mode.value,
            "tail_probability": r.tail_probability,
            "additivity_gap": r.additivity_gap,
            "nodes": r.nodes,
            "warnings": list(r.warnings),
        },
    }
    rows = [(str(k + 1), r.contributions[k]) for k in range(model.n)] + [("total", r.total)]
    text = _csv(["component", "contribution"], rows)
    return report, text


def _compare(quantity, mode, closed, est, index=None):
    mean = est.mean if index is None else est.mean[index]
    se = est.stderr if index is None else est.stderr[index]
    z = (closed - mean) / se
    return {
        "quantity": quantity,
        "mode": mode.value,
        "closed_form": float(closed),
        "mc_mean": float(mean),
        "mc_stderr": float(se),
        "z": float(z),
        "pass": bool(abs(z) <= Z_CRITERION),
    }


def cmd_validate(cfg: ModelConfig, qs, samples, seed, workers=1):
    model, o = cfg.model, cfg.options
    if len(qs) != 1:
        raise ValidationError("--q: validate takes a single probability level")
    q = qs[0]
    modes = (Mode.WEIGHTED, Mode.LITERAL)
    rows = []
    if model.n == 1:
        est = mc_tce(model, q, samples, seed, workers=workers)
        for m in modes:
            rows.append(_compare("tce", m, tce_1d(model, q, m, o.quadrature_nodes, o.tolerance).value, est))
        mc = {"tce": est.to_dict()}
    else:
        est_s = mc_tce(aggregate(model), q, samples, seed, workers=workers)
        est_a = mc_allocation(model, q, samples, seed, workers=workers)
        est_m = mc_mtce(model, q, samples, seed, workers=workers)
        for m in modes:
            rows.append(_compare("tce_sum", m, tce_sum(model, q, m, o.quadrature_nodes, o.tolerance).value, est_s))
        for m in modes:
            a = allocate(model, q, m, o.quadrature_nodes, o.tolerance)
            rows.extend(_compare(f"allocation[{k + 1}]", m, a.contributions[k], est_a, k) for k in range(model.n))
        for m in modes:
            r = mtce(model, q, m, o.quadrature_nodes, o.tolerance)
            rows.extend(_compare(f"mtce[{k + 1}]", m, r.value[k], est_m, k) for k in range(model.n))
        mc = {"tce_sum": est_s.to_dict(), "allocation": est_a.to_dict(), "mtce": est_m.to_dict()}
    summary = {m.value: all(r["pass"] for r in rows if r["mode"] == m.value) for m in modes}
    report = {
        "request": _request(cfg, "validate", q=qs, samples=samples, seed=seed, chunk_size=DEFAULT_CHUNK),
        "results": rows,
        "diagnostics": {"criterion": f"|z| <= {Z_CRITERION:g}", "all_pass": summary, "monte_carlo": mc},
    }
    text = _csv(
        ["quantity", "mode", "closed_form", "mc_mean", "mc_stderr", "z", "pass"],
        [(r["quantity"], r["mode"], r["closed_form"], r["mc_mean"], r["mc_stderr"], r["z"], r["pass"]) for r in rows],
    )
    return report, text


def cmd_sample(cfg: ModelConfig, count, seed):
    if count < 1:
        raise ValidationError("--samples: must be at least 1")
    draws = sample_model(cfg.model, np.random.default_rng(seed), count)
    text = _csv([f"y{k + 1}" for k in range(cfg.model.n)], draws.tolist())
    report = {"request": _request(cfg, "sample", samples=count, seed=seed), "results": draws.tolist()}
    return report, text


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsme", description="Tail risk of location-scale mixtures of elliptical laws.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, q=True, numeric=True):
        p.add_argument("config", help="model file (JSON)")
        if q:
            p.add_argument("--q", action="append", required=True, help="probability level; repeat or comma-separate")
        if numeric:
            p.add_argument("--mode", choices=[m.value for m in Mode], help="override options.mode")
            p.add_argument("--nodes", type=int, help="override options.quadrature_nodes")
            p.add_argument("--tol", type=float, help="override options.tolerance")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true", help="add wall-clock timing to JSON reports")

    common(sub.add_parser("tce", help="TCE of a 1-d model or of the portfolio sum"))
    common(sub.add_parser("mtce", help="multivariate TCE"))
    common(sub.add_parser("allocate", help="TCE allocation to the components"))
    p = sub.add_parser("validate", help="compare closed forms with the Monte Carlo oracle")
    common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("sample", help="draw from the model (CSV by default)")
    common(p, q=False, numeric=False)
    p.set_defaults(format="csv")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", "--count", dest="samples", type=int, required=True)
    return parser


def run(args) -> tuple:
    """Execute parsed arguments; returns ``(exit code, stdout text, stderr text)``."""
    start = time.perf_counter()
    try:
        cfg = _effective(load_config(args.config), args)
        if args.command == "sample":
            report, text = cmd_sample(cfg, args.samples, args.seed)
        else:
            qs = _q_list(args.q)
            if args.command == "tce":
                report, text = cmd_tce(cfg, qs)
            elif args.command == "mtce":
                report, text = cmd_mtce(cfg, qs)
            elif args.command == "allocate":
                report, text = cmd_allocate(cfg, qs)
            else:
                if args.samples < 1:
                    raise ValidationError("--samples: must be positive")
                report, text = cmd_validate(cfg, qs, args.samples, args.seed, args.workers)
    except ValidationError as exc:
        return EXIT_VALIDATION, "", f"error: {exc}\n"
    except NumericalFailure as exc:
        return EXIT_NUMERICAL, "", f"numerical failure: {exc}\n"
    except LSMEError as exc:
        return EXIT_NUMERICAL, "", f"error: {exc}\n"
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERICAL, "", f"numerical failure: {type(exc).__name__}: {exc}\n"
    if args.format == "csv":
        return EXIT_OK, text, ""
    if args.timing:
        report["timing"] = {"seconds": time.perf_counter() - start}
    return EXIT_OK, json.dumps(report, indent=2, allow_nan=False) + "\n", ""


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, out, err = run(args)
    if out:
        sys.stdout.write(out)
    if err:
        sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
