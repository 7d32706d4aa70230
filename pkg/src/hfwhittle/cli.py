"""
Command line interface: ``hfw sim | pgram | estimate | info | lan-check | mc``.

Exit status is 0 on success, 2 on usage errors (bad flags, missing files)
and 1 on computation errors.  With ``--format json`` every failure also
prints a JSON error object on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from ._json import jsonable
from .estimators import estimate, predicted_for
from .exceptions import HFWError
from .info import Regime, efficient_sigma_rate, efficient_theta_rate, info_pack, rate_matrix_limits
from .models import MODELS, ModelParams, get_model
from .montecarlo import StudyConfig, run_study
from .periodogram import periodogram
from .sampling import SampledSeries, sample_path


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


# series files ---------------------------------------------------------------

def meta_path(csv_path: str) -> str:
    root, ext = os.path.splitext(csv_path)
    return root + ".meta.json"


def write_series(path: str, values, meta: dict) -> None:
    """CSV with header ``j,x`` (1-based j, 17 significant digits) plus a JSON sidecar."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "x"])
        for j, v in enumerate(values, start=1):
            w.writerow([j, f"{v:.17g}"])
    with open(meta_path(path), "w") as fh:
        json.dump(jsonable(meta), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_series(path: str) -> tuple[np.ndarray, dict | None]:
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["j", "x"]:
        raise HFWError(f"{path}: expected header 'j,x'")
    try:
        idx = np.array([int(r[0]) for r in rows[1:]])
        x = np.array([float(r[1]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise HFWError(f"{path}: malformed row ({exc})") from exc
    if not np.array_equal(idx, np.arange(1, idx.size + 1)):
        raise HFWError(f"{path}: index column must run 1..N")
    meta = None
    mp = meta_path(path)
    if os.path.exists(mp):
        with open(mp) as fh:
            meta = json.load(fh)
    return x, meta


# helpers --------------------------------------------------------------------

def _theta(args, model) -> list:
    psi = [float(v) for v in (args.psi or [])]
    theta = psi + [float(args.h)]
    if len(theta) != model.dim_p:
        raise UsageError(f"model {model.name} needs {model.dim_p - 1} --psi value(s) and --h")
    return theta


def _emit(obj, fmt: str, out=None) -> None:
    stream = out or sys.stdout
    if fmt == "json":
        json.dump(jsonable(obj), stream, sort_keys=True, indent=2)
        stream.write("\n")
        return
    w = csv.writer(stream)
    w.writerow(["key", "value"])
    for key, val in _flatten(jsonable(obj)):
        w.writerow([key, val])


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


# subcommands ----------------------------------------------------------------

def cmd_sim(args) -> int:
    model = get_model(args.model)
    params = ModelParams(tuple(_theta(args, model)), args.sigma, args.delta)
    s = sample_path(model, params, args.n, args.seed)
    if args.out:
        write_series(args.out, s.values, s.meta)
        _emit({"series": args.out, "meta": meta_path(args.out), **s.meta}, args.format)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["j", "x"])
        for j, v in enumerate(s.values, start=1):
            w.writerow([j, f"{v:.17g}"])
    return 0


def cmd_pgram(args) -> int:
    x, _ = read_series(args.input)
    pg = periodogram(x)
    lam, ords, w = pg.grid()
    if args.format == "csv":
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            wr = csv.writer(out)
            wr.writerow(["k", "freq", "ordinate", "weight"])
            for k, (f, o, ww) in enumerate(zip(lam, ords, w), start=1):
                wr.writerow([k, f"{f:.17g}", f"{o:.17g}", f"{ww:.17g}"])
        finally:
            if args.out:
                out.close()
        return 0
    doc = {"n": pg.n, "freqs": lam, "ordinates": ords, "weights": w, "zero": pg.zero,
           "nyquist": pg.nyquist, "scale_tag": pg.scale_tag}
    if args.out:
        with open(args.out, "w") as fh:
            _emit(doc, "json", fh)
    else:
        _emit(doc, "json")
    return 0


def cmd_estimate(args) -> int:
    x, meta = read_series(args.input)
    model_name = args.model or (meta or {}).get("model")
    if model_name is None:
        raise UsageError("--model is required when the series has no sidecar")
    model = get_model(model_name)
    sidecar_delta = (meta or {}).get("delta")
    if args.delta is not None:
        delta, source = args.delta, "flag"
    elif sidecar_delta is not None:
        delta, source = float(sidecar_delta), "sidecar"
    else:
        raise UsageError("delta unknown: no sidecar and no --delta")
    series = SampledSeries(x, delta, meta or {})
    res = estimate(model, series, args.regime, H0=args.h0, sigma0=args.sigma0)
    doc = {
        "model": model.name,
        "input": args.input,
        "delta": {"value": delta, "source": source, "sidecar": sidecar_delta},
        "result": res.to_dict(),
        "predicted": predicted_for(model, res).to_dict(),
    }
    _emit(doc, args.format)
    return 0


def cmd_info(args) -> int:
    model = get_model(args.model)
    pack = info_pack(model, _theta(args, model), args.q)
    _emit({"model": model.name, **pack.to_dict()}, args.format)
    return 0


def cmd_lan_check(args) -> int:
    model = get_model(args.model)
    theta = _theta(args, model)
    doc = {"model": model.name, "theta": theta, "sigma": args.sigma}
    for fam in (efficient_theta_rate(args.sigma), efficient_sigma_rate(args.sigma)):
        D, E, J = rate_matrix_limits(fam, model, theta, args.sigma)
        doc[fam.name] = {"D": D, "E": E, "J": J, "J_inv": np.linalg.inv(J)}
    _emit(doc, args.format)
    return 0


def cmd_mc(args) -> int:
    if not os.path.exists(args.config):
        raise UsageError(f"config file not found: {args.config}")
    cfg = StudyConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replications is not None:
        cfg.replications = args.replications
        cfg.__post_init__()
    out = args.out or cfg.output
    report = run_study(cfg, workers=args.workers)
    if out:
        report.write(out, args.csv)
    summary = {
        "labels": report.labels,
        "replications_used": report.replications_used,
        "failures": len(report.failures),
        "boundary_count": report.boundary_count,
        "covariance": report.covariance,
        "predicted_covariance": report.predicted_covariance,
        "normality": report.normality,
        "report": out,
    }
    _emit(summary, args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    model_opts = _Parser(add_help=False)
    model_opts.add_argument("--model", choices=sorted(MODELS), default="fgn")
    model_opts.add_argument("--h", type=float, required=True, help="Hurst exponent")
    model_opts.add_argument("--psi", type=float, action="append", help="extra parameter (repeat)")

    p = _Parser(prog="hfw", description="Whittle estimation for high-frequency self-similar noise")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sim", parents=[common, model_opts], help="simulate a series")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", help="series CSV (a .meta.json sidecar is written next to it)")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("pgram", parents=[common], help="periodogram of a series")
    s.add_argument("--input", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_pgram)

    s = sub.add_parser("estimate", parents=[common], help="Whittle estimation")
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--regime", required=True, help="all | h-known | sigma-known")
    s.add_argument("--input", required=True)
    s.add_argument("--h0", type=float)
    s.add_argument("--sigma0", type=float)
    s.add_argument("--delta", type=float, help="override the sidecar's sampling interval")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("info", parents=[common, model_opts], help="information integrals")
    s.add_argument("--q", type=int)
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("lan-check", parents=[common, model_opts], help="rate-matrix limits")
    s.add_argument("--sigma", type=float, default=1.0)
    s.set_defaults(func=cmd_lan_check)

    s = sub.add_parser("mc", parents=[common], help="Monte Carlo study")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--csv", help="scaled-error CSV (default: next to --out)")
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--workers", type=int, help="process count (default: HFW_THREADS or 1)")
    s.set_defaults(func=cmd_mc)
    return p


def _wants_json(argv) -> bool:
    """JSON is the default format; only an explicit csv request turns it off."""
    for i, a in enumerate(argv):
        if a == "--format=csv" or (a == "--format" and i + 1 < len(argv) and argv[i + 1] == "csv"):
            return False
    return True


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = _wants_json(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "estimate":
            try:
                regime = Regime.parse(args.regime)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            if regime is Regime.H_KNOWN and args.h0 is None:
                raise UsageError("--regime h-known needs --h0")
            if regime is Regime.SIGMA_KNOWN and args.sigma0 is None:
                raise UsageError("--regime sigma-known needs --sigma0")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        if as_json:
            _emit({"error": {"kind": "usage", "message": str(exc)}}, "json")
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (HFWError, ValueError, ArithmeticError, OSError) as exc:
        print(f"hfw: error: {exc}", file=sys.stderr)
        if as_json:
            _emit({"error": {"kind": type(exc).__name__, "message": str(exc)}}, "json")
        return 1


if __name__ == "__main__":
    sys.exit(main())
