"""Command-line front end: parameter sweeps, checks and the polygraph simulator.

Every subcommand emits a table (CSV or JSON). CSV files start with a
``# config: <canonical JSON>`` line so a run can be reproduced from its
output alone.

Exit codes: 0 success, 1 usage error, 2 precondition violation,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import polygraph, verify
from .channel import DepolarizingParams, depolarize_operator
from .core import PreconditionError, PureState, sample_state
from .entropy import min_output_renyi_closed, min_output_renyi_numeric, renyi_entropy
from .perturb import (
    DEFAULT_T_GRID,
    finite_difference_coeff,
    random_family,
    renyi_second_order_coeff,
    stability_family,
    taylor_residual_check,
)
from .stability import (
    accept_coeff,
    f_p,
    f_vn,
    gap,
    gap_limit,
    h_critical_point,
    h_critical_value,
    h_critical_value_printed,
    h_min_check,
    monotonicity_scan,
    reject_coeff,
)

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_VERIFY = 0, 1, 2, 3
OUTPUT_DIR_ENV = "RENYISTAB_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ------------------------------------------------------------------ parsing


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    """Comma-separated integers and inclusive ranges, e.g. ``2,3`` or ``2..10``."""
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or ranges like 2..10, got {text!r}")
    return out


def _as_list(value, conv):
    # config files may hold either a JSON list or the CLI string form
    if isinstance(value, (list, tuple)):
        return conv(",".join(str(v) for v in value))
    if isinstance(value, (int, float)):
        return conv(str(value))
    return conv(value)


def _require_nonempty(name: str, values: Sequence) -> None:
    if len(values) == 0:
        raise PreconditionError(f"--{name} must be nonempty")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with option values; command-line flags take precedence")
    parser.add_argument("--out", help=f"output file (default: stdout, or ${OUTPUT_DIR_ENV}/<command>.<format>)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for grid points and trials")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="renyistab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("entropy", help="Rényi entropies of sampled or basis states, optionally after the channel")
    p.add_argument("--kind", choices=("haar", "product", "basis"), default="haar")
    p.add_argument("--digits", type=_int_list, default=None, help="basis string for --kind basis, e.g. 0,1,1")
    p.add_argument("--d", type=_int_list, default=[2])
    p.add_argument("--n", type=_int_list, default=[2])
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[1.0])
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1)

    p = sub.add_parser("min-entropy", help="closed-form vs numerically minimized output entropy")
    p.add_argument("--d", type=_int_list, default=[2])
    p.add_argument("--n", type=_int_list, default=[1, 2, 3])
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[0.3, 0.7])
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0, 3.0, 5.0])
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("taylor-check", help="second-order entropy coefficient vs residual decay")
    p.add_argument("--families", type=int, default=20, help="number of random families")
    p.add_argument("--max-side", type=int, default=16)
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0, 3.0, 5.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stability", action="store_true", help="also add channel-derived families (d=2, n=2, lambda=0.5)")

    p = sub.add_parser("fp-scan", help="excess coefficient f_p(x) tables and monotonicity")
    p.add_argument("--variant", choices=("canonical", "as-printed", "both"), default="canonical")
    p.add_argument("--d", type=_int_list, default=[2])
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[0.5])
    p.add_argument("--p", type=_float_list, default=[2.0])
    p.add_argument("--x", type=_int_list, default=list(range(2, 11)))

    p = sub.add_parser("gap", help="accept/reject thresholds, gap width and h_poly tables")
    p.add_argument("--table", choices=("gap", "h"), default="gap")
    p.add_argument("--d", type=_int_list, default=[2])
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[0.5])
    p.add_argument("--p", type=_float_list, default=[2.0, 200.0])
    p.add_argument("--r-max", type=float, default=100.0)

    p = sub.add_parser("polygraph", help="simulate rounds of the product-state test")
    p.add_argument("--report", choices=("records", "summary", "gap-width"), default="records")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--p", type=_float_list, default=[2.0])
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--cheat", action="store_true", help="draw delta above eps instead of below")
    p.add_argument("--delta-range", type=_float_list, default=None, help="lo,hi for the uniform delta sampler")
    p.add_argument("--delta-max", type=float, default=0.1)
    p.add_argument("--allow-weight-one", action="store_true")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="run the full numerical check suite")
    p.add_argument("--only", type=lambda s: s.split(","), default=None)
    p.add_argument("--skip", type=lambda s: s.split(","), default=[])

    for sp in sub.choices.values():
        _common(sp)
    return parser


_LIST_OPTIONS = {"d": _int_list, "n": _int_list, "x": _int_list, "digits": _int_list, "lam": _float_list, "p": _float_list}


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv``, filling options not given on the command line from ``--config``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        cfg.pop("command", None)
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        cfg["lam"] = cfg.pop("lambda", cfg.get("lam"))
        if cfg["lam"] is None:
            del cfg["lam"]
        unknown = set(cfg) - set(vars(args))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        defaults = {}
        for k, v in cfg.items():
            current = sub.get_default(k)
            if k in _LIST_OPTIONS and isinstance(current, list):
                v = _as_list(v, _LIST_OPTIONS[k])
            elif k == "delta_range" and v is not None:
                v = _as_list(v, _float_list)
            defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------------- output


def canonical_config(args: argparse.Namespace) -> str:
    skip = {"config", "out", "format", "verbose", "workers"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    if v is None:
        return ""
    return str(v)


def write_csv(rows: list[dict], config_json: str, stream) -> None:
    stream.write(f"# config: {config_json}\n")
    if not rows:
        return
    writer = csv.writer(stream, lineterminator="\n")
    cols = list(rows[0])
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in cols])


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_csv(source) -> tuple[dict, list[dict]]:
    """Parse a table written by :func:`write_csv` back into (config, rows)."""
    text = Path(source).read_text() if not hasattr(source, "read") else source.read()
    first, _, body = text.partition("\n")
    if not first.startswith("# config: "):
        raise ValueError("missing '# config:' header line")
    config = json.loads(first[len("# config: ") :])
    rows = [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO(body))]
    return config, rows


def _json_safe(v):
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return str(v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_json(rows: list[dict], config_json: str, stream) -> None:
    doc = {"config": json.loads(config_json), "rows": [{k: _json_safe(v) for k, v in r.items()} for r in rows]}
    json.dump(doc, stream, indent=1, allow_nan=False)
    stream.write("\n")


def _target(args: argparse.Namespace) -> Path | None:
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if args.out:
        path = Path(args.out)
        return path if path.is_absolute() or not env_dir else Path(env_dir) / path
    if env_dir:
        return Path(env_dir) / f"{args.command}.{args.format}"
    return None


def emit(rows: list[dict], args: argparse.Namespace) -> Path | None:
    cfg = canonical_config(args)
    writer = write_csv if args.format == "csv" else write_json
    path = _target(args)
    if path is None:
        writer(rows, cfg, sys.stdout)
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer(rows, cfg, fh)
    return path


def _pool_map(fn: Callable, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _sorted(rows: list[dict], keys: Iterable[str]) -> list[dict]:
    keys = list(keys)
    return sorted(rows, key=lambda r: tuple(r[k] for k in keys))


# --------------------------------------------------------------- subcommands


def _entropy_rows(args) -> list[dict]:
    for name in ("d", "n", "lam", "p"):
        _require_nonempty(name, getattr(args, name))
    if args.samples < 1:
        raise PreconditionError("--samples must be >= 1")
    rng = np.random.default_rng(args.seed)
    rows = []
    for d in args.d:
        for n in args.n:
            for s in range(args.samples):
                if args.kind == "basis":
                    digits = args.digits if args.digits is not None else [0] * n
                    if len(digits) != n:
                        raise PreconditionError(f"--digits has {len(digits)} entries but n = {n}")
                    psi = PureState.basis(digits, d)
                else:
                    psi = sample_state(args.kind, d, n, rng)
                for lam in args.lam:
                    prm = DepolarizingParams(lam, d, n)
                    out = depolarize_operator(prm, np.outer(psi.amplitudes, psi.amplitudes.conj()))
                    for p in args.p:
                        rows.append(
                            {"d": d, "n": n, "sample": s, "lam": lam, "p": p, "entropy": renyi_entropy(out, p)}
                        )
    return _sorted(rows, ("d", "n", "sample", "lam", "p"))


def _min_entropy_point(item):
    d, n, lam, p, restarts, seed = item
    prm = DepolarizingParams(lam, d, n)
    closed = min_output_renyi_closed(prm, p)
    num, _ = min_output_renyi_numeric(prm, p, restarts=restarts, seed=seed)
    return {"d": d, "n": n, "lam": lam, "p": p, "closed": closed, "numeric": num, "difference": num - closed}


def _min_entropy_rows(args) -> list[dict]:
    for name in ("d", "n", "lam", "p"):
        _require_nonempty(name, getattr(args, name))
    items = [(d, n, lam, p, args.restarts, args.seed) for d in args.d for n in args.n for lam in args.lam for p in args.p]
    for d, n, *_ in items:
        if d**n > 729:
            raise PreconditionError(f"d^n = {d**n} exceeds the desk-scale bound 729")
    # validate parameters before dispatching work
    for d, n, lam, p, *_ in items:
        DepolarizingParams(lam, d, n)
        if not p > 0:
            raise PreconditionError(f"Rényi order must be positive, got p={p}")
    return _sorted(_pool_map(_min_entropy_point, items, args.workers), ("d", "n", "lam", "p"))


def _taylor_point(item):
    label, fam, p = item
    fit = taylor_residual_check(fam, p, DEFAULT_T_GRID)
    c = renyi_second_order_coeff(fam, p)
    fd = finite_difference_coeff(fam, p)
    return {
        "family": label,
        "side": fam.side,
        "p": p,
        "coeff": c,
        "fd_coeff": fd,
        "rel_error": abs(c - fd) / abs(c) if c else math.inf,
        "slope": fit.slope,
        "exact": fit.exact,
    }


def _taylor_rows(args) -> list[dict]:
    _require_nonempty("p", args.p)
    if args.families < 0:
        raise PreconditionError("--families must be >= 0")
    if not 2 <= args.max_side <= 81:
        raise PreconditionError("--max-side must lie in [2, 81]")
    fams = [(f"random-{s:03d}", random_family(2 + s % (args.max_side - 1), [args.seed, s])) for s in range(args.families)]
    if args.stability:
        prm = DepolarizingParams(0.5, 2, 2)
        fams.append(("stability-11", stability_family(prm, PureState.basis([1, 1], 2))))
        vec = np.array([0, 0, 0, 1, 0, 0, 0, 1j], dtype=complex)
        fams.append(("stability-mixed", stability_family(DepolarizingParams(0.5, 2, 3), PureState(vec / np.sqrt(2), 2, 3))))
    if not fams:
        raise PreconditionError("no families selected")
    items = [(label, fam, p) for label, fam in fams for p in args.p]
    return _sorted(_pool_map(_taylor_point, items, args.workers), ("family", "p"))


def _fp_rows(args) -> list[dict]:
    for name in ("d", "lam", "p", "x"):
        _require_nonempty(name, getattr(args, name))
    if min(args.x) < 0:
        raise PreconditionError("--x values must be >= 0")
    rows = []
    for d in args.d:
        for lam in args.lam:
            prm = DepolarizingParams(lam, d)
            prm.require_interior()
            for p in args.p:
                if p < 1:
                    raise PreconditionError(f"fp-scan needs p >= 1, got {p}")
                for x in args.x:
                    row = {"d": d, "lam": lam, "r": prm.r, "p": p, "x": x}
                    if args.variant in ("canonical", "both"):
                        row["f_canonical"] = f_vn(x, prm) if p == 1 else f_p(x, prm, p)
                    if args.variant in ("as-printed", "both"):
                        row["f_as_printed"] = math.nan if p == 1 else f_p(x, prm, p, "as-printed")
                    rows.append(row)
                if args.verbose:
                    scan = monotonicity_scan(prm, p, max(3, max(args.x)))
                    print(
                        f"# d={d} lambda={lam} p={p}: worst step f(x+1)-f(x) = {scan.worst:.3e} at x = {scan.at}",
                        file=sys.stderr,
                    )
    return _sorted(rows, ("d", "lam", "p", "x"))


def _gap_rows(args) -> list[dict]:
    _require_nonempty("d", args.d)
    if args.table == "h":
        rows = []
        for d in args.d:
            scan = h_min_check(d, r_max=args.r_max)
            rows.append(
                {
                    "d": d,
                    "grid_min": scan.grid_min,
                    "argmin": scan.argmin,
                    "critical_point": h_critical_point(d) if d >= 4 else None,
                    "critical_value": h_critical_value(d) if d >= 4 else None,
                    "critical_value_quoted": h_critical_value_printed(d) if d >= 4 else None,
                }
            )
        return _sorted(rows, ("d",))
    _require_nonempty("lambda", args.lam)
    _require_nonempty("p", args.p)
    rows = []
    for d in args.d:
        for lam in args.lam:
            prm = DepolarizingParams(lam, d)
            prm.require_interior()
            for p in args.p:
                rows.append(
                    {
                        "d": d,
                        "lam": lam,
                        "r": prm.r,
                        "p": p,
                        "accept_coeff": accept_coeff(prm, p),
                        "reject_coeff": reject_coeff(p),
                        "gap": gap(p, prm),
                        "gap_limit": gap_limit(prm),
                    }
                )
    return _sorted(rows, ("d", "lam", "p"))


def _polygraph_rows(args) -> list[dict]:
    _require_nonempty("p", args.p)
    if args.delta_range is not None and len(args.delta_range) != 2:
        raise PreconditionError("--delta-range takes exactly two values lo,hi")
    base = polygraph.TrialConfig(
        params=DepolarizingParams(args.lam, args.d, args.n),
        p=args.p[0],
        eps=args.eps,
        honest=not args.cheat,
        trials=args.trials,
        seed=args.seed,
        sigma=args.sigma,
        delta_range=tuple(args.delta_range) if args.delta_range else None,
        delta_max=args.delta_max,
        allow_weight_one=args.allow_weight_one,
        restarts=args.restarts,
    )
    if args.report == "gap-width":
        return [vars(row) for row in polygraph.gap_width_report(base, args.p, workers=args.workers)]
    rows = []
    for p in sorted(set(args.p)):
        run = polygraph.run_protocol(replace(base, p=p), workers=args.workers)
        if args.report == "summary":
            s = run.summary
            rows.append(
                {
                    "p": p,
                    "trials": s.trials,
                    "accept": s.accept,
                    "undecided": s.undecided,
                    "reject": s.reject,
                    "false_accept": s.false_accept,
                    "false_reject": s.false_reject,
                    "accept_coeff": run.thresholds.accept_coeff,
                    "reject_coeff": run.thresholds.reject_coeff,
                    "theorem_backed": s.theorem_backed,
                }
            )
        else:
            rows.extend({"p": p, **polygraph.record_dict(r)} for r in run.records)
    return rows


def _verify(args) -> int:
    try:
        results = verify.run_checks(only=args.only, skip=args.skip)
    except KeyError as exc:
        raise UsageError(str(exc.args[0]))
    for r in results:
        print(r.line(), file=sys.stderr if _target(args) is None and args.format == "json" else sys.stdout)
    rows = [
        {"key": r.key, "title": r.title, "passed": r.passed, "blocking": r.blocking, "seconds": r.seconds, "detail": r.detail}
        for r in results
    ]
    if args.out or os.environ.get(OUTPUT_DIR_ENV) or args.format == "json":
        emit(rows, args)
    failed = [r.key for r in results if r.blocking and not r.passed]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


TABLES = {
    "entropy": _entropy_rows,
    "min-entropy": _min_entropy_rows,
    "taylor-check": _taylor_rows,
    "fp-scan": _fp_rows,
    "gap": _gap_rows,
    "polygraph": _polygraph_rows,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if args.command == "verify":
            return _verify(args)
        rows = TABLES[args.command](args)
        path = emit(rows, args)
        if path is not None and args.verbose:
            print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and friends
        return EXIT_OK if not exc.code else EXIT_USAGE
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
