"""Command line interface.

    nonlocal-trace norm --expr "x" --d 1 --kind S --domain=-1,2 --delta 1
    nonlocal-trace extend --expr "1 + x" --d 1 --beta 0 --delta 0.25 --points 0.1 0.3
    nonlocal-trace study trace --out trace.csv
    nonlocal-trace validate-cover --delta 0.1
"""

from __future__ import annotations

import argparse
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from ..extension import ExtensionConfig, extend_E, extend_EL
from ..fields import ExpressionError, field_from_expression
from ..geometry import StripDomain, rounded_square_cover
from ..kernels import KernelSpec
from ..quadrature import QuadratureError, QuadratureSpec
from .. import seminorms as sm
from .config import STUDIES, ConfigError, load_config
from .defaults import default_config
from .plotting import plot_rows
from .report import all_passed, write_csv
from .studies import run_study

log = logging.getLogger("nonlocal_trace")


def _interval(text: str) -> tuple[float, float]:
    a, b = (float(v) for v in text.split(","))
    return a, b


def _cmd_norm(args) -> int:
    u = field_from_expression(args.expr, args.d, args.support, args.smoothness)
    quad = QuadratureSpec(seed=args.seed)
    if args.kind == "local":
        res = sm.seminorm_local_trace(field_from_expression(args.expr, args.d - 1, args.support, args.smoothness),
                                      args.d, args.p, quad)
    else:
        a, b = _interval(args.domain)
        dom = StripDomain(a, b, args.d)
        if args.kind == "Lp":
            res = sm.norm_Lp(u, dom, args.p, quad)
        else:
            spec = KernelSpec(args.d, args.p, args.beta, args.delta)
            fn = {"S": sm.seminorm_S, "T": sm.seminorm_T, "normS": sm.norm_S, "normT": sm.norm_T}[args.kind]
            res = fn(u, dom, spec, quad)
    print(f"value={res.value!r} err_est={res.err_est!r} n_evals={res.n_evals}")
    return 0


def _cmd_extend(args) -> int:
    u = field_from_expression(args.expr, args.d, args.support, args.smoothness)
    spec = KernelSpec(args.d, args.p, args.beta, args.delta)
    if args.operator == "EL":
        ext = extend_EL(u, ExtensionConfig.for_kernel(spec, strip_len=args.strip_len))
    else:
        ext = extend_E(u, spec, ExtensionConfig.for_kernel(spec, cap=args.cap))
    pts = np.array([[float(c) for c in p.split(",")] for p in args.points])
    for p, v in zip(pts, ext(pts)):
        print(",".join(repr(float(c)) for c in p), repr(float(v)))
    return 0


def _cmd_study(args) -> int:
    cfg = load_config(args.config, args.name) if args.config else default_config(args.name)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out or cfg.csv or f"{args.name}.csv")
    log.info("running %s (%s)", args.name, out)
    rows = run_study(cfg, jobs=args.jobs, record_timing=args.record_timing)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out)
    if not args.no_plot:
        plot_path = Path(args.plot or cfg.plot or out.with_suffix(".svg"))
        plot_rows(rows, cfg.study, plot_path)
    bad = [r for r in rows if not r.passed]
    print(f"{len(rows)} rows, {len(bad)} failed -> {out}")
    for r in bad[:20]:
        print(f"  FAIL {r.quantity} d={r.d} p={r.p} beta={r.beta} delta={r.delta} L={r.L} {r.function_id}: "
              f"ratio={r.ratio!r} {r.note}")
    return 0 if all_passed(rows) else 1


def _cmd_validate_cover(args) -> int:
    cover = rounded_square_cover()
    report = cover.validate(args.delta, seed=args.seed or 0)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-trace", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def field_args(p):
        p.add_argument("--expr", required=True, help="field expression, e.g. 'x*bump(r, 1)'")
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--support", type=float, default=math.inf, help="support radius of the field")
        p.add_argument("--smoothness", default="Cinf", choices=("C0", "C1", "Cinf"))
        p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--beta", type=float, default=0.0)
        p.add_argument("--delta", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("norm", help="evaluate a norm or seminorm of a field")
    field_args(p)
    p.add_argument("--kind", default="S", choices=("Lp", "S", "T", "normS", "normT", "local"))
    p.add_argument("--domain", default="-1,0", help="axial interval a,b of the strip (use --domain=-1,0)")
    p.set_defaults(func=_cmd_norm)

    p = sub.add_parser("extend", help="evaluate an extension at points")
    field_args(p)
    p.add_argument("--operator", default="E", choices=("E", "EL"))
    p.add_argument("--strip-len", type=float, default=1.0)
    p.add_argument("--cap", type=float, default=1.0)
    p.add_argument("--points", nargs="+", required=True, help="comma separated coordinates")
    p.set_defaults(func=_cmd_extend)

    p = sub.add_parser("study", help="run a verification study")
    p.add_argument("name", choices=STUDIES)
    p.add_argument("--config", help="INI file with the experiment configuration")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--plot", help="SVG path (default: next to the CSV)")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--record-timing", action="store_true",
                   help="fill wall_ms (the CSV is then no longer reproducible byte for byte)")
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("validate-cover", help="check the chart cover of the rounded square")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_validate_cover)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExpressionError, QuadratureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
