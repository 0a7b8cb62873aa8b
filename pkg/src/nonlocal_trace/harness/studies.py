"""Verification studies.

Each study expands its config into independent tasks, runs every task to a
list of report rows, and appends summary rows computed from the task rows.
Tasks are plain tuples so they can be shipped to worker processes.
"""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import math
import time

import numpy as np

from ..extension import ExtensionConfig, extend_E, extend_EL, extend_general
from ..fields import FieldFunction
from ..geometry import (GraphDomain, StripDomain, distortion_constants, rounded_square_cover, sample_distortion)
from ..kernels import KernelSpec, nonlocal_laplacian
from ..quadrature import QuadratureError, SeminormResult
from .. import seminorms as sm
from .config import ExperimentConfig
from .report import Row, checked, failed, sort_rows

SPREAD_LIMIT = 4.0
GROWTH_LIMIT = 4.0
SAMPLE_POINTS = 1000


def scaling_tolerance(d: int) -> float:
    return 1e-3 if d == 1 else 1e-2


def equivalence_bounds(d: int, p: float, alpha: float) -> tuple[float, float]:
    return 2.0 ** (-d / p - 1.0), alpha ** (-d / p - 1.0)


def _ms(t0: float, record: bool) -> float | None:
    return round((time.perf_counter() - t0) * 1e3, 3) if record else None


def _rel_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def _scale(res: SeminormResult, factor: float) -> SeminormResult:
    return SeminormResult(res.value * factor, res.err_est * factor, res.n_evals)


def _pair_row(base: Row, lhs: SeminormResult, rhs: SeminormResult, ratio: float, **kw) -> Row:
    return replace(base, lhs=lhs.value, rhs=rhs.value, ratio=ratio, err_lhs=lhs.err_est, err_rhs=rhs.err_est,
                   n_evals=lhs.n_evals + rhs.n_evals, **kw)


def _safe_ratio(a: float, b: float) -> float:
    return a / b if b != 0 else (math.nan if a != 0 else 0.0)


def _graph_domain(cfg: ExperimentConfig, delta: float, d: int, kind: str | None = None) -> GraphDomain:
    kind = kind or cfg.domain.kind
    if kind == "flat":
        return GraphDomain.flat(delta, d)
    profile = cfg.domain.profile or {"wedge": "abs(x)", "tilted": "0.5*x"}[kind]
    return GraphDomain(profile, cfg.domain.lip, delta, d)


def _regions(cfg: ExperimentConfig, delta: float, d: int, kind: str | None = None):
    """(collar, hat) regions of the configured domain at horizon delta."""
    kind = kind or cfg.domain.kind
    if kind == "halfspace":
        return StripDomain(-delta, 0.0, d), StripDomain(-delta, math.inf, d)
    if kind == "rounded-square":
        cover = rounded_square_cover()
        return cover.collar_region(delta), cover.hat_region(delta)
    dom = _graph_domain(cfg, delta, d, kind)
    return dom.collar(), dom.hat()


# ---------------------------------------------------------------------------
# task expansion


def _grid(cfg: ExperimentConfig):
    for d in cfg.d:
        for p in cfg.p:
            for beta in cfg.betas(d, p):
                yield d, p, beta


def tasks_for(cfg: ExperimentConfig) -> list[tuple]:
    out = []
    s = cfg.study
    if s in ("scaling", "equivalence", "trace", "lipschitz-trace", "general-trace", "local-limit"):
        for d, p, beta in _grid(cfg):
            for f in cfg.functions_for(d):
                for delta in cfg.delta:
                    if s == "scaling":
                        out.extend(("scaling", d, p, beta, delta, L, f.ident) for L in cfg.strip_len)
                    else:
                        out.append((s, d, p, beta, delta, None, f.ident))
        if s == "lipschitz-trace":
            out.extend(("geometry", 2, None, None, delta, None, "") for delta in cfg.delta)
    elif s == "inverse-trace":
        for d, p, beta in _grid(cfg):
            for f in cfg.functions_for(d):
                out.extend(("inverse-trace", d, p, beta, delta, None, f.ident) for delta in cfg.delta)
                out.extend(("extension-bound", d, p, beta, 1.0, L, f.ident) for L in cfg.strip_len)
    elif s == "embedding":
        for d in cfg.d:
            for p in cfg.p:
                for f in cfg.functions_for(d):
                    out.extend(("embedding", d, p, 0.0, 1.0, L, f.ident) for L in cfg.strip_len)
    elif s == "laplacian-limit":
        for d in cfg.d:
            for beta in cfg.betas(d, 2.0):
                for f in cfg.functions_for(d):
                    out.extend(("laplacian-limit", d, 2.0, beta, delta, None, f.ident) for delta in cfg.delta)
    if s == "local-limit":
        out.extend(("boundary-target", 2, p, None, None, None, f.ident) for p in cfg.p for f in cfg.functions_for(2))
    return out


def run_task(cfg: ExperimentConfig, task: tuple, record_timing: bool = False) -> list[Row]:
    kind, d, p, beta, delta, L, fid = task
    base = Row(cfg.study, d, p, beta, delta, L, fid)
    t0 = time.perf_counter()
    try:
        rows = _RUNNERS[kind](cfg, base)
    except (QuadratureError, ValueError, NotImplementedError) as exc:
        rows = [failed(replace(base, quantity=kind), exc)]
    ms = _ms(t0, record_timing)
    return [replace(r, wall_ms=ms) for r in rows]


def _field(cfg: ExperimentConfig, base: Row) -> FieldFunction:
    for f in cfg.functions_for(base.d):
        if f.ident == base.function_id:
            return f.build(base.d)
    raise ValueError(f"unknown function {base.function_id!r}")


# ---------------------------------------------------------------------------
# task runners


def _run_scaling(cfg, base):
    d, p, beta, delta, L = base.d, base.p, base.beta, base.delta, base.L
    u = _field(cfg, base)
    v = u.scaled(delta)
    spec = KernelSpec(d, p, beta, delta)
    unit = spec.with_delta(1.0)
    q = cfg.quad
    strip_u, strip_v = StripDomain(-delta, L, d), StripDomain(-1.0, L / delta, d)
    half_u, half_v = StripDomain(-delta, math.inf, d), StripDomain(-1.0, math.inf, d)
    collar_u, collar_v = StripDomain(-delta, 0.0, d), StripDomain(-1.0, 0.0, d)
    fac_s, fac_l = delta ** (d - p), delta**d
    pairs = {
        "S_strip": (_scale(sm.energy_power(v, strip_v, unit, q), fac_s), lambda: sm.energy_power(u, strip_u, spec, q)),
        "S_halfstrip": (_scale(sm.energy_power(v, half_v, unit, q), fac_s), lambda: sm.energy_power(u, half_u, spec, q)),
        "T_collar": (_scale(sm.trace_power(v, collar_v, unit, q), fac_s), lambda: sm.trace_power(u, collar_u, spec, q)),
        "Lp_strip": (_scale(sm.lp_power(v, strip_v, p, q), fac_l), lambda: sm.lp_power(u, strip_u, p, q)),
        "Lp_halfstrip": (_scale(sm.lp_power(v, half_v, p, q), fac_l), lambda: sm.lp_power(u, half_u, p, q)),
        "Lp_collar": (_scale(sm.lp_power(v, collar_v, p, q), fac_l), lambda: sm.lp_power(u, collar_u, p, q)),
    }
    rows = []
    tol = scaling_tolerance(d)
    for name, (lhs, rhs_fn) in pairs.items():
        rhs = rhs_fn()
        gap = _rel_gap(lhs.value, rhs.value)
        rows.append(checked(_pair_row(base, lhs, rhs, gap, quantity=name), gap < tol))
    return rows


def _run_equivalence(cfg, base):
    d, p, beta, delta = base.d, base.p, base.beta, base.delta
    u = _field(cfg, base)
    box = StripDomain(-1.0, 1.0, d)
    spec = KernelSpec(d, p, beta, delta)
    ref = sm.seminorm_S(u, box, spec, cfg.quad)
    rows = []
    for alpha in cfg.alpha:
        res = sm.seminorm_S(u, box, spec.with_delta(alpha * delta), cfg.quad)
        ratio = _safe_ratio(res.value, ref.value)
        lo, hi = equivalence_bounds(d, p, alpha)
        ok = lo - 1e-3 <= ratio <= hi + 1e-3 or ref.value == res.value == 0
        rows.append(checked(_pair_row(base, res, ref, ratio, quantity=f"alpha={alpha:.6g}"), ok))
    return rows


def _trace_ratio(cfg, base, kind=None):
    d, p, beta, delta = base.d, base.p, base.beta, base.delta
    u = _field(cfg, base)
    spec = KernelSpec(d, p, beta, delta)
    collar, hat = _regions(cfg, delta, d, kind)
    t_norm = sm.norm_T(u, collar, spec, cfg.quad)
    s_norm = _scale(sm.norm_S(u, hat, spec, cfg.quad), abs(d + p - beta) ** (-1.0 / p))
    return t_norm, s_norm


def _run_trace(cfg, base):
    t_norm, s_norm = _trace_ratio(cfg, base)
    ratio = _safe_ratio(t_norm.value, s_norm.value)
    return [checked(_pair_row(base, t_norm, s_norm, ratio, quantity="rho"), math.isfinite(ratio))]


def _run_lipschitz_trace(cfg, base):
    rows = _run_trace(cfg, base)
    flat = _trace_ratio(cfg, base, "flat")
    half = _trace_ratio(cfg, base, "halfspace")
    rho_flat = _safe_ratio(flat[0].value, flat[1].value)
    rho_half = _safe_ratio(half[0].value, half[1].value)
    gap = _rel_gap(rho_flat, rho_half)
    rows.append(checked(replace(base, quantity="flat_vs_halfspace", lhs=rho_flat, rhs=rho_half, ratio=gap,
                                n_evals=sum(r.n_evals for r in (*flat, *half))), gap < 1e-6))
    return rows


def _run_general_trace(cfg, base):
    rows = _run_trace(cfg, base)
    d, p, beta, delta = base.d, base.p, base.beta, base.delta
    u = _field(cfg, base)
    spec = KernelSpec(d, p, beta, delta)
    cover = rounded_square_cover()
    ext = extend_general(u, cover, spec, ExtensionConfig.for_kernel(spec, cap=cfg.cap, quad=cfg.quad))
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cover.extent
    pts = rng.uniform(lo - delta, hi + delta, size=(SAMPLE_POINTS * 40, d))
    pts = pts[cover.in_collar(pts, delta)][:SAMPLE_POINTS]
    diff = float(np.max(np.abs(ext(pts) - u(pts))))
    rows.append(checked(replace(base, quantity="restriction", lhs=diff, rhs=0.0, ratio=diff, n_evals=2 * len(pts)),
                        diff == 0.0 and len(pts) == SAMPLE_POINTS))
    return rows


def _run_geometry(cfg, base):
    delta = base.delta
    dom = _graph_domain(cfg, delta, 2)
    rng = np.random.default_rng(cfg.seed)
    xb = rng.uniform(-2.0, 2.0, size=(SAMPLE_POINTS, 1))
    thick = dom.height(xb) - dom.psi(xb)
    lo, hi = float(np.min(thick)) / delta, float(np.max(thick)) / (delta * math.sqrt(1 + dom.lip**2))
    rows = [checked(replace(base, quantity="collar_thickness", lhs=lo, rhs=hi, ratio=hi / lo, n_evals=len(xb)),
                    lo >= 1 - 1e-8 and hi <= 1 + 1e-8)]
    consts = distortion_constants(dom.lip)
    ratios = sample_distortion(dom, SAMPLE_POINTS, rng)
    rmin, rmax = float(np.min(ratios)), float(np.max(ratios))
    rows.append(checked(replace(base, quantity="distortion", lhs=rmin, rhs=rmax, ratio=rmax / rmin,
                                n_evals=len(ratios), note=f"bounds [{consts.k_bwd:.6g}, {consts.k_fwd:.6g}]"),
                        consts.k_bwd - 1e-12 <= rmin and rmax <= consts.k_fwd + 1e-12))
    return rows


def _run_inverse_trace(cfg, base):
    d, p, beta, delta = base.d, base.p, base.beta, base.delta
    u = _field(cfg, base)
    spec = KernelSpec(d, p, beta, delta)
    ext = extend_E(u, spec, ExtensionConfig.for_kernel(spec, cap=cfg.cap, quad=cfg.quad))
    lhs = sm.norm_S(ext, StripDomain(-delta, math.inf, d), spec, cfg.quad)
    rhs = _scale(sm.norm_T(u, StripDomain(-delta, 0.0, d), spec, cfg.quad), abs(d - beta) ** (-1.0 / p))
    sigma = _safe_ratio(lhs.value, rhs.value)
    rows = [checked(_pair_row(base, lhs, rhs, sigma, quantity="sigma", L=ext.strip_len), math.isfinite(sigma))]
    rng = np.random.default_rng(cfg.seed)
    pts = np.empty((SAMPLE_POINTS, d))
    pts[:, 0] = -delta * rng.uniform(0.0, 1.0, SAMPLE_POINTS)
    pts[:, 1:] = rng.uniform(u.support_lo[1:] - 1, u.support_hi[1:] + 1, size=(SAMPLE_POINTS, d - 1))
    diff = float(np.max(np.abs(ext(pts) - u(pts))))
    rows.append(checked(replace(base, quantity="restriction", L=ext.strip_len, lhs=diff, rhs=0.0, ratio=diff,
                                n_evals=2 * SAMPLE_POINTS), diff == 0.0))
    return rows


def _run_extension_bound(cfg, base):
    d, p, beta, L = base.d, base.p, base.beta, base.L
    u = _field(cfg, base)
    spec = KernelSpec(d, p, beta, 1.0)
    ext = extend_EL(u, ExtensionConfig.for_kernel(spec, strip_len=L, quad=cfg.quad))
    q = cfg.quad
    whole, collar = StripDomain(-1.0, math.inf, d), StripDomain(-1.0, 0.0, d)
    lp_ext = sm.lp_power(ext, whole, p, q)
    lp_u = sm.lp_power(u, collar, p, q)
    rows = [checked(_pair_row(base, lp_ext, _scale(lp_u, L), _safe_ratio(lp_ext.value, L * lp_u.value),
                              quantity="lp_bound"), True)]
    s_ext = sm.energy_power(ext, whole, spec, q)
    t_u = sm.trace_power(u, collar, spec, q)
    rhs = SeminormResult(L ** (-(p - 1)) * lp_u.value + t_u.value / abs(beta - d),
                         L ** (-(p - 1)) * lp_u.err_est + t_u.err_est / abs(beta - d), lp_u.n_evals + t_u.n_evals)
    rows.append(checked(_pair_row(base, s_ext, rhs, _safe_ratio(s_ext.value, rhs.value), quantity="seminorm_bound"),
                        True))
    return rows


def _run_embedding(cfg, base):
    d, p, L = base.d, base.p, base.L
    u = _field(cfg, base)
    spec = KernelSpec(d, p, 0.0, 1.0)
    q = cfg.quad
    strip = StripDomain(-1.0, L, d)
    lhs = sm.lp_power(u, StripDomain(-1.0, 0.0, d), p, q)
    lp = sm.lp_power(u, strip, p, q)
    en = sm.energy_power(u, strip, spec, q)
    rhs = SeminormResult(lp.value / L + L ** (p - 1) * en.value, lp.err_est / L + L ** (p - 1) * en.err_est,
                         lp.n_evals + en.n_evals)
    c_hat = _safe_ratio(lhs.value, rhs.value)
    ok = c_hat <= 1 + 1e-9 if L < 1 else math.isfinite(c_hat)
    return [checked(_pair_row(base, lhs, rhs, c_hat, quantity="c_hat"), ok)]


def boundary_field(u: FieldFunction, cfg_breaks=()) -> FieldFunction:
    """The restriction x_bar -> u(0, x_bar) as a field on the boundary plane."""
    def ev(xb):
        pts = np.zeros((xb.shape[0], u.d))
        pts[:, 1:] = xb
        return u(pts)

    return FieldFunction(ev, u.d - 1, smoothness=u.smoothness, support_box=(u.support_lo[1:], u.support_hi[1:]),
                         breakpoints=cfg_breaks, name=f"{u.name}|boundary")


def _run_local_limit(cfg, base):
    d, p, beta, delta = base.d, base.p, base.beta, base.delta
    f = next(f for f in cfg.functions_for(d) if f.ident == base.function_id)
    u = f.build(d)
    spec = KernelSpec(d, p, beta, delta)
    t = sm.trace_power(u, StripDomain(-delta, 0.0, d), spec, cfg.quad)
    w = sm.local_trace_power(boundary_field(u, f.breakpoints), d, p, cfg.quad)
    e = abs(t.value - w.value)
    return [checked(_pair_row(base, t, w, e, quantity="error"), math.isfinite(e))]


def _run_boundary_target(cfg, base):
    f = next(f for f in cfg.functions_for(base.d) if f.ident == base.function_id)
    g = boundary_field(f.build(base.d), f.breakpoints)
    fine = sm.local_trace_power(g, base.d, base.p, cfg.quad)
    finer = sm.local_trace_power(g, base.d, base.p, cfg.quad.refined())
    gap = _rel_gap(fine.value, finer.value)
    return [checked(_pair_row(base, fine, finer, gap, quantity="target_self_consistency"), gap < 1e-3)]


def local_laplacian(u: FieldFunction, x: np.ndarray, h: float = 1e-2) -> float:
    """Fourth-order central differences of the Laplacian at one point."""
    total = 0.0
    for axis in range(u.d):
        e = np.zeros(u.d)
        e[axis] = h
        stencil = np.stack([x - 2 * e, x - e, x, x + e, x + 2 * e])
        v = u(stencil)
        total += (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)
    return total


def _run_laplacian(cfg, base):
    d, beta, delta = base.d, base.beta, base.delta
    u = _field(cfg, base)
    spec = KernelSpec(d, 2.0, beta, delta)
    x = np.zeros(d)
    lhs = nonlocal_laplacian(spec, u, x, cfg.quad)
    rhs = local_laplacian(u, x)
    err = abs(lhs - rhs)
    return [checked(replace(base, quantity="laplacian", lhs=lhs, rhs=rhs, ratio=err, n_evals=0), math.isfinite(err))]


_RUNNERS = {
    "scaling": _run_scaling,
    "equivalence": _run_equivalence,
    "trace": _run_trace,
    "lipschitz-trace": _run_lipschitz_trace,
    "general-trace": _run_general_trace,
    "geometry": _run_geometry,
    "inverse-trace": _run_inverse_trace,
    "extension-bound": _run_extension_bound,
    "embedding": _run_embedding,
    "local-limit": _run_local_limit,
    "boundary-target": _run_boundary_target,
    "laplacian-limit": _run_laplacian,
}


# ---------------------------------------------------------------------------
# summaries


def _spread_rows(study, groups, quantity, limit=SPREAD_LIMIT, **fixed):
    out = []
    for key, rows in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        vals = [r.ratio for r in rows]
        d, p, beta, L, fid = key
        base = Row(study, d, p, beta, fixed.get("delta"), L, fid, quantity)
        if not all(r.passed for r in rows):
            out.append(replace(base, passed=False, note="constituent rows failed"))
            continue
        hi, lo = max(vals), min(vals)
        spread = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
        out.append(replace(base, lhs=hi, rhs=lo, ratio=spread, n_evals=sum(r.n_evals for r in rows),
                           passed=spread <= limit))
    return out


def summarize(cfg: ExperimentConfig, rows: list[Row]) -> list[Row]:
    s = cfg.study
    out = []
    if s in ("trace", "lipschitz-trace", "general-trace"):
        groups = defaultdict(list)
        for r in rows:
            if r.quantity == "rho":
                groups[(r.d, r.p, r.beta, None, r.function_id)].append(r)
        out += _spread_rows(s, groups, "rho_spread_over_delta")
    elif s == "inverse-trace":
        sig, lp, sem = defaultdict(list), defaultdict(list), defaultdict(list)
        for r in rows:
            if r.quantity == "sigma":
                sig[(r.d, r.p, r.beta, None, r.function_id)].append(r)
            elif r.quantity == "lp_bound":
                lp[(r.d, r.p, r.beta, None, r.function_id)].append(r)
            elif r.quantity == "seminorm_bound":
                sem[(r.d, r.p, None, r.L, r.function_id)].append(r)
        out += _spread_rows(s, sig, "sigma_spread_over_delta")
        out += _spread_rows(s, lp, "lp_bound_spread_over_L", delta=1.0)
        out += _spread_rows(s, sem, "seminorm_bound_spread_over_beta", delta=1.0)
    elif s == "embedding":
        groups = defaultdict(list)
        for r in rows:
            if r.quantity == "c_hat" and r.L >= 1:
                groups[(r.d, r.p, r.function_id)].append(r)
        for (d, p, fid), grp in sorted(groups.items()):
            grp = sorted(grp, key=lambda r: r.L)
            base = Row(s, d, p, 0.0, 1.0, None, fid, "c_hat_growth_over_L")
            if not all(r.passed for r in grp):
                out.append(replace(base, note="constituent rows failed"))
                continue
            first, top = grp[0].ratio, max(r.ratio for r in grp)
            growth = _safe_ratio(top, first)
            out.append(replace(base, lhs=top, rhs=first, ratio=growth, passed=growth <= GROWTH_LIMIT))
    elif s == "local-limit":
        groups = defaultdict(list)
        for r in rows:
            if r.quantity == "error":
                groups[(r.d, r.p, r.beta, r.function_id)].append(r)
        for (d, p, beta, fid), grp in sorted(groups.items()):
            grp = sorted(grp, key=lambda r: -r.delta)
            errs = [r.ratio for r in grp]
            for a, b in zip(grp[:-1], grp[1:]):
                rate = math.log2(a.ratio / b.ratio) if a.ratio > 0 and b.ratio > 0 else math.nan
                out.append(Row(s, d, p, beta, b.delta, None, fid, "rate", a.ratio, b.ratio, rate, passed=True))
            monotone = all(x > y for x, y in zip(errs[:-1], errs[1:]))
            ratio = _safe_ratio(errs[-1], errs[0])
            ok = monotone and errs[-1] < errs[0] / 4 and all(r.passed for r in grp)
            out.append(Row(s, d, p, beta, None, None, fid, "error_decay", errs[-1], errs[0], ratio, passed=ok,
                           note="" if monotone else "not monotone"))
    elif s == "laplacian-limit":
        groups = defaultdict(list)
        for r in rows:
            if r.quantity == "laplacian":
                groups[(r.d, r.beta, r.function_id)].append(r)
        for (d, beta, fid), grp in sorted(groups.items()):
            grp = sorted(grp, key=lambda r: -r.delta)
            errs = [r.ratio for r in grp]
            exact = all(e < 1e-6 for e in errs)
            decreasing = all(b < a for a, b in zip(errs[:-1], errs[1:]))
            out.append(Row(s, d, 2.0, beta, None, None, fid, "convergence", errs[-1], errs[0],
                           _safe_ratio(errs[-1], errs[0]), passed=exact or decreasing,
                           note="exact" if exact else ("" if decreasing else "not decreasing")))
    return out


# ---------------------------------------------------------------------------
# driver


def _task_worker(args):
    cfg, task, record = args
    return run_task(cfg, task, record)


def run_study(cfg: ExperimentConfig, jobs: int = 1, record_timing: bool = False) -> list[Row]:
    """Run every task of the study and return sorted task and summary rows."""
    tasks = tasks_for(cfg)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_task_worker, [(cfg, t, record_timing) for t in tasks]))
    else:
        chunks = [run_task(cfg, t, record_timing) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return sort_rows(rows + summarize(cfg, rows))
