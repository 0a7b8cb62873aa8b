"""L^p norms, nonlocal energy and trace seminorms, and the boundary seminorm.

In one dimension every double integral is reduced to the offset variable
``h = y - x``::

    int int w(|y-x|) |u(y)-u(x)|^p dy dx = 2 int_0^H w(h) F(h) dh,
    F(h) = int |u(x+h) - u(x)|^p dx,

and both integrals use Gauss rules on cells aligned with the breakpoints of
the field. The singular factor ``h^-a`` near 0 is absorbed into a
Gauss-Jacobi weight together with the vanishing order of ``F``.

In two and three dimensions the integrals are estimated by randomized
quasi-Monte Carlo (scrambled Sobol, several independent replicates). The
radial singularity is removed by sampling ``t = (r/delta)^(d+m-beta)``
uniformly, which turns the kernel into a bounded factor.
"""

from __future__ import annotations

import math

import numpy as np

from .fields import FieldFunction
from .geometry import Piece, StripDomain
from .kernels import KernelSpec, sphere_area
from .quadrature import (QuadratureError, QuadratureSpec, SeminormResult, composite_legendre, gauss_jacobi,
                         gauss_legendre, replicate_mean, root_of_power, sobol_replicates)


def vanishing_order(u: FieldFunction, p: float) -> float:
    """Exponent m with F(h) = O(h^m) as h -> 0."""
    return 1.0 if u.smoothness == "C0" else float(p)


def _combine(fine: float, coarse: float, n: int) -> SeminormResult:
    return SeminormResult(fine, abs(fine - coarse), n)


def _axial_support(u: FieldFunction) -> tuple[float, float]:
    return float(u.support_lo[0]), float(u.support_hi[0])


def _cells(points, lo: float, hi: float, depth: int) -> np.ndarray:
    """Cell edges on [lo, hi]: the given points plus a uniform 2^depth grid."""
    pts = [p for p in points if lo < p < hi]
    grid = np.linspace(lo, hi, 2**depth + 1)
    return np.unique(np.concatenate([grid, pts]))


# ---------------------------------------------------------------------------
# one dimension


def _lp_power_1d(u: FieldFunction, lo: float, hi: float, p: float, quad: QuadratureSpec):
    s1, s2 = _axial_support(u)
    a, b = max(lo, s1), min(hi, s2)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise QuadratureError("unbounded effective region")
    if a >= b:
        return 0.0, 0
    edges = _cells(u.breakpoints + u.hints, a, b, quad.depth)
    x, w = composite_legendre(edges, quad.order, 0)
    return math.fsum(w * np.abs(u(x[:, None])) ** p), x.size


class _Pair1D:
    """Evaluator of F(h) for a field on the interval (A, B)."""

    def __init__(self, u: FieldFunction, A: float, B: float, p: float, quad: QuadratureSpec):
        self.u, self.A, self.B, self.p, self.quad = u, A, B, p, quad
        self.s1, self.s2 = _axial_support(u)
        self.marks = np.array(sorted(set(u.breakpoints + u.hints)))
        self.n_evals = 0

    def F(self, h: float) -> float:
        lo = max(self.A, self.s1 - h)
        hi = min(self.B - h, self.s2)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise QuadratureError("unbounded effective region")
        if hi <= lo:
            return 0.0
        edges = _cells(np.concatenate([self.marks, self.marks - h]), lo, hi, self.quad.depth)
        x, w = composite_legendre(edges, self.quad.order, 0)
        diff = self.u((x + h)[:, None]) - self.u(x[:, None])
        self.n_evals += 2 * x.size
        return math.fsum(w * np.abs(diff) ** self.p)


def _offset_breaks(u: FieldFunction, A: float, B: float) -> np.ndarray:
    s1, s2 = _axial_support(u)
    hard = [v for v in (A, B, s1, s2, *u.breakpoints) if math.isfinite(v)]
    hard = np.unique(hard)
    diffs = np.abs(hard[:, None] - hard[None, :]).ravel()
    return np.unique(diffs[diffs > 0])


def _pair_power_1d(u: FieldFunction, A: float, B: float, p: float, segments, quad: QuadratureSpec,
                   tail_norm: float | None = None):
    """2 * sum over segments of int coef h^-expo F(h) dh.

    ``segments`` is a list of (h_lo, h_hi, coef, expo). When the last segment
    is unbounded, F is constant beyond the support diameter and that part is
    integrated in closed form using ``tail_norm``.
    """
    pair = _Pair1D(u, A, B, p, quad)
    m = vanishing_order(u, p)
    s1, s2 = _axial_support(u)
    h_max = B - A
    if math.isinf(h_max):
        if not (math.isfinite(s1) and math.isfinite(s2)):
            raise QuadratureError("unbounded effective region")
        h_flat = s2 - s1 if math.isinf(A) else s2 - A
    else:
        h_flat = h_max
    breaks = _offset_breaks(u, A, B)
    total = []
    for h_lo, h_hi, coef, expo in segments:
        top = min(h_hi, h_flat)
        if top > h_lo:
            edges = np.unique(np.concatenate([[h_lo, top], breaks[(breaks > h_lo) & (breaks < top)]]))
            for a, b in zip(edges[:-1], edges[1:]):
                if a == 0.0:
                    if m - expo <= -1:
                        raise QuadratureError(
                            f"integrand not integrable at the diagonal (order {m}, singularity {expo}); "
                            "the field is too rough for this kernel")
                    t, w = gauss_jacobi(quad.order, m - expo)
                    vals = np.array([pair.F(b * ti) / (b * ti) ** m for ti in t])
                    total.append(coef * b ** (m - expo + 1) * math.fsum(w * vals))
                else:
                    xs, ws = composite_legendre(_cells((), a, b, quad.depth), quad.order, 0)
                    vals = np.array([pair.F(h) for h in xs])
                    total.append(coef * math.fsum(ws * vals * xs ** (-expo)))
        if h_hi > h_flat and math.isinf(h_max):
            if tail_norm is None:
                raise QuadratureError("unbounded offsets need the field norm")
            start = max(h_lo, h_flat)
            if math.isinf(h_hi):
                if expo <= 1:
                    raise QuadratureError("tail weight not integrable")
                piece = start ** (1 - expo) / (expo - 1)
            else:
                piece = (h_hi ** (1 - expo) - start ** (1 - expo)) / (1 - expo) if expo != 1 else math.log(h_hi / start)
            total.append(coef * tail_norm * piece)
    return 2.0 * math.fsum(total), pair.n_evals


def _s_segments(spec: KernelSpec):
    scale = spec.c_norm * spec.delta ** (-spec.excess)
    return [(0.0, spec.delta, scale, spec.beta)]


def _t_segments(spec: KernelSpec, quad: QuadratureSpec):
    delta, d, p, beta = spec.delta, spec.d, spec.p, spec.beta
    near = delta ** (beta - d - p)
    split = quad.split_radius * delta
    return [(0.0, split, near, beta), (split, delta, near, beta), (delta, math.inf, delta**-2.0, d + p - 2.0)]


def _s_segments_split(spec: KernelSpec, quad: QuadratureSpec):
    (lo, hi, c, e), = _s_segments(spec)
    split = quad.split_radius * spec.delta
    return [(0.0, split, c, e), (split, hi, c, e)]


# ---------------------------------------------------------------------------
# two and three dimensions


def _directions(xi: np.ndarray, d: int) -> np.ndarray:
    if d == 2:
        th = 2.0 * math.pi * xi[:, 0]
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    z = 2.0 * xi[:, 0] - 1.0
    ph = 2.0 * math.pi * xi[:, 1]
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([z, s * np.cos(ph), s * np.sin(ph)], axis=1)


class _Patch:
    """A region piece clipped to a box, with a uniform parametrization."""

    def __init__(self, piece: Piece, lo: np.ndarray, hi: np.ndarray, d: int):
        self.piece, self.lo, self.hi, self.d = piece, lo, hi, d
        if piece.cross_lo is not None:
            self.lo = self.lo.copy()
            self.hi = self.hi.copy()
            self.lo[1:] = np.maximum(self.lo[1:], piece.cross_lo)
            self.hi[1:] = np.minimum(self.hi[1:], piece.cross_hi)
        if not np.all(np.isfinite(self.lo[1:])) or not np.all(np.isfinite(self.hi[1:])):
            raise QuadratureError("unbounded effective region")
        self.empty = bool(np.any(self.hi[1:] <= self.lo[1:]))
        self.cross_volume = float(np.prod(self.hi[1:] - self.lo[1:])) if not self.empty else 0.0

    def sample(self, xi: np.ndarray):
        """Points and Jacobian weights from uniform variates of shape (n, d)."""
        d = self.d
        xb = self.lo[1:] + xi[:, : d - 1] * (self.hi[1:] - self.lo[1:])
        lower = np.maximum(self.piece.lower(xb), self.lo[0])
        upper = np.minimum(self.piece.upper(xb), self.hi[0])
        length = np.maximum(upper - lower, 0.0)
        if not np.all(np.isfinite(length)):
            raise QuadratureError("unbounded effective region")
        pts = np.empty((xi.shape[0], d))
        pts[:, 0] = lower + xi[:, d - 1] * length
        pts[:, 1:] = xb
        jac = length * self.cross_volume
        if self.piece.mask is not None:
            jac = jac * self.piece.mask(pts)
        return pts, jac


def _patches(region, lo: np.ndarray, hi: np.ndarray) -> list[_Patch]:
    out = []
    for piece in region.pieces():
        patch = _Patch(piece, lo, hi, region.d)
        if not patch.empty:
            out.append(patch)
    return out


def _support_box(u: FieldFunction, pad: float):
    return u.support_lo - pad, u.support_hi + pad


def _near_power(u: FieldFunction, region, spec: KernelSpec, quad: QuadratureSpec, coef: float):
    """Per-replicate estimates of int int_{|y-x|<delta} coef r^-beta |u(y)-u(x)|^p."""
    d, p, beta, delta = spec.d, spec.p, spec.beta, spec.delta
    m = vanishing_order(u, p)
    expo = d + m - beta
    if u.smoothness == "C0" and beta >= d:
        raise QuadratureError("sampling does not converge for rough fields with beta >= d; "
                              "use a smoother field or a smaller beta")
    factor = coef * sphere_area(d) * delta ** (m - p + d + p - beta) / expo
    # coef * int_0^delta r^(d-1-beta) (.) dr = factor * E_t[(.)/r^m] with the area average over directions
    lo, hi = _support_box(u, delta)
    patches = _patches(region, lo, hi)
    t_split = quad.split_radius**expo
    strata = [(0.0, t_split), (t_split, 1.0)]
    per_rep = np.zeros(quad.replicates)
    n_evals = 0
    for ip, patch in enumerate(patches):
        for js, (t0, t1) in enumerate(strata):
            sets = sobol_replicates(2 * d, quad.mc_samples, quad.replicates, quad.seed, stream=100 * ip + js)
            for r, xi in enumerate(sets):
                x, jac = patch.sample(xi[:, :d])
                live = jac > 0
                x, jac, xi_l = x[live], jac[live], xi[live]
                t = t0 + (t1 - t0) * xi_l[:, -1]
                t = np.maximum(t, 1e-300)
                rad = delta * t ** (1.0 / expo)
                y = x + rad[:, None] * _directions(xi_l[:, d:2 * d - 1], d)
                inside = region.contains(y)
                g = np.zeros(x.shape[0])
                if np.any(inside):
                    diff = u(y[inside]) - u(x[inside])
                    g[inside] = np.abs(diff) ** p / rad[inside] ** m
                    n_evals += 2 * int(inside.sum())
                per_rep[r] += (t1 - t0) * math.fsum(jac * g) / xi.shape[0]
    return factor * per_rep, n_evals


def _tail_nodes(patch: _Patch, side: int, b_in: float, width: float, delta: float, order: int):
    """Cross nodes beyond the slab edge ``b_in`` with weights for int dy_bar."""
    edges = [0.0]
    step = delta
    while step < width:
        edges.append(step)
        step *= 2.0
    edges.append(width)
    offs, wts = composite_legendre(np.array(edges), order, 0)
    t, w = gauss_jacobi(order, 0.0)
    far_off = width / t
    far_w = w * width / t**2
    offs = np.concatenate([offs, far_off])
    wts = np.concatenate([wts, far_w])
    return b_in + side * offs, wts


def _far_power(u: FieldFunction, region, spec: KernelSpec, quad: QuadratureSpec):
    """Per-replicate estimates of the |y-x| >= delta part of the trace integral."""
    d, p, delta = spec.d, spec.p, spec.delta
    a = d + p - 2.0
    lo, hi = _support_box(u, delta)
    lo[0], hi[0] = -math.inf, math.inf
    if getattr(region, "bounded", False):
        lo, hi = np.full(d, -math.inf), np.full(d, math.inf)
    patches = _patches(region, lo, hi)
    per_rep = np.zeros(quad.replicates)
    n_evals = 0
    need_tail = not getattr(region, "bounded", False)
    if need_tail and d != 2:
        raise QuadratureError("trace seminorms on unbounded collars are implemented for d <= 2")
    for ip, pa in enumerate(patches):
        for jp, pb in enumerate(patches):
            sets = sobol_replicates(2 * d, quad.mc_samples, quad.replicates, quad.seed, stream=1000 + 10 * ip + jp)
            for r, xi in enumerate(sets):
                x, jx = pa.sample(xi[:, :d])
                y, jy = pb.sample(xi[:, d:])
                dist = np.linalg.norm(y - x, axis=1)
                live = (jx > 0) & (jy > 0) & (dist >= delta)
                g = np.zeros(x.shape[0])
                if np.any(live):
                    diff = u(y[live]) - u(x[live])
                    n_evals += 2 * int(live.sum())
                    g[live] = np.abs(diff) ** p * dist[live] ** (-a) * jx[live] * jy[live]
                per_rep[r] += math.fsum(g) / xi.shape[0] / delta**2
    if need_tail:
        t_rep, t_evals = _tail_power(u, patches, spec, quad)
        per_rep += t_rep
        n_evals += t_evals
    return per_rep, n_evals


def _tail_power(u: FieldFunction, patches, spec: KernelSpec, quad: QuadratureSpec):
    """Pairs with one point beyond the cross slab: 2 int |u(x)|^p int_{far} w dy dx."""
    d, p, delta = spec.d, spec.p, spec.delta
    a = d + p - 2.0
    s_t, w_t = gauss_legendre(quad.order)
    per_rep = np.zeros(quad.replicates)
    n_evals = 0
    for ip, pa in enumerate(patches):
        b_lo, b_hi = pa.lo[1], pa.hi[1]
        width = b_hi - b_lo
        nodes = []
        for pb in patches:
            for side, edge in ((1, b_hi), (-1, b_lo)):
                yb, wy = _tail_nodes(pb, side, edge, width, delta, quad.order)
                lower = pb.piece.lower(yb[:, None])
                upper = pb.piece.upper(yb[:, None])
                thick = upper - lower
                if not np.all(np.isfinite(thick)):
                    raise QuadratureError("trace tail needs a collar of finite thickness")
                yt = lower[:, None] + thick[:, None] * s_t[None, :]
                wgt = (wy * thick)[:, None] * w_t[None, :]
                nodes.append((np.repeat(yb, s_t.size), yt.ravel(), wgt.ravel()))
        yb = np.concatenate([n[0] for n in nodes])
        yt = np.concatenate([n[1] for n in nodes])
        wy = np.concatenate([n[2] for n in nodes])
        sets = sobol_replicates(d, quad.mc_samples, quad.replicates, quad.seed, stream=5000 + ip)
        for r, xi in enumerate(sets):
            x, jx = pa.sample(xi)
            ux = np.zeros(x.shape[0])
            live = jx > 0
            ux[live] = u(x[live])
            n_evals += int(live.sum())
            nz = np.nonzero(ux != 0)[0]
            acc = 0.0
            for chunk in np.array_split(nz, max(1, nz.size // 2048)):
                if chunk.size == 0:
                    continue
                dx = yt[None, :] - x[chunk, 0:1]
                dy = yb[None, :] - x[chunk, 1:2]
                inner = (np.hypot(dx, dy) ** (-a)) @ wy
                acc += math.fsum(np.abs(ux[chunk]) ** p * jx[chunk] * inner)
            per_rep[r] += 2.0 * acc / xi.shape[0] / delta**2
    return per_rep, n_evals


def _lp_power_nd(u: FieldFunction, region, p: float, quad: QuadratureSpec):
    d = region.d
    lo, hi = u.support_lo.copy(), u.support_hi.copy()
    patches = _patches(region, lo, hi)
    total, n = 0.0, 0
    cells = 2 ** (quad.depth + 1)
    for patch in patches:
        grids = []
        for _ in range(d):
            x, w = composite_legendre(np.linspace(0.0, 1.0, cells + 1), quad.order, 0)
            grids.append((x, w))
        mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")
        weight = grids[0][1]
        for g in grids[1:]:
            weight = np.multiply.outer(weight, g[1])
        xi = np.stack([m.ravel() for m in mesh], axis=1)
        # the last variate is the axial one
        xi = np.concatenate([xi[:, 1:], xi[:, :1]], axis=1)
        pts, jac = patch.sample(xi)
        live = jac > 0
        vals = np.zeros(pts.shape[0])
        vals[live] = np.abs(u(pts[live])) ** p
        n += int(live.sum())
        total += math.fsum(weight.ravel() * jac * vals)
    return total, n


# ---------------------------------------------------------------------------
# public operations


def _is_strip_1d(domain) -> bool:
    return isinstance(domain, StripDomain) and domain.d == 1


def lp_power(u: FieldFunction, domain, p: float, quad: QuadratureSpec | None = None) -> SeminormResult:
    """The integral of |u|^p over ``domain``."""
    quad = quad or QuadratureSpec()
    if domain.d != u.d:
        raise ValueError("field and domain dimensions differ")
    if _is_strip_1d(domain):
        A, B = domain.axial_bounds()
        fine, n1 = _lp_power_1d(u, A, B, p, quad)
        coarse, n2 = _lp_power_1d(u, A, B, p, quad.coarser())
    else:
        fine, n1 = _lp_power_nd(u, domain, p, quad)
        coarse, n2 = _lp_power_nd(u, domain, p, quad.coarser())
    return _combine(fine, coarse, n1 + n2)


def norm_Lp(u: FieldFunction, domain, p: float, quad: QuadratureSpec | None = None) -> SeminormResult:
    return root_of_power(lp_power(u, domain, p, quad), p)


def _qmc_result(per_rep: np.ndarray, n: int) -> SeminormResult:
    mean, err = replicate_mean(per_rep)
    return SeminormResult(max(mean, 0.0), err, n)


def energy_power(u: FieldFunction, domain, spec: KernelSpec, quad: QuadratureSpec | None = None) -> SeminormResult:
    """The p-th power of the nonlocal energy seminorm."""
    quad = quad or QuadratureSpec()
    if domain.d != u.d or spec.d != u.d:
        raise ValueError("field, domain and kernel dimensions differ")
    if _is_strip_1d(domain):
        A, B = domain.axial_bounds()
        segs = _s_segments_split(spec, quad)
        fine, n1 = _pair_power_1d(u, A, B, spec.p, segs, quad)
        coarse, n2 = _pair_power_1d(u, A, B, spec.p, _s_segments_split(spec, quad.coarser()), quad.coarser())
        res = _combine(fine, coarse, n1 + n2)
    else:
        per_rep, n = _near_power(u, domain, spec, quad, spec.c_norm * spec.delta ** (-spec.excess))
        res = _qmc_result(per_rep, n)
    _check_convergence(u, spec, res)
    return res


def trace_power(u: FieldFunction, domain, spec: KernelSpec, quad: QuadratureSpec | None = None) -> SeminormResult:
    """The p-th power of the nonlocal trace seminorm on a collar."""
    quad = quad or QuadratureSpec()
    if domain.d != u.d or spec.d != u.d:
        raise ValueError("field, domain and kernel dimensions differ")
    if _is_strip_1d(domain):
        A, B = domain.axial_bounds()
        tail = None
        if math.isinf(B - A):
            tail = lp_power(u, domain, spec.p, quad).value
        fine, n1 = _pair_power_1d(u, A, B, spec.p, _t_segments(spec, quad), quad, tail)
        c = quad.coarser()
        coarse, n2 = _pair_power_1d(u, A, B, spec.p, _t_segments(spec, c), c, tail)
        res = _combine(fine, coarse, n1 + n2)
    else:
        near, n1 = _near_power(u, domain, spec, quad, spec.delta ** (spec.beta - spec.d - spec.p))
        far, n2 = _far_power(u, domain, spec, quad)
        res = _qmc_result(near + far, n1 + n2)
    _check_convergence(u, spec, res)
    return res


def _check_convergence(u: FieldFunction, spec: KernelSpec, res: SeminormResult):
    if u.smoothness == "C0" and spec.beta >= spec.d and res.value > 0 and res.err_est > 0.1 * res.value:
        raise QuadratureError(f"no convergence for a rough field with beta={spec.beta} >= d "
                              f"(relative error {res.err_est / res.value:.2g}); raise depth or samples")


def seminorm_S(u, domain, spec, quad=None) -> SeminormResult:
    return root_of_power(energy_power(u, domain, spec, quad), spec.p)


def seminorm_T(u, domain, spec, quad=None) -> SeminormResult:
    return root_of_power(trace_power(u, domain, spec, quad), spec.p)


def _sum(a: SeminormResult, b: SeminormResult, scale_a: float = 1.0) -> SeminormResult:
    return SeminormResult(scale_a * a.value + b.value, scale_a * a.err_est + b.err_est, a.n_evals + b.n_evals)


def norm_S(u, domain, spec, quad=None) -> SeminormResult:
    """(||u||_p^p + |u|_S^p)^(1/p)."""
    return root_of_power(_sum(lp_power(u, domain, spec.p, quad), energy_power(u, domain, spec, quad)), spec.p)


def norm_T(u, domain, spec, quad=None) -> SeminormResult:
    """((1/delta) ||u||_p^p + |u|_T^p)^(1/p)."""
    lp = lp_power(u, domain, spec.p, quad)
    return root_of_power(_sum(lp, trace_power(u, domain, spec, quad), 1.0 / spec.delta), spec.p)


def norm_S_power(u, domain, spec, quad=None) -> SeminormResult:
    return _sum(lp_power(u, domain, spec.p, quad), energy_power(u, domain, spec, quad))


def norm_T_power(u, domain, spec, quad=None) -> SeminormResult:
    return _sum(lp_power(u, domain, spec.p, quad), trace_power(u, domain, spec, quad), 1.0 / spec.delta)


def local_trace_power(u: FieldFunction, d: int, p: float, quad: QuadratureSpec | None = None) -> SeminormResult:
    """p-th power of the classical fractional seminorm of order 1-1/p on the boundary plane.

    ``u`` is a field on R^(d-1); only d = 2 (a line boundary) is supported.
    """
    quad = quad or QuadratureSpec()
    if d < 2:
        raise ValueError("the boundary of a one dimensional strip is a point set")
    if d != 2:
        raise NotImplementedError("boundary seminorms are implemented for d = 2")
    if u.d != d - 1:
        raise ValueError("the field must live on the boundary plane")
    if not u.compact:
        raise QuadratureError("the field must be compactly supported")
    a = d + p - 2.0
    line = StripDomain(-math.inf, math.inf, 1)
    norm = lp_power(u, line, p, quad).value

    def run(q):
        segs = [(0.0, q.split_radius, 1.0, a), (q.split_radius, math.inf, 1.0, a)]
        return _pair_power_1d(u, -math.inf, math.inf, p, segs, q, 2.0 * norm)

    fine, n1 = run(quad)
    coarse, n2 = run(quad.coarser())
    return _combine(fine, coarse, n1 + n2)


def seminorm_local_trace(u, d, p, quad=None) -> SeminormResult:
    return root_of_power(local_trace_power(u, d, p, quad), p)
