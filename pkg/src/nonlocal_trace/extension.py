"""Whitney-average extension operators.

``extend_EL`` extends a field from the unit collar (-1, 0) x R^(d-1) to the
half-space by averaging it over collar boxes assigned to the cubes of a
Whitney cover. The other operators are built from it by rescaling
(``extend_E``), flattening a graph collar (``extend_lipschitz``) and gluing
chart-wise extensions (``extend_general``). Every operator returns the input
field unchanged, through the very same evaluation call, on its collar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import threading

import numpy as np

from .fields import FieldFunction, as_points
from .geometry import ChartCover, GraphDomain, collar_points_inverse
from .kernels import KernelSpec
from .quadrature import QuadratureSpec, gauss_legendre
from .whitney import WhitneyCover, map_M1, map_M2, next_power_of_two


def branch_for(beta: float, d: int) -> str:
    """"low" (Type I cover) for beta < d, "high" (Type II) for beta > d."""
    if beta == d:
        raise ValueError("extension operators are not defined for beta = d")
    return "low" if beta < d else "high"


@dataclass(frozen=True)
class ExtensionConfig:
    branch: str
    strip_len: float = 1.0
    cap: float = 1.0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.branch not in ("low", "high"):
            raise ValueError("branch must be 'low' or 'high'")
        if self.cap <= 0:
            raise ValueError("cap must be positive")
        object.__setattr__(self, "strip_len", next_power_of_two(float(self.strip_len)))

    @classmethod
    def for_kernel(cls, spec: KernelSpec, strip_len: float = 1.0, cap: float = 1.0,
                   quad: QuadratureSpec | None = None) -> "ExtensionConfig":
        return cls(branch_for(spec.beta, spec.d), strip_len, cap, quad or QuadratureSpec())

    def check(self, spec: KernelSpec):
        if branch_for(spec.beta, spec.d) != self.branch:
            raise ValueError(f"branch {self.branch!r} does not match beta={spec.beta}, d={spec.d}")


# ---------------------------------------------------------------------------
# cube averages


def _box_rule(u: FieldFunction, lo: np.ndarray, hi: np.ndarray, order: int):
    """Nodes and weights of a tensor rule on the box clipped to the support of u."""
    a = np.maximum(lo, u.support_lo)
    b = np.minimum(hi, u.support_hi)
    d = lo.size
    if np.any(a >= b):
        return np.empty((0, d)), np.empty(0)
    t, w = gauss_legendre(order)
    axes, wts = [], []
    for i in range(d):
        cuts = [a[i], b[i]]
        if i == 0:
            cuts += [c for c in u.breakpoints + u.hints if a[i] < c < b[i]]
        else:
            n = int(math.ceil((b[i] - a[i]) - 1e-12))
            cuts += list(np.linspace(a[i], b[i], max(n, 1) + 1)[1:-1])
        cuts = np.unique(cuts)
        h = np.diff(cuts)
        axes.append((cuts[:-1, None] + h[:, None] * t[None, :]).ravel())
        wts.append((h[:, None] * w[None, :]).ravel())
    grids = np.meshgrid(*axes, indexing="ij")
    weights = wts[0]
    for extra in wts[1:]:
        weights = np.multiply.outer(weights, extra)
    return np.stack([g.ravel() for g in grids], axis=1), weights.ravel()


def cube_averages(u: FieldFunction, boxes, quad: QuadratureSpec) -> np.ndarray:
    """Mean values of ``u`` over several axis boxes in one batched evaluation."""
    nodes, weights, owner = [], [], []
    for i, (lo, hi) in enumerate(boxes):
        x, w = _box_rule(u, np.asarray(lo, float), np.asarray(hi, float), quad.order)
        nodes.append(x)
        weights.append(w)
        owner.append(np.full(w.size, i))
    out = np.zeros(len(boxes))
    if not boxes:
        return out
    x = np.concatenate(nodes)
    if x.shape[0]:
        vals = u(x) * np.concatenate(weights)
        np.add.at(out, np.concatenate(owner), vals)
    vol = np.array([np.prod(np.asarray(hi, float) - np.asarray(lo, float)) for lo, hi in boxes])
    return out / vol


def cube_average(u: FieldFunction, box, quad: QuadratureSpec | None = None) -> float:
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if lo[0] < -1 - 1e-15 or hi[0] > 1e-15:
        raise ValueError("box must lie in (-1, 0) x R^(d-1)")
    return float(cube_averages(u, [(lo, hi)], quad or QuadratureSpec())[0])


# ---------------------------------------------------------------------------
# the extension on the unit collar


class _WhitneySum:
    """Evaluates sum_W a_W phi_W with memoized averages a_W."""

    def __init__(self, u: FieldFunction, cover: WhitneyCover, quad: QuadratureSpec):
        self.u, self.cover, self.quad = u, cover, quad
        self.box_map = map_M1 if cover.kind == "I" else map_M2
        self.memo: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def averages(self, keys: np.ndarray) -> np.ndarray:
        rows = [tuple(int(v) for v in r) for r in keys]
        missing = sorted({r for r in rows if r not in self.memo})
        if missing:
            boxes = [self.box_map(self.cover.cube(r[0], r[1:])) for r in missing]
            vals = cube_averages(self.u, boxes, self.quad)
            with self._lock:
                self.memo.update(zip(missing, vals.tolist()))
        return np.array([self.memo[r] for r in rows])

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        codes, cells, w = self.cover.partition_terms(pts)
        out = np.zeros(pts.shape[0])
        live = w > 0
        if not np.any(live):
            return out
        keys = np.concatenate([codes[live][:, None], cells[live]], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        a = self.averages(uniq)[inv.reshape(-1)]
        rows = np.nonzero(live)[0]
        np.add.at(out, rows, w[live] * a)
        return out


def _axial_hints(cover: WhitneyCover, depth: int = 24) -> list[float]:
    codes = range(int(cover.top_code), int(min(cover.bottom_code, depth)) + 1)
    pts = set()
    for c in codes:
        lo, hi = (float(v) for v in cover._slab(c))
        w_lo, w_hi = float(cover._half_width(c)), float(cover._half_width(c - 1))
        pts.update([lo, hi, lo + w_lo, hi - w_hi])
        if lo > 0:
            pts.add(lo - w_lo)
    if not math.isinf(cover.strip_len):
        pts.add(cover.strip_len * 9.0 / 8.0)
    return sorted(p for p in pts if p > 0)


def extend_EL(u: FieldFunction, cfg: ExtensionConfig) -> FieldFunction:
    """Extension from the unit collar to R_{-1}^inf with strip length cfg.strip_len."""
    cover = WhitneyCover("I" if cfg.branch == "low" else "II", cfg.strip_len, u.d)
    summed = _WhitneySum(u, cover, cfg.quad)

    def ev(p):
        out = np.empty(p.shape[0])
        below = p[:, 0] <= 0
        if np.any(below):
            out[below] = u(p[below])
        if np.any(~below):
            out[~below] = summed(p[~below])
        return out

    L = cfg.strip_len
    lo, hi = u.support_lo.copy(), u.support_hi.copy()
    lo[0], hi[0] = max(lo[0], -1.0), L * 9.0 / 8.0
    lo[1:] -= L
    hi[1:] += L
    if cfg.branch == "low":
        smooth = "C0"
    else:
        smooth = "C1" if u.smoothness != "C0" else "C0"
    field_ = FieldFunction(ev, u.d, smoothness=smooth, support_box=(lo, hi),
                           breakpoints=sorted(set(u.breakpoints) | {0.0}),
                           hints=sorted(set(u.hints) | set(_axial_hints(cover))), name=f"E[{u.name}]")
    field_.cover = cover
    field_.averages = summed.memo
    return field_


def extend_E(u: FieldFunction, spec: KernelSpec, cfg: ExtensionConfig) -> FieldFunction:
    """Extension from the collar (-delta, 0) x R^(d-1) at horizon delta."""
    cfg.check(spec)
    delta = spec.delta
    if not delta < cfg.cap:
        raise ValueError(f"delta={delta} must be below the cap {cfg.cap}")
    L = next_power_of_two(cfg.cap / delta)
    inner = extend_EL(u.scaled(delta), ExtensionConfig(cfg.branch, L, cfg.cap, cfg.quad))

    def ev(p):
        out = np.empty(p.shape[0])
        below = p[:, 0] <= 0
        if np.any(below):
            out[below] = u(p[below])
        if np.any(~below):
            out[~below] = inner(p[~below] / delta)
        return out

    field_ = FieldFunction(ev, u.d, smoothness=inner.smoothness,
                           support_box=(inner.support_lo * delta, inner.support_hi * delta),
                           breakpoints=[b * delta for b in inner.breakpoints],
                           hints=[b * delta for b in inner.hints], name=f"E[{u.name}]")
    field_.strip_len = L
    field_.inner = inner
    return field_


def extend_lipschitz(u: FieldFunction, domain: GraphDomain, spec: KernelSpec, cfg: ExtensionConfig) -> FieldFunction:
    """Extension from the collar of a graph domain to the domain and collar."""
    if spec.delta != domain.delta:
        raise ValueError("kernel horizon and collar thickness differ")
    from .geometry import transform_G

    flat = extend_E(transform_G(domain, u), spec, cfg)

    def ev(p):
        out = np.zeros(p.shape[0])
        phi = domain.height(p[:, 1:])
        psi = domain.psi(p[:, 1:])
        collar = (p[:, 0] > psi) & (p[:, 0] < phi)
        if np.any(collar):
            out[collar] = u(p[collar])
        up = p[:, 0] >= phi
        if np.any(up):
            q = p[up].copy()
            q[:, 0] -= phi[up]
            out[up] = flat(q)
        return out

    lo, hi = flat.support_lo.copy(), flat.support_hi.copy()
    if domain.d == 2 and np.isfinite(lo[1]) and np.isfinite(hi[1]):
        xs = np.linspace(lo[1], hi[1], 257)[:, None]
        top = float(np.max(domain.height(xs))) + domain.lip * (hi[1] - lo[1]) / 256
        lo[0], hi[0] = -domain.delta, hi[0] + top
    else:
        lo[0], hi[0] = -math.inf, math.inf
    field_ = FieldFunction(ev, u.d, smoothness="C0" if flat.smoothness == "C0" else "C1",
                           support_box=(lo, hi), name=f"Elip[{u.name}]")
    field_.flat = flat
    return field_


def extend_general(u: FieldFunction, cover: ChartCover, spec: KernelSpec, cfg: ExtensionConfig) -> FieldFunction:
    """Chart-wise extension recombined with the weights lambda_i / sum lambda_j^2."""
    delta = spec.delta
    if not delta < cover.epsilon:
        raise ValueError("need delta < epsilon")
    if not delta <= cover.delta0:
        raise ValueError("delta exceeds the reach of the cover")
    pieces = []
    for i, ch in enumerate(cover.charts):
        def local_field(q, i=i, ch=ch):
            g = ch.to_global(q)
            return cover.weight(i, g) * u(g)

        r = ch.radius
        lu = FieldFunction(local_field, u.d, support_radius=r, smoothness=u.smoothness, name=f"chart{i}")
        dom = cover.graph_domain(i, delta)
        pieces.append((ch, dom, extend_lipschitz(lu, dom, spec, cfg)))

    def ev(p):
        out = np.zeros(p.shape[0])
        collar = cover.in_collar(p, delta)
        if np.any(collar):
            out[collar] = u(p[collar])
        rest = ~collar
        if not np.any(rest):
            return out
        q = p[rest]
        lam = np.stack([cover.weight(i, q) for i in range(len(cover.charts))], 1)
        norm = np.maximum(np.sum(lam**2, axis=1), 1.0)
        acc = np.zeros(q.shape[0])
        for i, (ch, dom, ext) in enumerate(pieces):
            on = lam[:, i] > 0
            if not np.any(on):
                continue
            loc = ch.to_local(q[on])
            inside = loc[:, 0] > dom.psi(loc[:, 1:])
            vals = np.zeros(loc.shape[0])
            if np.any(inside):
                vals[inside] = ext(loc[inside])
            acc[on] += lam[on, i] / norm[on] * vals
        out[rest] = acc
        return out

    lo, hi = cover.box
    return FieldFunction(ev, u.d, smoothness="C0", support_box=(lo, hi), name=f"Egen[{u.name}]")


def lambda_tilde(cover: ChartCover, pts) -> np.ndarray:
    """The recombination weights lambda_i / max(sum_j lambda_j^2, 1), shape (n, N)."""
    pts = as_points(pts, cover.d)
    lam = np.stack([cover.weight(i, pts) for i in range(len(cover.charts))], 1)
    return lam / np.maximum(np.sum(lam**2, axis=1), 1.0)[:, None]
