"""Strips, Lipschitz graph domains, their collars, and chart covers.

Points are arrays of shape (n, d) whose column 0 is the axial coordinate
(pointing into the domain) and columns 1.. are the cross coordinates.

Every region used by the integral engine exposes ``d``, ``pieces()`` and
``contains()``. A piece is a set ``{lower(xb) < x0 < upper(xb), xb in cross
box}`` optionally cut down by a membership mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import threading
from typing import Callable, Sequence

import numpy as np

from .fields import FieldFunction, as_points, compile_expression
from .whitney import smoothstep


@dataclass(frozen=True)
class Piece:
    lower: Callable[[np.ndarray], np.ndarray]
    upper: Callable[[np.ndarray], np.ndarray]
    cross_lo: np.ndarray | None = None
    cross_hi: np.ndarray | None = None
    mask: Callable[[np.ndarray], np.ndarray] | None = None


def _const(c: float):
    return lambda xb: np.full(np.shape(xb)[0], c)


class StripDomain:
    """The strip (a, strip_len) x R^(d-1); ``strip_len`` may be inf."""

    def __init__(self, a: float, strip_len: float, d: int):
        if not a < strip_len:
            raise ValueError("need a < strip_len")
        self.a, self.strip_len, self.d = float(a), float(strip_len), int(d)

    def __repr__(self):
        return f"StripDomain(a={self.a:g}, strip_len={self.strip_len:g}, d={self.d})"

    @property
    def bounded(self) -> bool:
        return self.d == 1 and math.isfinite(self.a) and math.isfinite(self.strip_len)

    def axial_bounds(self) -> tuple[float, float]:
        return self.a, self.strip_len

    def contains(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        return (pts[:, 0] > self.a) & (pts[:, 0] < self.strip_len)

    def pieces(self) -> list[Piece]:
        # split at the boundary plane so that a strip and the equivalent flat
        # graph region are sampled through identical parametrizations
        if self.a < 0 < self.strip_len:
            return [Piece(_const(self.a), _const(0.0)), Piece(_const(0.0), _const(self.strip_len))]
        return [Piece(_const(self.a), _const(self.strip_len))]

    def thickness(self, xb) -> np.ndarray:
        return np.full(np.shape(xb)[0], self.strip_len - self.a)


def half_space(d: int) -> StripDomain:
    return StripDomain(0.0, math.inf, d)


def strip_collar(delta: float, d: int) -> StripDomain:
    return StripDomain(-delta, 0.0, d)


def strip_hat(delta: float, d: int) -> StripDomain:
    return StripDomain(-delta, math.inf, d)


# ---------------------------------------------------------------------------
# Lipschitz graphs


def _as_profile(phi, d: int):
    if isinstance(phi, str):
        return compile_expression(phi, d - 1)
    if isinstance(phi, FieldFunction):
        return lambda xb: phi(xb)
    return phi


class GraphDomain:
    """Supergraph {x0 > phi(xb)} of a nonnegative Lipschitz profile.

    ``phi`` maps an (n, d-1) array of cross points to heights; an expression
    string over ``x0..`` (cross coordinates) is accepted too. The lower
    collar profile ``psi`` is computed on demand and cached on a grid of
    spacing delta/32.
    """

    COARSE = 16
    GRID = 32

    def __init__(self, phi, lip: float, delta: float, d: int = 2):
        if d < 2:
            raise ValueError("graph domains need d >= 2")
        if lip < 0 or delta <= 0:
            raise ValueError("need lip >= 0 and delta > 0")
        self.phi = _as_profile(phi, d)
        self.lip, self.delta, self.d = float(lip), float(delta), int(d)
        self.psi_cache: dict[tuple, float] = {}
        self._lock = threading.Lock()
        self._flat = False

    @classmethod
    def flat(cls, delta: float, d: int = 2) -> "GraphDomain":
        dom = cls(lambda xb: np.zeros(np.shape(xb)[0]), 0.0, delta, d)
        dom._flat = True
        return dom

    def __repr__(self):
        return f"GraphDomain(lip={self.lip:g}, delta={self.delta:g}, d={self.d})"

    def height(self, xb) -> np.ndarray:
        xb = np.asarray(xb, dtype=float).reshape(-1, self.d - 1)
        return np.asarray(self.phi(xb), dtype=float).reshape(-1)

    # -- distance to the graph -------------------------------------------------
    def _offsets(self):
        radius = (1.0 + self.lip) * self.delta
        n = int(math.ceil(radius / (self.delta / self.COARSE)))
        o = np.linspace(-radius, radius, 2 * n + 1)
        if self.d == 2:
            return o[:, None]
        g = np.stack(np.meshgrid(o, o, indexing="ij"), -1).reshape(-1, 2)
        return g[np.sum(g * g, axis=1) <= radius * radius * (1 + 1e-12)]

    def graph_distance(self, t, xb) -> np.ndarray:
        """Distance from the points (t, xb) to the graph, searched near xb."""
        t = np.asarray(t, dtype=float).reshape(-1)
        xb = np.asarray(xb, dtype=float).reshape(-1, self.d - 1)
        offs = self._offsets()
        n, m, k = xb.shape[0], offs.shape[0], self.d - 1

        def dist(o):  # o: (n, j, k)
            heights = self.height((xb[:, None, :] + o).reshape(-1, k)).reshape(o.shape[:2])
            return np.sqrt((t[:, None] - heights) ** 2 + np.sum(o * o, axis=2))

        coarse = dist(np.broadcast_to(offs, (n, m, k)))
        i = np.argmin(coarse, axis=1)
        best = coarse[np.arange(n), i]
        step = self.delta / self.COARSE
        if k == 1:
            a = offs[i, 0] - step
            b = offs[i, 0] + step
            g = (math.sqrt(5.0) - 1.0) / 2.0
            c, e = b - g * (b - a), a + g * (b - a)
            fc, fe = dist(c[:, None, None])[:, 0], dist(e[:, None, None])[:, 0]
            for _ in range(64):
                left = fc < fe
                b = np.where(left, e, b)
                a = np.where(left, a, c)
                c_new, e_new = b - g * (b - a), a + g * (b - a)
                c, e = c_new, e_new
                both = dist(np.stack([c, e], 1)[:, :, None])
                fc, fe = both[:, 0], both[:, 1]
            best = np.minimum(best, np.minimum(fc, fe))
        else:
            center = offs[i]
            stencil = np.stack(np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5), indexing="ij"), -1)
            stencil = stencil.reshape(-1, 2)
            h = step
            for _ in range(40):
                cand = center[:, None, :] + h * stencil[None, :, :]
                vals = dist(cand)
                j = np.argmin(vals, axis=1)
                center = cand[np.arange(n), j]
                best = np.minimum(best, vals[np.arange(n), j])
                h *= 0.5
        return best

    # -- the lower profile ---------------------------------------------------
    def psi_exact(self, xb) -> np.ndarray:
        """Lowest t >= -delta at graph distance delta below (t, xb)."""
        xb = np.asarray(xb, dtype=float).reshape(-1, self.d - 1)
        delta = self.delta
        if self._flat:
            return np.full(xb.shape[0], -delta)
        top = self.height(xb)
        if np.any(top < 0):
            raise ValueError("profile must be nonnegative")
        # the first crossing lies in [phi - delta sqrt(1+L^2), phi - delta]
        lo = np.maximum(-delta, top - delta * math.sqrt(1.0 + self.lip**2) * (1 + 1e-9))
        hi = top - delta
        scan = 33
        frac = np.linspace(0.0, 1.0, scan)
        ts = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        inside = np.empty_like(ts, dtype=bool)
        for j in range(scan):
            inside[:, j] = self.graph_distance(ts[:, j], xb) <= delta
        inside[:, -1] = True  # the graph point straight above is at distance exactly delta
        first = np.argmax(inside, axis=1)
        rows = np.arange(xb.shape[0])
        b = ts[rows, first]
        a = np.where(first > 0, ts[rows, np.maximum(first - 1, 0)], b)
        tol = 1e-10 * delta
        for _ in range(80):
            open_ = (b - a) > tol
            if not np.any(open_):
                break
            mid = 0.5 * (a + b)
            hit = self.graph_distance(mid, xb) <= delta
            b = np.where(open_ & hit, mid, b)
            a = np.where(open_ & ~hit, mid, a)
        if np.any(b - a > tol):
            raise RuntimeError("psi bisection did not converge")
        return b

    def psi(self, xb) -> np.ndarray:
        """Cached lower profile, linearly interpolated on the delta/32 grid."""
        xb = np.asarray(xb, dtype=float).reshape(-1, self.d - 1)
        if self._flat:
            return np.full(xb.shape[0], -self.delta)
        h = self.delta / self.GRID
        if self.d == 2:
            s = xb[:, 0] / h
            i0 = np.floor(s).astype(np.int64)
            w = s - i0
            v0, v1 = self._nodes(np.stack([i0, i0 + 1], 1).reshape(-1, 1)).reshape(-1, 2).T
            return (1 - w) * v0 + w * v1
        s = xb / h
        i0 = np.floor(s).astype(np.int64)
        w = s - i0
        corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
        idx = (i0[:, None, :] + corners[None]).reshape(-1, 2)
        v = self._nodes(idx).reshape(-1, 4)
        wx, wy = w[:, 0], w[:, 1]
        return ((1 - wx) * (1 - wy) * v[:, 0] + wx * (1 - wy) * v[:, 1]
                + (1 - wx) * wy * v[:, 2] + wx * wy * v[:, 3])

    def _nodes(self, idx: np.ndarray) -> np.ndarray:
        keys = [tuple(int(v) for v in row) for row in idx]
        missing = sorted({k for k in keys if k not in self.psi_cache})
        if missing:
            h = self.delta / self.GRID
            vals = self.psi_exact(np.array(missing, dtype=float) * h)
            with self._lock:
                self.psi_cache.update(zip(missing, vals.tolist()))
        return np.array([self.psi_cache[k] for k in keys])

    # -- regions ---------------------------------------------------------------
    def collar(self) -> "GraphRegion":
        return GraphRegion(self, "collar")

    def hat(self) -> "GraphRegion":
        return GraphRegion(self, "hat")

    def interior(self) -> "GraphRegion":
        return GraphRegion(self, "interior")

    def validate(self, xb, tol: float = 1e-8) -> dict:
        """Check the collar thickness and Lipschitz bounds at sample points."""
        xb = np.sort(np.asarray(xb, dtype=float).reshape(-1, self.d - 1), axis=0)
        psi = self.psi_exact(xb)
        gap = self.height(xb) - psi
        delta, lip = self.delta, self.lip
        thick_ok = bool(np.all(gap >= delta - tol) and np.all(gap <= delta * math.sqrt(lip**2 + 1) + tol))
        diff = np.linalg.norm(np.diff(xb, axis=0), axis=1)
        keep = diff > 0
        slope = np.abs(np.diff(psi))[keep] / diff[keep]
        lip_est = float(slope.max()) if slope.size else 0.0
        return {"thickness_ok": thick_ok, "gap_min": float(gap.min()), "gap_max": float(gap.max()),
                "psi_lipschitz": lip_est, "lipschitz_ok": lip_est <= lip + 1e-6}


class GraphRegion:
    """Collar {psi < x0 < phi}, hat {psi < x0} or interior {phi < x0} of a graph domain."""

    def __init__(self, domain: GraphDomain, which: str):
        if which not in ("collar", "hat", "interior"):
            raise ValueError(which)
        self.domain, self.which, self.d = domain, which, domain.d

    def __repr__(self):
        return f"GraphRegion({self.which}, {self.domain!r})"

    @property
    def bounded(self) -> bool:
        return False

    def pieces(self) -> list[Piece]:
        dom = self.domain
        top = lambda xb: dom.height(xb)
        bottom = lambda xb: dom.psi(xb)
        inf = _const(math.inf)
        if self.which == "collar":
            return [Piece(bottom, top)]
        if self.which == "hat":
            return [Piece(bottom, top), Piece(top, inf)]
        return [Piece(top, inf)]

    def contains(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        xb = pts[:, 1:]
        t = pts[:, 0]
        if self.which == "interior":
            return t > self.domain.height(xb)
        above = t > self.domain.psi(xb)
        if self.which == "hat":
            return above
        return above & (t < self.domain.height(xb))

    def thickness(self, xb) -> np.ndarray:
        return self.domain.height(xb) - self.domain.psi(xb)


class MaskedRegion:
    """A bounded region given by an indicator, sampled through disjoint boxes covering it."""

    def __init__(self, indicator: Callable[[np.ndarray], np.ndarray], boxes, d: int):
        self.indicator = indicator
        self.d = int(d)
        self.boxes = [tuple(np.asarray(b, dtype=float).reshape(self.d) for b in box) for box in boxes]

    def __repr__(self):
        return f"MaskedRegion({len(self.boxes)} boxes, d={self.d})"

    @property
    def bounded(self) -> bool:
        return True

    def pieces(self) -> list[Piece]:
        mask = lambda pts: self.indicator(pts).astype(float)
        return [Piece(_const(lo[0]), _const(hi[0]), lo[1:], hi[1:], mask) for lo, hi in self.boxes]

    def contains(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        inside = np.zeros(pts.shape[0], dtype=bool)
        for lo, hi in self.boxes:
            inside |= np.all((pts > lo) & (pts < hi), axis=1)
        return inside & self.indicator(pts).astype(bool)


def psi_from_phi(domain: GraphDomain, xbar) -> float | np.ndarray:
    """Lower collar profile at cross point(s) ``xbar`` (uncached)."""
    xb = np.asarray(xbar, dtype=float)
    scalar = xb.ndim == 0 or (xb.ndim == 1 and domain.d > 2)
    out = domain.psi_exact(xb.reshape(-1, domain.d - 1))
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# transforms


def _check_collar(pts: np.ndarray, delta: float):
    if np.any(pts[:, 0] < -delta) or np.any(pts[:, 0] > 0):
        raise ValueError("collar transform evaluated outside (-delta, 0) x R^(d-1)")


def shear_points(domain: GraphDomain, pts: np.ndarray) -> np.ndarray:
    out = pts.copy()
    out[:, 0] = pts[:, 0] + domain.height(pts[:, 1:])
    return out


def collar_points(domain: GraphDomain, pts: np.ndarray) -> np.ndarray:
    """Map (x0, xb) in the flat collar to the curved collar."""
    phi, psi = domain.height(pts[:, 1:]), domain.psi(pts[:, 1:])
    r = pts[:, 0] / domain.delta
    out = pts.copy()
    out[:, 0] = (1.0 + r) * phi - r * psi
    return out


def collar_points_inverse(domain: GraphDomain, pts: np.ndarray) -> np.ndarray:
    phi, psi = domain.height(pts[:, 1:]), domain.psi(pts[:, 1:])
    out = pts.copy()
    out[:, 0] = domain.delta * (pts[:, 0] - phi) / (phi - psi)
    return out


def _support_of_flattened(domain: GraphDomain, u: FieldFunction):
    lo, hi = u.support_lo.copy(), u.support_hi.copy()
    lo[0], hi[0] = -math.inf, math.inf
    return lo, hi


def transform_P(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    """x -> u(x0 + phi(xb), xb)."""
    return FieldFunction(lambda p: u(shear_points(domain, p)), domain.d, smoothness=u.smoothness,
                         support_box=_support_of_flattened(domain, u), name=f"P[{u.name}]")


def transform_P_inverse(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    def ev(p):
        q = p.copy()
        q[:, 0] = p[:, 0] - domain.height(p[:, 1:])
        return u(q)

    return FieldFunction(ev, domain.d, smoothness=u.smoothness, support_box=_support_of_flattened(domain, u),
                         name=f"Pinv[{u.name}]")


def transform_G(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    """Pull a collar field back to the flat collar (-delta, 0) x R^(d-1)."""

    def ev(p):
        _check_collar(p, domain.delta)
        return u(collar_points(domain, p))

    lo, hi = u.support_lo.copy(), u.support_hi.copy()
    lo[0], hi[0] = -domain.delta, 0.0
    return FieldFunction(ev, domain.d, smoothness=u.smoothness, support_box=(lo, hi), name=f"G[{u.name}]")


def transform_G_inv(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    """Push a flat-collar field forward to the curved collar."""

    def ev(p):
        return u(collar_points_inverse(domain, p))

    return FieldFunction(ev, domain.d, smoothness=u.smoothness, support_box=_support_of_flattened(domain, u),
                         name=f"Ginv[{u.name}]")


def transform_S(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    """Shear above the boundary plane, collar flattening below it."""

    def ev(p):
        out = np.empty(p.shape[0])
        up = p[:, 0] >= 0
        if np.any(up):
            out[up] = u(shear_points(domain, p[up]))
        if np.any(~up):
            out[~up] = u(collar_points(domain, p[~up]))
        return out

    return FieldFunction(ev, domain.d, smoothness=u.smoothness, support_box=_support_of_flattened(domain, u),
                         name=f"S[{u.name}]")


def transform_S_inverse(domain: GraphDomain, u: FieldFunction) -> FieldFunction:
    def ev(p):
        out = np.empty(p.shape[0])
        phi = domain.height(p[:, 1:])
        up = p[:, 0] >= phi
        if np.any(up):
            q = p[up].copy()
            q[:, 0] -= phi[up]
            out[up] = u(q)
        if np.any(~up):
            out[~up] = u(collar_points_inverse(domain, p[~up]))
        return out

    return FieldFunction(ev, domain.d, smoothness=u.smoothness, support_box=_support_of_flattened(domain, u),
                         name=f"Sinv[{u.name}]")


# ---------------------------------------------------------------------------
# distortion constants


@dataclass(frozen=True)
class DistortionConstants:
    k_fwd: float
    k_bwd: float
    m_fwd: float
    m_bwd: float


def distortion_constants(lip: float) -> DistortionConstants:
    """Bi-Lipschitz and kernel comparison constants of the collar map.

    The forward bound follows the chain (L+1)|dxb| + sqrt(L^2+1)|dx0| +
    2 sqrt(L^2+1)|dxb|; the backward chain gives |x-y| <= (3L+2)|x'-y'|.
    """
    if lip < 0:
        raise ValueError("lip must be nonnegative")
    root = math.sqrt(lip * lip + 1.0)
    k_fwd = lip + 1.0 + 3.0 * root
    k_bwd = 1.0 / (3.0 * lip + 2.0)
    return DistortionConstants(k_fwd, k_bwd, max(lip + 1.0 + root, k_fwd), max(lip + 2.0, k_bwd))


def sample_distortion(domain: GraphDomain, n: int, rng: np.random.Generator, spread: float = 2.0) -> np.ndarray:
    """Ratios |x'-y'|/|x-y| of the collar map at random pairs of the flat collar."""
    d, delta = domain.d, domain.delta
    x = np.column_stack([rng.uniform(-delta, 0, n)] + [rng.uniform(-spread, spread, n) for _ in range(d - 1)])
    scale = np.exp(rng.uniform(math.log(1e-3), math.log(spread), n))
    direction = rng.normal(size=(n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    y = x + scale[:, None] * direction
    y[:, 0] = np.clip(y[:, 0], -delta * (1 - 1e-12), -delta * 1e-12)
    keep = np.linalg.norm(y - x, axis=1) > 0
    x, y = x[keep], y[keep]
    xp, yp = collar_points(domain, x), collar_points(domain, y)
    return np.linalg.norm(xp - yp, axis=1) / np.linalg.norm(x - y, axis=1)


# ---------------------------------------------------------------------------
# chart covers of bounded domains


def rotation_2d(normal) -> np.ndarray:
    """Frame whose first row is the (inward) normal; rows map global to local."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return np.array([[n[0], n[1]], [-n[1], n[0]]])


@dataclass
class Chart:
    center: np.ndarray
    radius: float
    rotation: np.ndarray
    profile: Callable[[np.ndarray], np.ndarray]
    lip: float

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.center) @ self.rotation.T

    def to_global(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation + self.center


@dataclass
class ChartCover:
    """Local graph charts of a bounded domain.

    ``sdf`` is a signed distance (negative inside) used for membership
    tests and validation; ``box`` bounds the domain plus its collar.
    """

    charts: Sequence[Chart]
    epsilon: float
    delta0: float
    sdf: Callable[[np.ndarray], np.ndarray]
    box: tuple = field(default_factory=lambda: (np.array([-2.0, -2.0]), np.array([2.0, 2.0])))
    extent: tuple | None = None
    collar_boxes: Callable[[float], list] | None = None

    @property
    def d(self) -> int:
        return int(np.asarray(self.charts[0].center).size)

    def weight(self, i: int, pts: np.ndarray) -> np.ndarray:
        """Radial cutoff: 1 on B(x_i, r_i - 2 eps), 0 outside B(x_i, r_i - eps)."""
        ch = self.charts[i]
        rho = np.linalg.norm(pts - ch.center, axis=1)
        return 1.0 - smoothstep((rho - (ch.radius - 2 * self.epsilon)) / self.epsilon)

    def graph_domain(self, i: int, delta: float) -> GraphDomain:
        ch = self.charts[i]
        return GraphDomain(ch.profile, ch.lip, delta, self.d)

    def in_collar(self, pts: np.ndarray, delta: float) -> np.ndarray:
        s = self.sdf(pts)
        return (s > 0) & (s < delta)

    def in_domain(self, pts: np.ndarray) -> np.ndarray:
        return self.sdf(pts) <= 0

    def _padded_extent(self, delta: float):
        lo, hi = self.extent if self.extent is not None else self.box
        return np.asarray(lo, dtype=float) - delta, np.asarray(hi, dtype=float) + delta

    def collar_region(self, delta: float) -> MaskedRegion:
        """{0 < sdf < delta}."""
        boxes = self.collar_boxes(delta) if self.collar_boxes else [self._padded_extent(delta)]
        return MaskedRegion(lambda p: self.in_collar(p, delta), boxes, self.d)

    def hat_region(self, delta: float) -> MaskedRegion:
        """The domain together with its collar, {sdf < delta}."""
        return MaskedRegion(lambda p: self.sdf(p) < delta, [self._padded_extent(delta)], self.d)

    def validate(self, delta: float, n: int = 4000, seed: int = 0) -> dict:
        """Sampled check of the cover conditions and of each chart's graph."""
        if not delta < self.epsilon:
            raise ValueError("need delta < epsilon")
        rng = np.random.default_rng(seed)
        lo, hi = self.box
        pts = rng.uniform(lo, hi, size=(n * 20, self.d))
        collar = pts[self.in_collar(pts, self.delta0)][:n]
        covered = np.zeros(collar.shape[0], dtype=bool)
        for ch in self.charts:
            covered |= np.linalg.norm(collar - ch.center, axis=1) < ch.radius - 2 * self.epsilon
        report = {"collar_samples": int(collar.shape[0]), "collar_covered": bool(covered.all())}
        graph_ok = True
        for i, ch in enumerate(self.charts):
            near = pts[np.linalg.norm(pts - ch.center, axis=1) < ch.radius - self.epsilon][:n]
            local = ch.to_local(near)
            above = local[:, 0] > ch.profile(local[:, 1:])
            graph_ok &= bool(np.all(above == self.in_domain(near)))
            heights = ch.profile(np.linspace(-ch.radius, ch.radius, 201)[:, None])
            graph_ok &= bool(np.all(heights >= -1e-12))
        report["charts_consistent"] = graph_ok
        report["ok"] = report["collar_covered"] and graph_ok
        return report


def rounded_square_cover(half: float = 1.0, corner: float = 0.5, radius: float = 1.3,
                         epsilon: float = 0.15, delta0: float = 0.2) -> ChartCover:
    """Four corner charts of the square [-half, half]^2 with rounded corners."""
    rho = corner
    inner = half - rho

    def sdf(pts):
        q = np.abs(pts) - inner
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        return outside + np.minimum(np.max(q, axis=1), 0.0) - rho

    knee = rho / math.sqrt(2.0)

    def profile(xb):
        s = np.abs(np.asarray(xb, dtype=float).reshape(-1))
        arc = rho - np.sqrt(np.maximum(rho * rho - np.minimum(s, knee) ** 2, 0.0))
        return np.where(s <= knee, arc, s + rho * (1.0 - math.sqrt(2.0)))

    charts = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        c = np.array([sx * inner, sy * inner])
        out = np.array([sx, sy]) / math.sqrt(2.0)
        charts.append(Chart(c + rho * out, radius, rotation_2d(-out), profile, 1.0))
    def collar_boxes(delta):
        # four side slabs and four corner squares, pairwise disjoint
        out = half + delta
        boxes = []
        for s in (1.0, -1.0):
            lo_x, hi_x = sorted((s * half, s * out))
            boxes.append(((lo_x, -inner), (hi_x, inner)))
            boxes.append(((-inner, lo_x), (inner, hi_x)))
            for t in (1.0, -1.0):
                lo_y, hi_y = sorted((t * inner, t * out))
                lo_c, hi_c = sorted((s * inner, s * out))
                boxes.append(((lo_c, lo_y), (hi_c, hi_y)))
        return boxes

    pad = half + radius
    return ChartCover(charts, epsilon, delta0, sdf, (np.array([-pad, -pad]), np.array([pad, pad])),
                      (np.array([-half, -half]), np.array([half, half])), collar_boxes)
