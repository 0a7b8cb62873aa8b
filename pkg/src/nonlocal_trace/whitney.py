"""Dyadic Whitney covers of the slab (0, L] x R^(d-1) and their bumps.

A regular cube of level ``k`` is ``(2^-k, 2^-k+1] x 2^-k((0,1]^(d-1) + j)``.
The Type I cover stops at level 0 and adds unit base cubes on (0, 1]; the
Type II cover keeps refining towards the boundary.

Inside this module the base layer of a Type I cover is addressed with the
level code ``1``; Type I regular levels never exceed 0, so the codes of a
Type I cover are the contiguous range ``-m+1 .. 1`` and adjacent slabs always
differ by one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
import math

import numpy as np

BASE_CODE = 1


def _log2_exact(x: float) -> int:
    m, e = math.frexp(x)
    if m != 0.5:
        raise ValueError(f"{x} is not a power of two")
    return e - 1


def next_power_of_two(x: float) -> float:
    """Smallest power of two that is >= x (and >= 1)."""
    if x <= 1:
        return 1.0
    if math.isinf(x):
        return math.inf
    m, e = math.frexp(x)
    return float(2 ** (e - 1)) if m == 0.5 else float(2**e)


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, exactly 1/2 at t = 1/2."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True, order=True)
class WhitneyCube:
    level: int
    cross_index: tuple
    kind: str = "regular"

    def __post_init__(self):
        if self.kind not in ("regular", "base"):
            raise ValueError("kind must be 'regular' or 'base'")

    @property
    def side(self) -> float:
        return 1.0 if self.kind == "base" else 2.0 ** (-self.level)

    @property
    def axial(self) -> tuple[float, float]:
        if self.kind == "base":
            return 0.0, 1.0
        return 2.0 ** (-self.level), 2.0 ** (-self.level + 1)

    @property
    def cross(self) -> list[tuple[float, float]]:
        h = self.side
        return [(j * h, (j + 1) * h) for j in self.cross_index]

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners (the box is open below, closed above)."""
        a, b = self.axial
        lo = [a] + [c[0] for c in self.cross]
        hi = [b] + [c[1] for c in self.cross]
        return np.array(lo), np.array(hi)

    @property
    def code(self) -> int:
        return BASE_CODE if self.kind == "base" else self.level


@dataclass(frozen=True)
class WhitneyCover:
    """Type "I" or "II" cover of (0, strip_len] x R^(d-1); strip_len = 2^m or inf."""

    kind: str
    strip_len: float
    d: int

    def __post_init__(self):
        if self.kind not in ("I", "II"):
            raise ValueError("kind must be 'I' or 'II'")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if math.isinf(self.strip_len):
            return
        m = _log2_exact(float(self.strip_len))
        if m < 0:
            raise ValueError("strip_len must be at least 1")

    @property
    def m(self) -> float:
        return math.inf if math.isinf(self.strip_len) else _log2_exact(float(self.strip_len))

    @property
    def top_code(self) -> float:
        return -self.m + 1

    @property
    def bottom_code(self) -> float:
        return BASE_CODE if self.kind == "I" else math.inf

    def has_code(self, c: int) -> bool:
        return self.top_code <= c <= self.bottom_code

    def cube(self, code: int, cross_index) -> WhitneyCube:
        if self.kind == "I" and code == BASE_CODE:
            return WhitneyCube(0, tuple(int(j) for j in cross_index), "base")
        return WhitneyCube(int(code), tuple(int(j) for j in cross_index), "regular")

    def _spacing(self, code):
        """Cross grid spacing of a level code (array friendly)."""
        code = np.asarray(code)
        h = np.power(2.0, -code.astype(float))
        if self.kind == "I":
            h = np.where(code == BASE_CODE, 1.0, h)
        return h

    def _slab(self, code):
        code = np.asarray(code).astype(float)
        lo, hi = np.power(2.0, -code), np.power(2.0, -code + 1)
        if self.kind == "I":
            base = code == BASE_CODE
            lo, hi = np.where(base, 0.0, lo), np.where(base, 1.0, hi)
        return lo, hi

    def _half_width(self, boundary_code):
        """Half-width of the axial transition at the lower face of a slab.

        It is a quarter of the finer of the two slabs meeting there.
        """
        boundary_code = np.asarray(boundary_code).astype(float)
        below = boundary_code + 1
        w = np.power(2.0, -below) / 4.0
        if self.kind == "I":
            w = np.where(boundary_code == 0, 0.25, w)
        return w

    def axial_weight(self, code, t):
        """Axial factor of the bump of every cube with level ``code``."""
        code = np.asarray(code)
        t = np.asarray(t, dtype=float)
        lo, hi = self._slab(code)
        w_lo = self._half_width(code)
        rise = smoothstep((t - lo + w_lo) / (2 * w_lo))
        if self.kind == "I":
            rise = np.where(code == BASE_CODE, 1.0, rise)
        w_hi = self._half_width(code - 1)
        fall = 1.0 - smoothstep((t - hi + w_hi) / (2 * w_hi))
        if not math.isinf(self.strip_len):
            L = float(self.strip_len)
            cutoff = 1.0 - smoothstep((t - L) / (L / 8.0))
            fall = np.where(code == self.top_code, cutoff, fall)
        return np.where(t > 0, rise * fall, 0.0)

    @staticmethod
    def cross_weight(h, j, s):
        """Cross factor of cell (j h, (j+1) h] along one axis."""
        w = h / 8.0
        a = j * h
        rise = smoothstep((s - a + w) / (2 * w))
        fall = 1.0 - smoothstep((s - a - h + w) / (2 * w))
        return rise * fall

    def level_code_of(self, t):
        """Level code of the slab containing axial coordinate ``t`` (clipped to the top slab)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0):
            raise ValueError("axial coordinate must be positive")
        mant, e = np.frexp(t)
        out = 1 - np.where(mant > 0.5, e, e - 1).astype(np.int64)
        if not math.isinf(self.strip_len):
            out = np.maximum(out, int(self.top_code))
        if self.kind == "I":
            out = np.where(t <= 1.0, BASE_CODE, out)
        return out

    def partition_terms(self, pts):
        """Nonzero candidates of the partition of unity at each point.

        Returns ``(codes, cells, weights)`` of shapes (n, K), (n, K, d-1) and
        (n, K); the entries with zero weight are padding.
        """
        pts = np.asarray(pts, dtype=float)
        n = pts.shape[0]
        t = pts[:, 0]
        live = t > 0
        if not math.isinf(self.strip_len):
            live &= t < self.strip_len * 9.0 / 8.0
        k0 = np.zeros(n, dtype=np.int64)
        if np.any(live):
            k0[live] = self.level_code_of(t[live])
        offsets = list(product((-1, 0, 1), repeat=self.d - 1))
        codes, cells, weights = [], [], []
        for dk in (-1, 0, 1):
            code = k0 + dk
            valid = live & (code >= self.top_code) & (code <= self.bottom_code)
            safe_code = np.where(valid, code, k0)
            eta = np.where(valid, self.axial_weight(safe_code, t), 0.0)
            h = self._spacing(safe_code)
            j0 = np.ceil(pts[:, 1:] / h[:, None]).astype(np.int64) - 1 if self.d > 1 else np.zeros((n, 0), np.int64)
            for off in offsets:
                j = j0 + np.array(off, dtype=np.int64)
                wgt = eta.copy()
                for axis in range(self.d - 1):
                    wgt *= self.cross_weight(h, j[:, axis], pts[:, 1 + axis])
                codes.append(safe_code)
                cells.append(j)
                weights.append(wgt)
        return np.stack(codes, 1), np.stack(cells, 1), np.stack(weights, 1)


def cube_containing(cover: WhitneyCover, x) -> WhitneyCube:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != cover.d:
        raise ValueError("point dimension does not match the cover")
    t = float(x[0])
    if not 0 < t <= cover.strip_len:
        raise ValueError(f"axial coordinate {t} outside (0, {cover.strip_len}]")
    code = int(cover.level_code_of(t)[0])
    h = float(cover._spacing(code))
    cells = [int(math.ceil(s / h)) - 1 for s in x[1:]]
    return cover.cube(code, cells)


def cubes_in_window(cover: WhitneyCover, lo, hi) -> list[WhitneyCube]:
    """Cubes whose boxes meet the open window (lo, hi) in a set of positive measure."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.size != cover.d or hi.size != cover.d:
        raise ValueError("window dimension does not match the cover")
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(lo >= hi):
        raise ValueError("window must be bounded and nonempty")
    a, b = max(lo[0], 0.0), min(hi[0], cover.strip_len)
    if a >= b:
        raise ValueError("window misses the cover")
    if cover.kind == "II" and a <= 0:
        raise ValueError("window reaches the boundary where a Type II cover has infinitely many levels")
    if cover.kind == "I" and a < 1.0:
        first = BASE_CODE
    else:
        first = int(cover.level_code_of(a)[0])
    found = []
    code = int(cover.level_code_of(b)[0])
    while code <= first:
        s_lo, s_hi = (float(v) for v in cover._slab(code))
        if s_lo < b and s_hi > a:
            h = float(cover._spacing(code))
            ranges = []
            for axis in range(1, cover.d):
                j_min = math.floor(lo[axis] / h - 1) + 1
                j_max = math.ceil(hi[axis] / h) - 1
                ranges.append(range(j_min, j_max + 1))
            for cells in product(*ranges):
                found.append(cover.cube(code, cells))
        code += 1
    return found


def map_M1(cube: WhitneyCube) -> tuple[np.ndarray, np.ndarray]:
    """Unit collar box (-1, 0) x Q below the cube."""
    lo, hi = cube.box()
    lo[0], hi[0] = -1.0, 0.0
    return lo, hi


def map_M2(cube: WhitneyCube) -> tuple[np.ndarray, np.ndarray]:
    """Reflected box (-b, -a) x Q when b <= 1, else the unit collar box."""
    lo, hi = cube.box()
    a, b = lo[0], hi[0]
    if b <= 1.0:
        lo[0], hi[0] = -b, -a
    else:
        lo[0], hi[0] = -1.0, 0.0
    return lo, hi


def bump_eval(cover: WhitneyCover, cube: WhitneyCube, x):
    """Value of the partition bump of ``cube`` at point(s) ``x``."""
    pts = np.asarray(x, dtype=float).reshape(-1, cover.d)
    out = cover.axial_weight(np.full(pts.shape[0], cube.code), pts[:, 0])
    h = cube.side
    for axis, j in enumerate(cube.cross_index):
        out = out * cover.cross_weight(h, j, pts[:, 1 + axis])
    return out if np.ndim(x) > 1 else out[0]


def neighbors(cover: WhitneyCover, cube: WhitneyCube) -> list[WhitneyCube]:
    """Cubes of the cover overlapping the l(W)/4 inflation of ``cube``."""
    lo, hi = cube.box()
    r = cube.side / 4.0
    lo, hi = lo - r, hi + r
    lo[0] = max(lo[0], 0.0)
    return cubes_in_window(cover, lo, hi)
