"""Scalar fields with declared support, and a small expression language.

The first coordinate of every point is the axial (normal) coordinate; the
remaining ones are the cross (tangential) coordinates.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Iterable

import numpy as np

SMOOTHNESS = ("C0", "C1", "Cinf")


def as_points(x, d: int) -> np.ndarray:
    """Coerce ``x`` to an array of shape (n, d)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    if pts.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {pts.shape[1]}")
    return pts


class FieldFunction:
    """A scalar field on R^d.

    Parameters
    ----------
    evaluator : callable
        Maps an (n, d) array to an (n,) array.
    d : int
        Dimension of the points.
    support_radius : float
        The field vanishes outside the box [-R, R]^d. ``inf`` when not
        compactly supported.
    smoothness : {"C0", "C1", "Cinf"}
        "C0" admits finitely many jumps at declared breakpoints, "C1" means
        Lipschitz (kinks allowed at breakpoints), "Cinf" smooth.
    support_box : (lo, hi), optional
        Tighter support box; overrides ``support_radius``.
    breakpoints : iterable of float
        Axial coordinates where the field or its derivative jumps.
    hints : iterable of float
        Axial coordinates where the field changes rapidly but smoothly; used
        only to place quadrature cells.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], d: int, support_radius: float = math.inf,
                 smoothness: str = "C1", support_box=None, breakpoints: Iterable[float] = (),
                 hints: Iterable[float] = (), name: str = "u"):
        if smoothness not in SMOOTHNESS:
            raise ValueError(f"smoothness must be one of {SMOOTHNESS}")
        self._evaluator = evaluator
        self.d = int(d)
        self.smoothness = smoothness
        if support_box is None:
            r = float(support_radius)
            lo, hi = np.full(self.d, -r), np.full(self.d, r)
        else:
            lo, hi = (np.asarray(b, dtype=float).reshape(self.d) for b in support_box)
        if np.any(lo > hi):
            raise ValueError("empty support box")
        self.support_lo, self.support_hi = lo, hi
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.hints = tuple(sorted(float(b) for b in hints))
        self.name = name
        self._bounded = bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    @property
    def support_radius(self) -> float:
        return float(max(np.max(np.abs(self.support_lo)), np.max(np.abs(self.support_hi))))

    @property
    def compact(self) -> bool:
        return self._bounded

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        vals = np.asarray(self._evaluator(pts), dtype=float)
        if vals.ndim == 0:
            vals = np.full(pts.shape[0], float(vals))
        if np.any(np.isfinite(self.support_lo)) or np.any(np.isfinite(self.support_hi)):
            inside = np.all((pts >= self.support_lo) & (pts <= self.support_hi), axis=1)
            vals = np.where(inside, vals, 0.0)
        return vals

    def scaled(self, delta: float) -> "FieldFunction":
        """The field x -> u(delta * x)."""
        delta = float(delta)
        return FieldFunction(lambda p: self._evaluator(p * delta), self.d, smoothness=self.smoothness,
                             support_box=(self.support_lo / delta, self.support_hi / delta),
                             breakpoints=[b / delta for b in self.breakpoints],
                             hints=[b / delta for b in self.hints], name=self.name)

    def _combine(self, other: "FieldFunction", op) -> "FieldFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        order = SMOOTHNESS.index
        smooth = SMOOTHNESS[min(order(self.smoothness), order(other.smoothness))]
        return FieldFunction(lambda p: op(self(p), other(p)), self.d, smoothness=smooth,
                             support_box=(np.minimum(self.support_lo, other.support_lo),
                                          np.maximum(self.support_hi, other.support_hi)),
                             breakpoints=self.breakpoints + other.breakpoints,
                             hints=self.hints + other.hints)

    def __add__(self, other):
        if isinstance(other, FieldFunction):
            return self._combine(other, np.add)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FieldFunction):
            return self._combine(other, np.subtract)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating)):
            c = float(c)
            return FieldFunction(lambda p: c * self(p), self.d, smoothness=self.smoothness,
                                 support_box=(self.support_lo, self.support_hi),
                                 breakpoints=self.breakpoints, hints=self.hints, name=self.name)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"FieldFunction({self.name!r}, d={self.d}, smoothness={self.smoothness})"


def constant(c: float, d: int, support_radius: float = math.inf) -> FieldFunction:
    return FieldFunction(lambda p: np.full(p.shape[0], float(c)), d, support_radius=support_radius,
                         smoothness="Cinf", name=f"const{c:g}")


def smooth_bump(t) -> np.ndarray:
    """C-infinity bump equal to 1 at 0 and vanishing for |t| >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


# ---------------------------------------------------------------------------
# expression language

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "max": np.maximum, "min": np.minimum,
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide,
           ast.Pow: np.power}
_CONSTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    pass


def _variables(d: int) -> dict[str, int]:
    names = {f"x{i}": i for i in range(d)}
    names["xt"] = 0
    names["x"] = 0
    if d >= 2:
        names["xb"] = 1
        names["y"] = 1
    if d >= 3:
        names["z"] = 2
    return names


def compile_expression(text: str, d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an arithmetic expression over the point coordinates.

    Variables: ``x0..x{d-1}`` (``x``/``xt`` is the axial coordinate, ``xb``
    or ``y`` the first cross coordinate) and ``r`` (Euclidean norm).
    Functions: sin, cos, tan, exp, log, sqrt, abs, tanh, max, min and
    ``bump(expr, radius=1)``, a C-infinity bump centered where ``expr`` is 0.
    Both ``^`` and ``**`` denote powers.
    """
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    names = _variables(d)

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda p: np.full(p.shape[0], v)
        if isinstance(node, ast.Name):
            if node.id in names:
                i = names[node.id]
                return lambda p: p[:, i]
            if node.id == "r":
                return lambda p: np.sqrt(np.sum(p * p, axis=1))
            if node.id in _CONSTS:
                v = _CONSTS[node.id]
                return lambda p: np.full(p.shape[0], v)
            raise ExpressionError(f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, lhs, rhs = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda p: op(lhs(p), rhs(p))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda p: -inner(p)
            return inner
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            fname, args = node.func.id, [build(a) for a in node.args]
            if fname == "bump":
                if len(args) not in (1, 2):
                    raise ExpressionError("bump takes (expr) or (expr, radius)")
                if len(args) == 1:
                    return lambda p: smooth_bump(args[0](p))
                return lambda p: smooth_bump(args[0](p) / args[1](p))
            if fname in _FUNCS:
                fn = _FUNCS[fname]
                if fname in ("max", "min"):
                    if len(args) != 2:
                        raise ExpressionError(f"{fname} takes two arguments")
                    return lambda p: fn(args[0](p), args[1](p))
                if len(args) != 1:
                    raise ExpressionError(f"{fname} takes one argument")
                return lambda p: fn(args[0](p))
            raise ExpressionError(f"unknown function {fname!r}")
        raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")

    fn = build(tree)

    def evaluator(p):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return fn(p)

    return evaluator


def field_from_expression(text: str, d: int, support_radius: float, smoothness: str = "Cinf",
                          breakpoints: Iterable[float] = (), name: str | None = None) -> FieldFunction:
    """Build a FieldFunction from an expression; ``support_radius`` is required."""
    if support_radius is None:
        raise ExpressionError("every field must declare support_radius")
    return FieldFunction(compile_expression(text, d), d, support_radius=float(support_radius),
                         smoothness=smoothness, breakpoints=breakpoints, name=name or text)
