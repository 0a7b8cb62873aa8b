"""Experiment configuration and its INI file format.

A config file looks like::

    [study]
    name = trace
    seed = 0

    [grid]
    d = 1, 2
    p = 2
    beta = 0, 0.5
    delta = 0.5, 0.25

    [functions]
    bump = bump(r, 1.5)
    bump.support = 1.5
    tilt = (1 + x) * bump(r, 1.5)
    tilt.support = 1.5
    tilt.smoothness = Cinf

    [domain]
    kind = wedge
    lip = 1

    [quad]
    mc_samples = 8192

    [output]
    csv = trace.csv
    plot = trace.svg

Missing sections fall back to the defaults of the chosen study.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
import io
from pathlib import Path

from ..fields import FieldFunction, field_from_expression
from ..quadrature import QuadratureSpec

STUDIES = ("scaling", "equivalence", "trace", "inverse-trace", "lipschitz-trace", "general-trace", "embedding",
           "local-limit", "laplacian-limit")
EXTENSION_STUDIES = ("inverse-trace",)
DOMAIN_KINDS = ("halfspace", "flat", "tilted", "wedge", "rounded-square")


class ConfigError(ValueError):
    pass


def desk_betas(d: int, p: float) -> tuple:
    return (0.0, 0.5 * d, 0.9 * d, 1.1 * d, d + 0.5 * p)


@dataclass(frozen=True)
class FunctionDef:
    """A test field given by an expression.

    ``dims`` restricts the field to some dimensions; empty means any.
    """

    ident: str
    expr: str
    support: float
    smoothness: str = "Cinf"
    breakpoints: tuple = ()
    dims: tuple = ()

    def build(self, d: int) -> FieldFunction:
        return field_from_expression(self.expr, d, self.support, self.smoothness, self.breakpoints, self.ident)

    def applies_to(self, d: int) -> bool:
        return not self.dims or d in self.dims


@dataclass(frozen=True)
class DomainDef:
    kind: str = "halfspace"
    lip: float = 1.0
    profile: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    d: tuple = (1,)
    p: tuple = (2.0,)
    beta: tuple = (0.0,)
    delta: tuple = (0.5, 0.25, 0.125, 0.0625)
    strip_len: tuple = (1.0,)
    alpha: tuple = ()
    functions: tuple = ()
    domain: DomainDef = field(default_factory=DomainDef)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    cap: float = 1.0
    seed: int = 0
    csv: str | None = None
    plot: str | None = None

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; choose from {', '.join(STUDIES)}")
        if self.domain.kind not in DOMAIN_KINDS:
            raise ConfigError(f"unknown domain kind {self.domain.kind!r}")
        if not self.functions:
            raise ConfigError("at least one test function is required")
        for d in self.d:
            if d not in (1, 2, 3):
                raise ConfigError("d must be 1, 2 or 3")
            for p in self.p:
                for beta in self.betas(d, p):
                    if not 0 <= beta < d + p:
                        raise ConfigError(f"beta={beta} outside [0, d+p) for d={d}, p={p}")
                    if self.study in EXTENSION_STUDIES and beta == d:
                        raise ConfigError(f"beta = d = {d} is excluded for extension studies")
        if any(not dl > 0 for dl in self.delta):
            raise ConfigError("horizons must be positive")
        if self.study in EXTENSION_STUDIES and any(dl >= self.cap for dl in self.delta):
            raise ConfigError("every horizon must lie below the cap")

    def betas(self, d: int, p: float) -> tuple:
        """The explicit beta grid, or the desk grid of (d, p) when none is given."""
        return self.beta if self.beta else desk_betas(d, p)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, quad=replace(self.quad, seed=seed))

    def functions_for(self, d: int) -> list[FunctionDef]:
        return [f for f in self.functions if f.applies_to(d)]


def _floats(text: str) -> tuple:
    if text.strip() == "default":
        return ()
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        if "/" in item:
            num, den = item.split("/")
            out.append(float(num) / float(den))
        else:
            out.append(float(item))
    return tuple(out)


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in _floats(text))


def _parse_functions(section) -> tuple:
    base = {k: v for k, v in section.items() if "." not in k}
    attrs = {k: v for k, v in section.items() if "." in k}
    out = []
    for ident, expr in base.items():
        if f"{ident}.support" not in attrs:
            raise ConfigError(f"function {ident!r} must declare {ident}.support")
        support = float(attrs[f"{ident}.support"])
        smooth = attrs.get(f"{ident}.smoothness", "Cinf").strip()
        bps = _floats(attrs.get(f"{ident}.breakpoints", ""))
        dims = _ints(attrs.get(f"{ident}.d", ""))
        out.append(FunctionDef(ident, expr.strip(), support, smooth, bps, dims))
    for key in attrs:
        if key.split(".", 1)[0] not in base:
            raise ConfigError(f"attribute {key!r} refers to an undefined function")
    return tuple(out)


def load_config(path: str | Path, study: str | None = None) -> ExperimentConfig:
    """Read an INI config; keys absent from the file take the study defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        found = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if not found:
        raise ConfigError(f"cannot read config {path}")
    name = parser.get("study", "name", fallback=study)
    if name is None:
        raise ConfigError("config names no study")
    if study is not None and name != study:
        raise ConfigError(f"config is for study {name!r}, not {study!r}")
    from .defaults import default_config

    cfg = default_config(name)
    updates = {}
    if parser.has_section("grid"):
        g = parser["grid"]
        for key, conv in (("d", _ints), ("p", _floats), ("beta", _floats), ("delta", _floats),
                          ("strip_len", _floats), ("alpha", _floats)):
            if key in g:
                updates[key] = conv(g[key])
        if "L" in g:
            updates["strip_len"] = _floats(g["L"])
        if "cap" in g:
            updates["cap"] = float(g["cap"])
    if parser.has_section("functions"):
        updates["functions"] = _parse_functions(parser["functions"])
    if parser.has_section("domain"):
        dm = parser["domain"]
        updates["domain"] = DomainDef(dm.get("kind", cfg.domain.kind).strip(), float(dm.get("lip", cfg.domain.lip)),
                                      dm.get("profile", cfg.domain.profile).strip())
    if parser.has_section("quad"):
        q = parser["quad"]
        kw = {}
        for key, conv in (("order", int), ("depth", int), ("split_radius", float), ("mc_samples", int),
                          ("replicates", int)):
            if key in q:
                kw[key] = conv(q[key])
        updates["quad"] = replace(cfg.quad, **kw)
    if parser.has_section("output"):
        o = parser["output"]
        updates["csv"] = o.get("csv")
        updates["plot"] = o.get("plot")
    try:
        cfg = replace(cfg, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = parser.getint("study", "seed", fallback=cfg.seed)
    return cfg.with_seed(seed)


def format_config(cfg: ExperimentConfig) -> str:
    """Inverse of ``load_config`` (up to key order)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    join = lambda vals: ", ".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in vals)
    parser["study"] = {"name": cfg.study, "seed": str(cfg.seed)}
    grid = {"d": join(cfg.d), "p": join(cfg.p), "beta": join(cfg.beta) or "default", "delta": join(cfg.delta),
            "strip_len": join(cfg.strip_len), "cap": repr(cfg.cap)}
    if cfg.alpha:
        grid["alpha"] = join(cfg.alpha)
    parser["grid"] = grid
    funcs = {}
    for f in cfg.functions:
        funcs[f.ident] = f.expr
        funcs[f"{f.ident}.support"] = repr(f.support)
        funcs[f"{f.ident}.smoothness"] = f.smoothness
        if f.breakpoints:
            funcs[f"{f.ident}.breakpoints"] = join(f.breakpoints)
        if f.dims:
            funcs[f"{f.ident}.d"] = join(f.dims)
    parser["functions"] = funcs
    parser["domain"] = {"kind": cfg.domain.kind, "lip": repr(cfg.domain.lip), "profile": cfg.domain.profile}
    q = cfg.quad
    parser["quad"] = {"order": str(q.order), "depth": str(q.depth), "split_radius": repr(q.split_radius),
                      "mc_samples": str(q.mc_samples), "replicates": str(q.replicates)}
    out = {}
    if cfg.csv:
        out["csv"] = cfg.csv
    if cfg.plot:
        out["plot"] = cfg.plot
    if out:
        parser["output"] = out
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

