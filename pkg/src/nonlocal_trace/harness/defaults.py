"""Desk-scale default configurations of every study."""

from __future__ import annotations

import numpy as np

from ..quadrature import QuadratureSpec
from .config import DomainDef, ExperimentConfig, FunctionDef

HORIZONS = (0.5, 0.25, 0.125, 0.0625)

# smooth, compactly supported, written so the same text works for any d
SMOOTH_FAMILY = (
    FunctionDef("bump", "bump(r, 1.5)", 1.5),
    FunctionDef("tilt", "(1 + x) * bump(r, 1.5)", 1.5),
    FunctionDef("wave", "cos(3*x) * bump(r, 1.5)", 1.5),
    FunctionDef("offset", "(x^2 + 0.5) * bump(r, 1.5)", 1.5),
    FunctionDef("phase", "sin(2*x + 1) * bump(r, 1.2)", 1.2),
)

# nonzero mean over the unit collar, so that the L^p growth of the extension is sharp
EXTENSION_FAMILY = (
    FunctionDef("plateau", "bump(x, 3)", 3.0),
    FunctionDef("ramp", "(2 + x) * bump(x, 3)", 3.0),
    FunctionDef("swell", "(1.5 + 0.5*cos(2*x)) * bump(x, 3)", 3.0),
    FunctionDef("lean", "exp(0.5*x) * bump(x, 3)", 3.0),
    FunctionDef("ripple", "(1 + 0.3*sin(3*x)) * bump(x, 3)", 3.0),
)

BOUNDARY_FAMILY = (
    FunctionDef("ridge", "bump(y, 1)", 1.0, dims=(2,)),
    FunctionDef("ripple", "(1 + 0.5*sin(3*y)) * bump(y, 1)", 1.0, dims=(2,)),
)

BOUNDED_FAMILY = (
    FunctionDef("one", "1", float("inf"), dims=(2,)),
    FunctionDef("plane", "x + 2*y", float("inf"), dims=(2,)),
    FunctionDef("saddle", "x*y", float("inf"), dims=(2,)),
    FunctionDef("wave", "cos(x)*exp(0.5*y)", float("inf"), dims=(2,)),
    FunctionDef("bump", "bump(r, 1.3)", 1.3, dims=(2,)),
)

LAPLACIAN_FAMILY = (
    FunctionDef("square", "r^2", float("inf")),
    FunctionDef("sine", "sin(x)", float("inf")),
    FunctionDef("shifted_sine", "sin(x + 1)", float("inf")),
)


def random_family(count: int = 10, seed: int = 2024) -> tuple:
    """Smooth random fields: a few random cosines under a bump."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        terms = [f"{rng.uniform(0.5, 1.5):.4f}"]
        for k in range(1, 4):
            a, ka, kb, ph = rng.normal(0, 1.0 / k), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 6.28)
            terms.append(f"{a:+.4f}*cos({ka:.4f}*x + {kb:.4f}*(r^2 - x^2) + {ph:.4f})")
        out.append(FunctionDef(f"rand{i}", f"({' '.join(terms)}) * bump(r, 1.2)", 1.2))
    return tuple(out)


def default_config(study: str) -> ExperimentConfig:
    quad = QuadratureSpec()
    if study == "scaling":
        return ExperimentConfig(study, d=(1, 2), p=(2.0, 3.0), delta=(0.5, 0.125), strip_len=(1.0,),
                                functions=SMOOTH_FAMILY[1:3], beta=(), quad=quad)
    if study == "equivalence":
        return ExperimentConfig(study, d=(1, 2), p=(2.0,), beta=(0.0,), delta=(0.5,),
                                alpha=(1 / 3, 1 / 2, 2 / 3), functions=random_family(), quad=quad)
    if study == "trace":
        return ExperimentConfig(study, d=(1, 2), p=(2.0,), beta=(), delta=HORIZONS, functions=SMOOTH_FAMILY,
                                quad=quad)
    if study == "lipschitz-trace":
        return ExperimentConfig(study, d=(2,), p=(2.0,), beta=(0.0, 1.0, 3.0), delta=HORIZONS,
                                functions=SMOOTH_FAMILY, domain=DomainDef("wedge", 1.0, "abs(x)"), quad=quad)
    if study == "general-trace":
        return ExperimentConfig(study, d=(2,), p=(2.0,), beta=(0.0, 1.0, 3.0), delta=(0.125, 0.0625),
                                functions=BOUNDED_FAMILY, domain=DomainDef("rounded-square", 1.0), quad=quad)
    if study == "inverse-trace":
        return ExperimentConfig(study, d=(1,), p=(2.0, 3.0), beta=(), delta=HORIZONS, strip_len=(1.0, 2.0, 4.0, 8.0),
                                functions=EXTENSION_FAMILY, cap=1.0, quad=quad)
    if study == "embedding":
        return ExperimentConfig(study, d=(1, 2), p=(2.0,), beta=(0.0,), delta=(1.0,),
                                strip_len=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0), functions=SMOOTH_FAMILY, quad=quad)
    if study == "local-limit":
        return ExperimentConfig(study, d=(2,), p=(2.0,), beta=(0.0,),
                                delta=(0.5, 0.25, 0.125, 0.0625, 0.03125), functions=BOUNDARY_FAMILY, quad=quad)
    if study == "laplacian-limit":
        return ExperimentConfig(study, d=(1, 2), p=(2.0,), beta=(), delta=(0.5, 0.25, 0.125, 0.0625),
                                functions=LAPLACIAN_FAMILY, quad=quad)
    return ExperimentConfig(study, functions=SMOOTH_FAMILY)
