"""Nonlocal energy and trace seminorms, Whitney extensions and collar geometry."""

from .fields import FieldFunction, constant, field_from_expression
from .kernels import KernelSpec, kernel_eval, kernel_pth_moment, nonlocal_laplacian
from .quadrature import QuadratureError, QuadratureSpec, SeminormResult
from .seminorms import (norm_Lp, norm_S, norm_T, seminorm_local_trace, seminorm_S, seminorm_T)
from .whitney import WhitneyCover, WhitneyCube, cube_containing, cubes_in_window
from .geometry import GraphDomain, StripDomain, rounded_square_cover
from .extension import ExtensionConfig, cube_average, extend_E, extend_EL, extend_general, extend_lipschitz

__all__ = [
    "FieldFunction", "constant", "field_from_expression",
    "KernelSpec", "kernel_eval", "kernel_pth_moment", "nonlocal_laplacian",
    "QuadratureError", "QuadratureSpec", "SeminormResult",
    "norm_Lp", "norm_S", "norm_T", "seminorm_local_trace", "seminorm_S", "seminorm_T",
    "WhitneyCover", "WhitneyCube", "cube_containing", "cubes_in_window",
    "GraphDomain", "StripDomain", "rounded_square_cover",
    "ExtensionConfig", "cube_average", "extend_E", "extend_EL", "extend_general", "extend_lipschitz",
]
