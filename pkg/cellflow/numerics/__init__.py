"""Numerical kernels shared by the mean-field solvers.

The package exposes the confluent hypergeometric function, the disk and
``t``-axis quadratures, and bracketed root finding. Every kernel raises a
:class:`NumericsError` subclass instead of returning a silently inaccurate
value.
"""

from __future__ import annotations

from cellflow.numerics._errors import (
    ArgumentError,
    BracketError,
    KummerOverflowError,
    NumericsError,
    QuadratureError,
)
from cellflow.numerics._kummer import (
    OVERFLOW_LIMIT,
    SERIES_LIMIT,
    kummer_1f1,
    kummer_derivative,
    scaled_kummer,
)
from cellflow.numerics._quadrature import (
    DEFAULT_SPEC,
    DiskRule,
    OuterKernel,
    QuadratureEstimate,
    QuadratureSpec,
    TRule,
    adaptive_quad,
    disk_integral,
    disk_rule,
    g_inner,
    outer_kernel,
    outer_t_integral,
    saturation_area,
    t_rule,
)
from cellflow.numerics._roots import bracketed_root

__all__ = [
    "DEFAULT_SPEC",
    "OVERFLOW_LIMIT",
    "SERIES_LIMIT",
    "ArgumentError",
    "BracketError",
    "DiskRule",
    "KummerOverflowError",
    "NumericsError",
    "OuterKernel",
    "QuadratureError",
    "QuadratureEstimate",
    "QuadratureSpec",
    "TRule",
    "adaptive_quad",
    "bracketed_root",
    "disk_integral",
    "disk_rule",
    "g_inner",
    "kummer_1f1",
    "kummer_derivative",
    "outer_kernel",
    "outer_t_integral",
    "saturation_area",
    "scaled_kummer",
    "t_rule",
]
