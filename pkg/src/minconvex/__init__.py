"""Numerical toolkit for p-plurisubharmonic functions, minimally convex
domains, null discs, minimal hulls and minimal multigraphs."""

__version__ = "0.1.0"

from .fields import (  # noqa: E402
    ScalarField,
    SymmetricForm,
    compose_convex,
    hessian,
    load_field,
    parse_field,
)
from .psh import check_null_psh, check_p_psh, eigen_sum, levi_form  # noqa: E402

__all__ = [
    "__version__",
    "ScalarField",
    "SymmetricForm",
    "compose_convex",
    "hessian",
    "load_field",
    "parse_field",
    "check_null_psh",
    "check_p_psh",
    "eigen_sum",
    "levi_form",
]
