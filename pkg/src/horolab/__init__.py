"""Numerical laboratory for horospherical dynamics on rank-one products.

Subpackages cover per-factor PSL(2,R) arithmetic, the product group and its
projections, homogeneous quasi-metric covering geometry, Schottky systems
and their self-joinings, growth/conformal-density estimation, directional
recurrence experiments, and a reproducible command-line harness.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
