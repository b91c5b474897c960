"""Data-enabled predictive control toolkit.

Trajectory-library predictors built from block-Hankel matrices, regularized
convex controller variants, an iterative structured low-rank denoiser, a dense
interior-point QP backend, and a reproducible benchmark harness.
"""

from . import bench, hankel, matlib, plants, qp, slra, variants

__all__ = ["bench", "hankel", "matlib", "plants", "qp", "slra", "variants"]
__version__ = "0.1.0"
