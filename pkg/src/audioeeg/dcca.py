"""Two-view correlation training objective and its analytic gradient.

The loss is the negative Frobenius norm of the whitened cross-correlation
matrix T = Cxx^(-1/2) Cxy Cyy^(-1/2) built from regularized zero-centered
covariances.  All singular values of T enter the objective, not a top-k
subset.  Minimizing the loss maximizes the total correlation between the two
views' network outputs.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_EIGEN_FLOOR, whitened_cross_correlation
from .validation import NumericError, ValidationError, as_matrix, require


@dataclass
class DccaLossResult:
    loss: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    total_correlation: float


def dcca_loss(x, y, reg, eigen_floor=DEFAULT_EIGEN_FLOOR):
    """Loss -||T||_F and its exact gradients with respect to X and Y rows.

    With c = ||T||_F, M = Cxx^(-1/2) and N = Cyy^(-1/2), the chain rule
    through the inverse square roots and the covariances gives

        dc/dCxy = M T N / c
        dc/dCxx = -(1/2c) M T T^T M
        dc/dCyy = -(1/2c) N T^T T N

    which are mapped back to the centered data and then through the
    centering.  Eigenvalues clamped by ``eigen_floor`` are treated as
    constants, which never matters in practice because reg > 0 keeps the
    spectra above the floor.
    """
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    require(x.shape[0] == y.shape[0],
            f"X and Y must have the same number of rows ({x.shape[0]} != {y.shape[0]})")
    n = x.shape[0]
    require(n >= 2, f"dcca_loss needs at least 2 rows, got {n}")
    require(reg > 0, f"reg must be positive, got {reg}")

    t, m, n_, _ = whitened_cross_correlation(x, y, reg=reg, eigen_floor=eigen_floor)
    c = float(np.linalg.norm(t))
    if not np.isfinite(c):
        raise NumericError("whitened cross-correlation is not finite; "
                           "covariances too ill-conditioned for this reg")

    if c < 1e-300:
        # T == 0 exactly; the norm is not differentiable there, use the zero
        # subgradient.
        grad_x = np.zeros_like(x)
        grad_y = np.zeros_like(y)
        return DccaLossResult(loss=-c, grad_x=grad_x, grad_y=grad_y,
                              total_correlation=c)

    d_cxy = m @ t @ n_ / c
    d_cxx = -0.5 * (m @ (t @ t.T) @ m) / c
    d_cyy = -0.5 * (n_ @ (t.T @ t) @ n_) / c

    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    gx = (xc @ (2.0 * d_cxx) + yc @ d_cxy.T) / (n - 1)
    gy = (yc @ (2.0 * d_cyy) + xc @ d_cxy) / (n - 1)
    # Gradient of the centering map: remove each column's mean.
    gx -= gx.mean(axis=0)
    gy -= gy.mean(axis=0)

    return DccaLossResult(loss=-c, grad_x=-gx, grad_y=-gy, total_correlation=c)
