"""Dense symmetric linear algebra and linear CCA.

Covariance estimation, symmetric eigendecomposition, matrix inverse square
root, and a two-view linear CCA estimator.  Everything works on plain float64
numpy arrays with samples in rows.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .validation import NumericError, ValidationError, as_matrix, require

DEFAULT_REG = 1e-4
DEFAULT_EIGEN_FLOOR = 1e-12
SYMMETRY_TOL = 1e-8


@dataclass
class CovarianceSet:
    """Regularized zero-centered covariances of two row-aligned views."""

    cxx: np.ndarray
    cyy: np.ndarray
    cxy: np.ndarray
    reg: float


@dataclass
class EigDecomposition:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def covariances(x, y, reg=DEFAULT_REG):
    """Sample covariances of both views plus the cross-covariance.

    Columns are centered by their sample means; the 1/(n-1) normalization is
    used throughout.  ``reg`` is added to the diagonals of the two
    auto-covariances only, never to the cross term.
    """
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    require(x.shape[0] == y.shape[0],
            f"X and Y must have the same number of rows ({x.shape[0]} != {y.shape[0]})")
    n = x.shape[0]
    require(n >= 2, f"need at least 2 rows to estimate covariances, got {n}")
    require(reg >= 0, f"reg must be non-negative, got {reg}")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    cxx = xc.T @ xc / (n - 1) + reg * np.eye(x.shape[1])
    cyy = yc.T @ yc / (n - 1) + reg * np.eye(y.shape[1])
    cxy = xc.T @ yc / (n - 1)
    return CovarianceSet(cxx=cxx, cyy=cyy, cxy=cxy, reg=reg)


def _check_symmetric(a, name="A"):
    a = as_matrix(a, name)
    require(a.shape[0] == a.shape[1], f"{name} must be square, got {a.shape}")
    scale = max(1.0, np.abs(a).max())
    require(np.abs(a - a.T).max() <= SYMMETRY_TOL * scale,
            f"{name} is not symmetric within tolerance {SYMMETRY_TOL}")
    return a


def eig_sym(a):
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector's largest-magnitude entry is made positive so the
    decomposition is reproducible across runs.
    """
    a = _check_symmetric(a)
    lam, vec = np.linalg.eigh(a)
    if not np.all(np.isfinite(lam)):
        raise NumericError("eigendecomposition did not converge to finite values")
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vec = vec[:, order]
    flips = np.sign(vec[np.argmax(np.abs(vec), axis=0), np.arange(vec.shape[1])])
    flips[flips == 0] = 1.0
    vec = vec * flips
    return EigDecomposition(eigenvalues=lam, eigenvectors=vec)


def inv_sqrt_sym(a, eigen_floor=DEFAULT_EIGEN_FLOOR):
    """Inverse matrix square root Q diag(max(lam, floor))^(-1/2) Q^T."""
    dec = eig_sym(a)
    lam = np.maximum(dec.eigenvalues, eigen_floor)
    if np.any(lam <= 0):
        raise NumericError("matrix has non-positive eigenvalues after flooring; "
                           "increase reg or eigen_floor")
    v = dec.eigenvectors
    return (v * lam ** -0.5) @ v.T


def whitened_cross_correlation(x, y, reg=DEFAULT_REG, eigen_floor=DEFAULT_EIGEN_FLOOR):
    """The matrix T = Cxx^(-1/2) Cxy Cyy^(-1/2) plus the pieces used to build it.

    Returns (t, m, n_, cov) where m and n_ are the two inverse square roots.
    Shared by the CCA fit and by the DCCA training objective so the two stay
    numerically consistent.
    """
    cov = covariances(x, y, reg=reg)
    m = inv_sqrt_sym(cov.cxx, eigen_floor=eigen_floor)
    n_ = inv_sqrt_sym(cov.cyy, eigen_floor=eigen_floor)
    t = m @ cov.cxy @ n_
    return t, m, n_, cov


class LinearCCA(BaseEstimator):
    """Linear CCA via the whitened cross-correlation SVD.

    Projections are rescaled so each canonical component has unit sample
    variance on the fitting data.  ``n_components`` may not exceed
    min(dx, dy, n - 1); the last bound is the rank the sample supports.

    Attributes (after fit): ``mean_x_``, ``mean_y_``, ``proj_x_``,
    ``proj_y_``, ``correlations_``.
    """

    def __init__(self, n_components=1, reg=DEFAULT_REG, eigen_floor=DEFAULT_EIGEN_FLOOR):
        self.n_components = n_components
        self.reg = reg
        self.eigen_floor = eigen_floor

    def fit(self, x, y):
        x = as_matrix(x, "X")
        y = as_matrix(y, "Y")
        n = x.shape[0]
        k = int(self.n_components)
        require(k >= 1, f"n_components must be >= 1, got {k}")
        require(k <= min(x.shape[1], y.shape[1], n - 1),
                f"n_components={k} exceeds min(dx, dy, n-1)="
                f"{min(x.shape[1], y.shape[1], n - 1)}")
        t, m, n_, _ = whitened_cross_correlation(x, y, reg=self.reg,
                                                 eigen_floor=self.eigen_floor)
        u, s, vt = np.linalg.svd(t)
        proj_x = m @ u[:, :k]
        proj_y = n_ @ vt[:k].T

        self.mean_x_ = x.mean(axis=0)
        self.mean_y_ = y.mean(axis=0)
        xc = x - self.mean_x_
        yc = y - self.mean_y_
        # Rescale to unit sample variance on the fitting data; the ridge term
        # biases the whitening slightly so the raw scores are not exactly unit.
        for proj, centered in ((proj_x, xc), (proj_y, yc)):
            scores = centered @ proj
            std = scores.std(axis=0, ddof=1)
            if np.any(std < 1e-12):
                raise NumericError("canonical component with ~zero variance; "
                                   "rank deficiency unresolved by reg")
            proj /= std
        self.proj_x_ = proj_x
        self.proj_y_ = proj_y
        self.correlations_ = np.clip(s[:k], 0.0, 1.0)
        return self

    def _require_fitted(self):
        if not hasattr(self, "proj_x_"):
            raise NotFittedError("LinearCCA instance is not fitted yet")

    def transform(self, data, view="x"):
        """Project one view: (data - mean) @ proj for the selected side."""
        self._require_fitted()
        data = as_matrix(data, "data")
        require(view in ("x", "y"), f"view must be 'x' or 'y', got {view!r}")
        mean = self.mean_x_ if view == "x" else self.mean_y_
        proj = self.proj_x_ if view == "x" else self.proj_y_
        require(data.shape[1] == mean.shape[0],
                f"view {view!r} expects {mean.shape[0]} columns, got {data.shape[1]}")
        return (data - mean) @ proj
