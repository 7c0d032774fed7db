"""Scikit-learn style wrapper around DtN assembly and the spectral solve."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dtn import DEFAULT_CLUSTER_TOL, assemble_dtn, steklov_spectrum
from .geometry import BoundaryCurve, CurveSpec, build_curve
from .harmonic import DEFAULT_SVD_TOL

__all__ = ["SteklovSolver"]


class SteklovSolver(TransformerMixin, BaseEstimator):
    """Fit the DtN operator of a curve; transform boundary data to normal derivatives.

    Parameters
    ----------
    basis_order : int
        Degree of the harmonic polynomial basis.
    svd_tol : float
        Relative singular value cutoff.
    k_max : int
        Highest eigenvalue index computed during ``fit``.
    cluster_tol : float
        Relative tolerance for grouping eigenvalues.

    Attributes
    ----------
    curve_ : BoundaryCurve
    dtn_ : DtnOperator
    spectrum_ : SteklovSpectrum
    eigenvalues_ : ndarray of shape (k_max + 1,)
    n_features_in_ : int
        Number of boundary nodes.
    """

    def __init__(self, basis_order=24, svd_tol=DEFAULT_SVD_TOL, k_max=10, cluster_tol=DEFAULT_CLUSTER_TOL):
        self.basis_order = basis_order
        self.svd_tol = svd_tol
        self.k_max = k_max
        self.cluster_tol = cluster_tol

    def fit(self, X, y=None):
        """``X`` is a :class:`CurveSpec` or an already built :class:`BoundaryCurve`."""
        if isinstance(X, CurveSpec):
            curve = build_curve(X)
        elif isinstance(X, BoundaryCurve):
            curve = X
        else:
            raise TypeError(f"expected CurveSpec or BoundaryCurve, got {type(X).__name__}")
        self.curve_ = curve
        self.dtn_ = assemble_dtn(curve, self.basis_order, self.svd_tol)
        self.spectrum_ = steklov_spectrum(self.dtn_, self.k_max, self.cluster_tol)
        self.eigenvalues_ = self.spectrum_.eigenvalues.copy()
        self.n_features_in_ = curve.n_nodes
        return self

    def transform(self, X):
        """Apply the DtN matrix to each row of nodal values."""
        check_is_fitted(self, "dtn_")
        F = check_array(X, ensure_2d=True)
        if F.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} nodal values per row, got {F.shape[1]}")
        return F @ self.dtn_.matrix.T

    def fit_transform(self, X, y=None, **fit_params):
        raise TypeError("fit takes a curve and transform takes boundary data; call them separately")

    def eigenfields(self) -> np.ndarray:
        check_is_fitted(self, "spectrum_")
        return self.spectrum_.eigenfields.copy()
