"""Harmonic extension by least-squares fitting of harmonic polynomials.

The trial space is spanned by ``1, Re w^k, Im w^k`` (``k = 1..M``) with
``w = z / R`` and ``R`` the curve's reference radius.  Every member is
exactly harmonic, so only the boundary condition is approximated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import IllConditioned
from .geometry import BoundaryCurve, values_on

logger = logging.getLogger(__name__)

__all__ = [
    "HarmonicFunction",
    "basis_values",
    "basis_gradients",
    "solve_dirichlet",
    "evaluate_gradient",
    "BoundaryFit",
    "boundary_fit",
]

DEFAULT_SVD_TOL = 1e-12


def _powers(points, order: int, scale: float) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = (pts[:, 0] + 1j * pts[:, 1]) / scale
    return w[:, None] ** np.arange(order + 1)[None, :]


def basis_values(points, order: int, scale: float = 1.0) -> np.ndarray:
    """Basis evaluated at ``points``; shape ``(P, 2M+1)``.

    Column order is ``[1, Re w, Im w, Re w^2, Im w^2, ...]``.
    """
    pw = _powers(points, order, scale)
    out = np.empty((pw.shape[0], 2 * order + 1))
    out[:, 0] = 1.0
    out[:, 1::2] = pw[:, 1:].real
    out[:, 2::2] = pw[:, 1:].imag
    return out


def basis_gradients(points, order: int, scale: float = 1.0) -> np.ndarray:
    """Gradients of the basis; shape ``(P, 2M+1, 2)``."""
    pw = _powers(points, order, scale)
    k = np.arange(1, order + 1)
    # d/dz of w^k, with w = z/R
    dg = k[None, :] * pw[:, :-1] / scale
    out = np.zeros((pw.shape[0], 2 * order + 1, 2))
    # grad Re g = (Re g', -Im g'), grad Im g = (Im g', Re g')
    out[:, 1::2, 0] = dg.real
    out[:, 1::2, 1] = -dg.imag
    out[:, 2::2, 0] = dg.imag
    out[:, 2::2, 1] = dg.real
    return out


def basis_normal_derivatives(curve: BoundaryCurve, order: int) -> np.ndarray:
    grads = basis_gradients(curve.nodes, order, curve.scale)
    return np.einsum("pkd,pd->pk", grads, curve.normal)


@dataclass(frozen=True)
class BoundaryFit:
    """Truncated SVD of the weighted boundary collocation matrix.

    ``sqrt(W) B = U diag(s) V^T``; columns past ``rank`` are discarded.
    """

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    rank: int
    sqrt_w: np.ndarray
    order: int

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        rhs = self.sqrt_w * values
        return self.Vt.T @ ((self.U.T @ rhs) / self.s)


def boundary_fit(curve: BoundaryCurve, order: int, svd_tol: float = DEFAULT_SVD_TOL) -> BoundaryFit:
    if order < 0:
        raise ValueError("basis order must be non-negative")
    if 2 * order + 1 > curve.n_nodes:
        raise ValueError(
            f"basis order {order} needs {2 * order + 1} unknowns but the curve has "
            f"only {curve.n_nodes} nodes"
        )
    sqrt_w = np.sqrt(curve.weights)
    B = basis_values(curve.nodes, order, curve.scale)
    U, s, Vt = np.linalg.svd(sqrt_w[:, None] * B, full_matrices=False)
    rank = int(np.sum(s > svd_tol * s[0]))
    return BoundaryFit(U[:, :rank], s[:rank], Vt[:rank], rank, sqrt_w, order)


def _active_modes(values: np.ndarray, rel_tol: float = 1e-8) -> int:
    amp = np.abs(np.fft.rfft(values))[1:]
    if amp.size == 0 or amp.max() == 0.0:
        return 0
    return int(np.sum(amp > rel_tol * amp.max()))


@dataclass(frozen=True)
class HarmonicFunction:
    """Harmonic polynomial ``c0 + sum c_k^re Re w^k + c_k^im Im w^k``."""

    coeff: np.ndarray
    basis_order: int
    fit_residual: float
    curve_id: str
    scale: float = 1.0
    rank: int = -1

    def __call__(self, points) -> np.ndarray:
        return basis_values(points, self.basis_order, self.scale) @ self.coeff

    def gradient(self, points) -> np.ndarray:
        return np.einsum("pkd,k->pd", basis_gradients(points, self.basis_order, self.scale), self.coeff)

    def normal_derivative(self, curve: BoundaryCurve) -> np.ndarray:
        return np.sum(self.gradient(curve.nodes) * curve.normal, axis=1)


def solve_dirichlet(
    curve: BoundaryCurve,
    f,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
    fit: BoundaryFit | None = None,
) -> HarmonicFunction:
    """Harmonic extension of boundary data ``f``.

    Least squares over all nodes in the quadrature-weighted norm, solved
    through a truncated SVD.

    Raises
    ------
    IllConditioned
        If truncation removed basis directions and the remaining rank is
        below ``2 * (active Fourier modes of f) + 1``.
    """
    vals = values_on(curve, f)
    if fit is None:
        fit = boundary_fit(curve, order, svd_tol)
    n_basis = 2 * fit.order + 1
    if fit.rank < n_basis:
        need = 2 * _active_modes(vals) + 1
        if fit.rank < need:
            raise IllConditioned(
                f"rank {fit.rank} after truncation is below the {need} directions the data needs"
            )
        logger.debug("basis truncated to rank %d of %d", fit.rank, n_basis)
    coeff = fit.coefficients(vals)
    B = basis_values(curve.nodes, fit.order, curve.scale)
    residual = float(np.max(np.abs(B @ coeff - vals))) if vals.size else 0.0
    return HarmonicFunction(coeff, fit.order, residual, curve.curve_id, curve.scale, fit.rank)


def evaluate_gradient(u: HarmonicFunction, points) -> tuple[np.ndarray, np.ndarray]:
    """Values and ``(x, y)`` gradients of ``u`` at ``points``."""
    vals = u(points)
    grads = u.gradient(points)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(grads))):
        raise FloatingPointError("non-finite harmonic evaluation")
    return vals, grads
