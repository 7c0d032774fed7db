"""Discrete Dirichlet-to-Neumann operator and Steklov spectra."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import CurveMismatch, EigSolveFailure, IllConditioned
from .geometry import BoundaryCurve, BoundaryField, values_on
from .harmonic import DEFAULT_SVD_TOL, BoundaryFit, basis_normal_derivatives, boundary_fit

__all__ = [
    "DtnOperator",
    "SteklovSpectrum",
    "ClusterRow",
    "assemble_dtn",
    "steklov_spectrum",
    "cluster_report",
    "find_clusters",
]

DEFAULT_CLUSTER_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class DtnOperator:
    """Dense map from nodal Dirichlet data to nodal outward normal derivative.

    ``matrix = Bn V diag(1/s) U^T sqrt(W)`` where ``sqrt(W) B = U diag(s) V^T``
    is the truncated SVD of the weighted collocation matrix and ``Bn`` holds
    the basis normal derivatives.  ``ritz`` is the same operator written in
    the orthonormal coordinates ``U`` of the weighted trial space, which is
    what the eigensolver uses.
    """

    matrix: np.ndarray
    curve_id: str
    basis_order: int
    asymmetry: float
    weights: np.ndarray
    fit: BoundaryFit = field(repr=False)
    ritz: np.ndarray = field(repr=False)

    def __call__(self, f) -> np.ndarray:
        vals = f.values if isinstance(f, BoundaryField) else np.asarray(f, dtype=float)
        return self.matrix @ vals

    def apply(self, curve: BoundaryCurve, f) -> BoundaryField:
        if curve.curve_id != self.curve_id:
            raise CurveMismatch(f"operator built on {self.curve_id!r}, curve is {curve.curve_id!r}")
        return curve.field(self.matrix @ values_on(curve, f))


def assemble_dtn(curve: BoundaryCurve, order: int = 24, svd_tol: float = DEFAULT_SVD_TOL) -> DtnOperator:
    """Assemble the DtN matrix on ``curve`` with a degree-``order`` harmonic basis.

    Raises
    ------
    IllConditioned
        If SVD truncation keeps fewer than ``order + 1`` basis directions.
    """
    if 4 * order > curve.n_nodes:
        raise ValueError(f"basis order {order} exceeds n_nodes/4 = {curve.n_nodes // 4}")
    fit = boundary_fit(curve, order, svd_tol)
    if fit.rank < order + 1:
        raise IllConditioned(
            f"only {fit.rank} of {2 * order + 1} basis directions survive truncation; "
            "lower the basis order or smooth the curve"
        )
    Bn = basis_normal_derivatives(curve, order)
    # Bn c for c = V diag(1/s) U^T sqrt(W) f
    left = Bn @ (fit.Vt.T / fit.s)
    matrix = left @ (fit.U.T * fit.sqrt_w)
    S = fit.sqrt_w[:, None] * left @ fit.U.T
    asym = float(np.max(np.sum(np.abs(S - S.T), axis=1)))
    ritz = fit.U.T @ (fit.sqrt_w[:, None] * left)
    return DtnOperator(matrix, curve.curve_id, order, asym, curve.weights.copy(), fit, ritz)


@dataclass(frozen=True, eq=False)
class SteklovSpectrum:
    """Ascending eigenvalues with ``L2(dA)``-orthonormal eigenfields.

    ``eigenfields[i]`` holds the nodal values of the field for
    ``eigenvalues[i]``.  ``clusters`` lists tuples of indices whose successive
    gaps fall below ``cluster_tol * (1 + lambda)``.
    """

    eigenvalues: np.ndarray
    eigenfields: np.ndarray
    clusters: list[tuple[int, ...]]
    residuals: np.ndarray
    curve_id: str
    cluster_tol: float = DEFAULT_CLUSTER_TOL

    def __len__(self):
        return self.eigenvalues.shape[0]

    def field(self, i: int) -> BoundaryField:
        return BoundaryField(self.eigenfields[i], self.curve_id)

    def fields(self) -> list[BoundaryField]:
        return [self.field(i) for i in range(len(self))]

    def cluster_of(self, i: int) -> int:
        for c, members in enumerate(self.clusters):
            if i in members:
                return c
        raise IndexError(i)

    def cluster_values(self, c: int) -> np.ndarray:
        return self.eigenvalues[list(self.clusters[c])]

    def cluster_fields(self, c: int) -> np.ndarray:
        return self.eigenfields[list(self.clusters[c])]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "clusters": [[int(c[0]), int(c[-1])] for c in self.clusters],
            "residuals": [float(x) for x in self.residuals],
        }

    def to_csv(self, curve: BoundaryCurve) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["theta"] + [f"f{i}" for i in range(len(self))])
        for j, th in enumerate(curve.theta):
            writer.writerow([repr(float(th))] + [repr(float(v)) for v in self.eigenfields[:, j]])
        return buf.getvalue()


def find_clusters(eigenvalues, tol: float = DEFAULT_CLUSTER_TOL) -> list[tuple[int, ...]]:
    """Group sorted eigenvalues into maximal runs of near-equal values."""
    lam = np.asarray(eigenvalues, dtype=float)
    clusters: list[tuple[int, ...]] = []
    current: list[int] = []
    for i, value in enumerate(lam):
        if current and value - lam[current[-1]] >= tol * (1.0 + abs(lam[current[-1]])):
            clusters.append(tuple(current))
            current = []
        current.append(i)
    if current:
        clusters.append(tuple(current))
    return clusters


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive, so outputs are reproducible
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def steklov_spectrum(
    dtn: DtnOperator, k_max: int = 10, cluster_tol: float = DEFAULT_CLUSTER_TOL
) -> SteklovSpectrum:
    """The first ``k_max + 1`` Steklov eigenpairs of ``dtn``.

    Rayleigh-Ritz on the weighted trial space: the similarity transform
    ``sqrt(W) K sqrt(W)^-1`` is restricted to the span of the fitted basis
    traces and symmetrized before the dense symmetric eigensolve.
    """
    n_max = 2 * dtn.basis_order - 1
    if k_max + 1 > n_max:
        raise ValueError(
            f"k_max={k_max} asks for {k_max + 1} eigenvalues; basis order "
            f"{dtn.basis_order} resolves at most {n_max}"
        )
    if k_max + 1 > dtn.fit.rank:
        raise ValueError(f"only {dtn.fit.rank} trial directions survive truncation")
    R = 0.5 * (dtn.ritz + dtn.ritz.T)
    try:
        mu, Y = np.linalg.eigh(R)
    except np.linalg.LinAlgError as exc:
        raise EigSolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(mu)):
        raise EigSolveFailure("non-finite eigenvalues")
    mu, Y = mu[: k_max + 1], Y[:, : k_max + 1]
    F = _fix_signs((dtn.fit.U @ Y) / dtn.fit.sqrt_w[:, None]).T
    residuals = np.max(np.abs(F @ dtn.matrix.T - mu[:, None] * F), axis=1)
    return SteklovSpectrum(mu, F, find_clusters(mu, cluster_tol), residuals, dtn.curve_id, cluster_tol)


class ClusterRow(NamedTuple):
    index: int
    multiplicity: int
    value: float
    min_internal_gap: float | None
    gap_below: float | None
    gap_above: float | None


def cluster_report(spectrum: SteklovSpectrum) -> list[ClusterRow]:
    """One row per cluster: multiplicity, spread, and gaps to the neighbours."""
    lam = spectrum.eigenvalues
    rows = []
    n = len(spectrum.clusters)
    for c, members in enumerate(spectrum.clusters):
        vals = lam[list(members)]
        internal = float(np.min(np.diff(vals))) if len(members) > 1 else None
        below = float(vals[0] - lam[spectrum.clusters[c - 1][-1]]) if c > 0 else None
        above = float(lam[spectrum.clusters[c + 1][0]] - vals[-1]) if c + 1 < n else None
        rows.append(ClusterRow(c, len(members), float(vals.mean()), internal, below, above))
    return rows
