"""First-order boundary-variation calculus for the DtN operator.

A boundary displacement is ``hdot = sigma * n + tau * t`` on the curve.  Each
analytic variation below has a finite-difference counterpart that rebuilds the
operator on displaced curves, so formulas and oracles share nothing beyond
the underlying DtN discretization.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dtn import (
    DEFAULT_CLUSTER_TOL,
    DtnOperator,
    SteklovSpectrum,
    assemble_dtn,
    find_clusters,
    steklov_spectrum,
)
from .exceptions import (
    ConsistencyError,
    CurveMismatch,
    NotNormalized,
    NotOrthonormal,
    TrackingAmbiguous,
)
from .geometry import (
    BoundaryCurve,
    BoundaryField,
    CurveSpec,
    build_curve,
    curve_from_points,
    inner,
    laplace_beltrami_boundary,
    norm,
    tangential_derivative,
    values_on,
)
from .harmonic import DEFAULT_SVD_TOL, HarmonicFunction, solve_dirichlet

logger = logging.getLogger(__name__)

__all__ = [
    "PerturbationField",
    "DerivativeReport",
    "dt_harmonic_extension",
    "dt_dtn_normal",
    "dt_dtn_general",
    "eigenvalue_derivative",
    "splitting_matrix",
    "splitting_rates",
    "fd_eigenvalue_derivative",
    "fd_harmonic_extension",
    "fd_dtn_variation",
    "displaced_curve",
    "radial_perturbation",
    "radial_compensation",
    "track_branches",
]


@dataclass(frozen=True)
class PerturbationField:
    """Boundary velocity ``sigma * n + tau_t * tangent``."""

    sigma: BoundaryField
    tau_t: BoundaryField
    interior_extension: str = "normal-graph"

    def __post_init__(self):
        if self.sigma.curve_id != self.tau_t.curve_id:
            raise ValueError("sigma and tau_t live on different curves")
        if self.interior_extension != "normal-graph":
            raise ValueError(f"unsupported extension rule {self.interior_extension!r}")

    @classmethod
    def normal(cls, curve: BoundaryCurve, sigma) -> "PerturbationField":
        return cls(curve.field(values_on(curve, sigma)), curve.field(np.zeros(curve.n_nodes)))

    @classmethod
    def from_components(cls, curve: BoundaryCurve, sigma, tau) -> "PerturbationField":
        return cls(curve.field(values_on(curve, sigma)), curve.field(values_on(curve, tau)))

    @classmethod
    def from_vectors(cls, curve: BoundaryCurve, vectors) -> "PerturbationField":
        v = np.asarray(vectors, dtype=float)
        return cls(
            curve.field(np.sum(v * curve.normal, axis=1)),
            curve.field(np.sum(v * curve.tangent, axis=1)),
        )

    def vectors(self, curve: BoundaryCurve) -> np.ndarray:
        s = values_on(curve, self.sigma)
        t = values_on(curve, self.tau_t)
        return s[:, None] * curve.normal + t[:, None] * curve.tangent

    @property
    def is_normal(self) -> bool:
        return not np.any(self.tau_t.values)


@dataclass
class DerivativeReport:
    """Analytic value next to its finite-difference estimate.

    ``rel_error = max |formula - fd| / (1 + |formula|)``.
    """

    formula_value: Any
    fd_value: Any
    fd_step: float
    rel_error: float
    richardson_value: Any = None
    richardson_error: float | None = None
    tolerance: float = 1e-4
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.rel_error) and self.rel_error <= self.tolerance)

    def to_dict(self) -> dict:
        def plain(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            return x

        out = {k: plain(v) for k, v in asdict(self).items()}
        out["passed"] = self.passed
        return out


def _rel_error(formula, fd) -> float:
    formula = np.asarray(formula, dtype=float)
    fd = np.asarray(fd, dtype=float)
    return float(np.max(np.abs(formula - fd) / (1.0 + np.abs(formula))))


def _dtn_for(curve: BoundaryCurve, dtn: DtnOperator | None, order: int, svd_tol: float) -> DtnOperator:
    if dtn is None:
        return assemble_dtn(curve, order, svd_tol)
    if dtn.curve_id != curve.curve_id:
        raise CurveMismatch(f"operator built on {dtn.curve_id!r}, curve is {curve.curve_id!r}")
    return dtn


def _as_hdot(curve: BoundaryCurve, hdot) -> PerturbationField:
    if isinstance(hdot, PerturbationField):
        values_on(curve, hdot.sigma)
        return hdot
    return PerturbationField.normal(curve, hdot)


# --------------------------------------------------------------------------
# analytic variations


def dt_harmonic_extension(
    curve: BoundaryCurve,
    u: HarmonicFunction,
    hdot,
    order: int | None = None,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> HarmonicFunction:
    """Variation of the harmonic extension at fixed points of space.

    It is harmonic with boundary values ``-grad u . hdot``.
    """
    hdot = _as_hdot(curve, hdot)
    grad = u.gradient(curve.nodes)
    datum = -np.sum(grad * hdot.vectors(curve), axis=1)
    return solve_dirichlet(curve, datum, order or u.basis_order, svd_tol)


def dt_dtn_normal(
    curve: BoundaryCurve,
    f,
    sigma,
    dtn: DtnOperator | None = None,
    lambda_hint: float | None = None,
    use_hint: bool = False,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> BoundaryField:
    """Variation of the pulled-back DtN operator applied to ``f`` for ``hdot = sigma n``.

    ``-sigma (f_ss + H Lf) - sigma_s f_s - L(sigma Lf)``.

    With ``use_hint`` the inner ``Lf`` is replaced by ``lambda_hint * f``; the
    outer application of ``L`` always uses the matrix.
    """
    dtn = _dtn_for(curve, dtn, order, svd_tol)
    fv = values_on(curve, f)
    sv = values_on(curve, sigma)
    Lf = dtn.matrix @ fv
    if lambda_hint is not None:
        gap = float(np.max(np.abs(Lf - lambda_hint * fv)))
        logger.debug("|Lf - lambda f|_inf = %.3e", gap)
        if use_hint:
            Lf = lambda_hint * fv
    elif use_hint:
        raise ValueError("use_hint requires lambda_hint")
    f_ss = laplace_beltrami_boundary(curve, fv).values
    f_s = tangential_derivative(curve, fv).values
    s_s = tangential_derivative(curve, sv).values
    out = -sv * (f_ss + curve.curvature * Lf) - s_s * f_s - dtn.matrix @ (sv * Lf)
    return curve.field(out)


def dt_dtn_general(
    curve: BoundaryCurve,
    f,
    hdot,
    dtn: DtnOperator | None = None,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> BoundaryField:
    """Variation of the pulled-back DtN operator for a general boundary velocity.

    ``(Lf)_s tau - sigma (f_ss + H Lf) - sigma_s f_s - L(grad u . hdot)``.
    The first term pairs the tangential gradient of ``Lf`` with the tangential
    part of ``hdot``; the normal part is already carried by the second term.
    """
    dtn = _dtn_for(curve, dtn, order, svd_tol)
    hdot = _as_hdot(curve, hdot)
    fv = values_on(curve, f)
    sv = hdot.sigma.values
    tv = hdot.tau_t.values
    u = solve_dirichlet(curve, fv, fit=dtn.fit)
    grad = u.gradient(curve.nodes)
    gu_h = np.sum(grad * hdot.vectors(curve), axis=1)
    Lf = dtn.matrix @ fv
    f_ss = laplace_beltrami_boundary(curve, fv).values
    f_s = tangential_derivative(curve, fv).values
    s_s = tangential_derivative(curve, sv).values
    Lf_s = tangential_derivative(curve, Lf).values
    out = tv * Lf_s - sv * (f_ss + curve.curvature * Lf) - s_s * f_s - dtn.matrix @ gu_h
    return curve.field(out)


def hadamard_integrand(curve: BoundaryCurve, f, lam: float) -> np.ndarray:
    fv = values_on(curve, f)
    f_s = tangential_derivative(curve, fv).values
    return f_s**2 - lam * curve.curvature * fv**2 - lam**2 * fv**2


def eigenvalue_derivative(
    curve: BoundaryCurve,
    f,
    lam: float,
    sigma,
    dtn: DtnOperator | None = None,
    check: bool = True,
    tol: float = 1e-8,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> float:
    """Rate of change of a simple Steklov eigenvalue under ``hdot = sigma n``.

    Returns ``int (f_s^2 - lam H f^2 - lam^2 f^2) sigma dA`` for an
    ``L2``-normalized eigenfield ``f``.  With ``check`` the value is compared
    to ``<f, dt_dtn_normal(f, sigma)>``, which equals it after integrating by
    parts, and a :class:`ConsistencyError` is raised if they differ by more
    than ``tol * (1 + |value|)``.
    """
    fv = values_on(curve, f)
    sv = values_on(curve, sigma)
    nrm = norm(curve, fv)
    if abs(nrm - 1.0) > 1e-8:
        raise NotNormalized(f"eigenfield has L2 norm {nrm:.12g}")
    value = float(np.sum(curve.weights * hadamard_integrand(curve, fv, lam) * sv))
    if check:
        pairing = inner(curve, fv, dt_dtn_normal(curve, fv, sv, dtn, order=order, svd_tol=svd_tol))
        if abs(pairing - value) > tol * (1.0 + abs(value)):
            raise ConsistencyError(
                f"quadrature value {value:.12g} and Green pairing {pairing:.12g} disagree"
            )
    return value


def _orthonormal_rows(curve: BoundaryCurve, fields) -> np.ndarray:
    F = np.array([values_on(curve, f) for f in fields], dtype=float)
    gram = (F * curve.weights) @ F.T
    err = float(np.max(np.abs(gram - np.eye(len(F))))) if len(F) else 0.0
    if err > 1e-8:
        raise NotOrthonormal(f"Gram matrix deviates from identity by {err:.3e}")
    return F


def splitting_matrix(
    curve: BoundaryCurve,
    fields,
    sigma,
    dtn: DtnOperator | None = None,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
    symmetrize: bool = True,
) -> np.ndarray:
    """Restriction of the DtN variation to an eigenspace.

    ``M[i, j] = <f_i, dt_dtn_normal(f_j, sigma)>``; its eigenvalues are the
    first-order rates of the branches leaving a multiple eigenvalue.
    """
    F = _orthonormal_rows(curve, fields)
    dtn = _dtn_for(curve, dtn, order, svd_tol)
    cols = [dt_dtn_normal(curve, f, sigma, dtn).values for f in F]
    M = (F * curve.weights) @ np.array(cols).T
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > 1e-8 * (1.0 + float(np.max(np.abs(M)))):
        logger.warning("splitting matrix asymmetric by %.3e", asym)
    return 0.5 * (M + M.T) if symmetrize else M


def splitting_rates(curve, fields, sigma, dtn=None, **kwargs) -> np.ndarray:
    return np.linalg.eigvalsh(splitting_matrix(curve, fields, sigma, dtn, **kwargs))


# --------------------------------------------------------------------------
# finite-difference oracles


def displaced_curve(curve: BoundaryCurve, hdot, t: float) -> BoundaryCurve:
    """Curve through ``x_j + t * hdot(x_j)``.

    Node ``j`` of the result is exactly the image of node ``j`` of ``curve``,
    so nodal data carried over unchanged is the pulled-back data.
    """
    hdot = _as_hdot(curve, hdot)
    return curve_from_points(curve.nodes + t * hdot.vectors(curve), scale=curve.scale)


def fd_harmonic_extension(
    curve: BoundaryCurve,
    f,
    hdot,
    points,
    t_step: float = 1e-4,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> np.ndarray:
    """Central difference in ``t`` of ``u^{h_t}(y)`` at fixed ``y``."""
    fv = values_on(curve, f)
    vals = []
    for t in (t_step, -t_step):
        c = displaced_curve(curve, hdot, t)
        vals.append(solve_dirichlet(c, fv, order, svd_tol)(points))
    return (vals[0] - vals[1]) / (2 * t_step)


def fd_dtn_variation(
    curve: BoundaryCurve,
    f,
    hdot,
    t_step: float = 1e-4,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> np.ndarray:
    """Central difference in ``t`` of ``L_{h_t} f`` at fixed reference nodes."""
    fv = values_on(curve, f)
    vals = []
    for t in (t_step, -t_step):
        c = displaced_curve(curve, hdot, t)
        vals.append(assemble_dtn(c, order, svd_tol).matrix @ fv)
    return (vals[0] - vals[1]) / (2 * t_step)


def radial_compensation(curve: BoundaryCurve) -> np.ndarray:
    """``n . r_hat`` at each node; radial speed ``sigma / (n . r_hat)`` moves the boundary by ``sigma`` normally."""
    rhat = curve.nodes / np.hypot(curve.nodes[:, 0], curve.nodes[:, 1])[:, None]
    return np.sum(curve.normal * rhat, axis=1)


def radial_perturbation(spec: CurveSpec, sigma, t: float = 1.0, curve: BoundaryCurve | None = None) -> CurveSpec:
    """Spec of ``r + t * sigma / (n . r_hat)``.

    The compensated radial speed is expanded in a Fourier series truncated to
    the modes the node count resolves.
    """
    if curve is None:
        curve = build_curve(spec)
    sv = values_on(curve, sigma)
    speed = sv / radial_compensation(curve)
    n = curve.n_nodes
    c = np.fft.rfft(speed) / n
    kmax = n // 4
    a = 2 * c[1 : kmax + 1].real
    b = -2 * c[1 : kmax + 1].imag
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), abs(c[0].real))
    a[np.abs(a) < 1e-15 * scale] = 0.0
    b[np.abs(b) < 1e-15 * scale] = 0.0
    cos = np.zeros(max(len(spec.fourier_cos), kmax))
    sin = np.zeros(max(len(spec.fourier_sin), kmax))
    cos[: len(spec.fourier_cos)] += spec.fourier_cos
    sin[: len(spec.fourier_sin)] += spec.fourier_sin
    cos[:kmax] += t * a
    sin[:kmax] += t * b
    return CurveSpec(
        tuple(cos), tuple(sin), spec.base_radius + t * c[0].real, spec.n_nodes, spec.r_min
    )


def track_branches(
    ref: BoundaryCurve,
    vals_a: np.ndarray,
    fields_a: np.ndarray,
    vals_b: np.ndarray,
    fields_b: np.ndarray,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    min_overlap: float = 0.9,
) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Pair eigen-branches of two nearby spectra by eigenvector overlap.

    Values on each side are first grouped into sub-clusters (branches that
    are still degenerate cannot be told apart and need not be).  Groups are
    matched by the root-mean-square overlap of their spans.

    Raises
    ------
    TrackingAmbiguous
        If a matched pair has RMS overlap below ``min_overlap`` or group sizes
        differ.
    """
    ga = find_clusters(vals_a, cluster_tol)
    gb = find_clusters(vals_b, cluster_tol)
    O = np.abs((fields_a * ref.weights) @ fields_b.T)
    S = np.zeros((len(ga), len(gb)))
    for i, a in enumerate(ga):
        for j, b in enumerate(gb):
            block = O[np.ix_(a, b)]
            S[i, j] = np.sqrt(np.sum(block**2) / max(len(a), len(b)))
    if len(ga) != len(gb):
        raise TrackingAmbiguous(f"branch groups differ: {len(ga)} vs {len(gb)}")
    rows, cols = linear_sum_assignment(-S)
    pairs = []
    for i, j in zip(rows, cols):
        if S[i, j] < min_overlap or len(ga[i]) != len(gb[j]):
            raise TrackingAmbiguous(
                f"no dominant branch assignment (overlap {S[i, j]:.3f} < {min_overlap})"
            )
        pairs.append((ga[i], gb[j]))
    return pairs


def _tracked_rates(ref, spec_plus, spec_minus, idx, t, order, svd_tol, cluster_tol):
    # branches separate by about 2 t |rate|, far below the clustering
    # threshold for small steps; sub-cluster on a step-scaled tolerance
    track_tol = min(cluster_tol, 1e-3 * t)
    sp = []
    for s in (spec_plus, spec_minus):
        c = build_curve(s)
        sp.append(steklov_spectrum(assemble_dtn(c, order, svd_tol), max(idx) + 1, cluster_tol))
    idx = list(idx)
    va, fa = sp[0].eigenvalues[idx], sp[0].eigenfields[idx]
    vb, fb = sp[1].eigenvalues[idx], sp[1].eigenfields[idx]
    rates = []
    for a, b in track_branches(ref, va, fa, vb, fb, track_tol):
        r = (np.mean(va[list(a)]) - np.mean(vb[list(b)])) / (2 * t)
        rates.extend([r] * len(a))
    return np.sort(np.array(rates))


def fd_eigenvalue_derivative(
    spec: CurveSpec,
    cluster: int,
    sigma,
    t_step: float = 1e-4,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
    k_max: int | None = None,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    tolerance: float = 1e-4,
    richardson: bool = True,
    base: tuple[BoundaryCurve, DtnOperator, SteklovSpectrum] | None = None,
) -> DerivativeReport:
    """Finite-difference rates of one eigenvalue cluster against the splitting matrix.

    Spectra are recomputed on ``r +/- t sigma / (n . r_hat)`` and branches are
    tracked by eigenvector overlap, never by value order.
    """
    if base is None:
        curve = build_curve(spec)
        dtn = assemble_dtn(curve, order, svd_tol)
        if k_max is None:
            k_max = min(2 * order - 2, 12)
        spectrum = steklov_spectrum(dtn, k_max, cluster_tol)
    else:
        curve, dtn, spectrum = base
    idx = spectrum.clusters[cluster]
    if idx[-1] == len(spectrum) - 1:
        raise ValueError("cluster may be truncated; raise k_max")
    sv = values_on(curve, sigma)
    rates_formula = splitting_rates(curve, spectrum.eigenfields[list(idx)], sv, dtn)

    def rates_at(t):
        return _tracked_rates(
            curve,
            radial_perturbation(spec, sv, t, curve),
            radial_perturbation(spec, sv, -t, curve),
            idx, t, order, svd_tol, cluster_tol,
        )

    fd = rates_at(t_step)
    rich_val = rich_err = None
    if richardson:
        half = rates_at(t_step / 2)
        rich_val = (4 * half - fd) / 3
        rich_err = _rel_error(rates_formula, rich_val)
    sigma_coeffs = np.fft.rfft(sv)[: len(sv) // 2] / len(sv)
    nonzero = np.flatnonzero(np.abs(sigma_coeffs[1:]) > 1e-14 * max(1.0, np.abs(sigma_coeffs).max()))
    sigma_coeffs = sigma_coeffs[: (nonzero[-1] + 2 if nonzero.size else 1)]
    return DerivativeReport(
        formula_value=rates_formula,
        fd_value=fd,
        fd_step=t_step,
        rel_error=_rel_error(rates_formula, fd),
        richardson_value=rich_val,
        richardson_error=rich_err,
        tolerance=tolerance,
        inputs={
            "curve": spec.to_dict(),
            "cluster": int(cluster),
            "eigenvalues": [float(x) for x in spectrum.eigenvalues[list(idx)]],
            "sigma_cos": [float(2 * x.real) for x in sigma_coeffs[1:]],
            "sigma_sin": [float(-2 * x.imag) for x in sigma_coeffs[1:]],
            "sigma_const": float(sigma_coeffs[0].real),
            "t_step": t_step,
            "basis_order": order,
        },
    )
