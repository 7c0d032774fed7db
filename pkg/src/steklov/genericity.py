"""Critical-pair functionals, unique-continuation surrogate and splitting experiments."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from .dtn import DEFAULT_CLUSTER_TOL, DtnOperator, SteklovSpectrum, assemble_dtn, steklov_spectrum
from .exceptions import InvalidCurveError, InvalidPerturbedCurve, NotOrthogonal, SimpleCluster
from .geometry import (
    BoundaryCurve,
    BoundaryField,
    CurveSpec,
    build_curve,
    inner,
    norm,
    sup_norm,
    tangential_derivative,
    values_on,
)
from .harmonic import DEFAULT_SVD_TOL, solve_dirichlet
from .perturbation import _tracked_rates, radial_perturbation, splitting_rates

logger = logging.getLogger(__name__)

__all__ = [
    "CriticalScanResult",
    "UniqueContinuationReport",
    "SplitTrial",
    "SplitSummary",
    "q_functional",
    "psi_functional",
    "criticality_scan",
    "unique_continuation_check",
    "random_split_experiment",
]

NO_CRITICAL = "no-critical-pair-detected"
NEAR_CRITICAL = "near-critical"


def _check_pair(curve, f, psi, tol=1e-8):
    fv = values_on(curve, f)
    pv = values_on(curve, psi)
    scale = max(norm(curve, fv) * norm(curve, pv), np.finfo(float).tiny)
    overlap = inner(curve, fv, pv) / scale
    if abs(overlap) > tol or not np.any(fv) or not np.any(pv):
        raise NotOrthogonal(f"normalized overlap {overlap:.3e} exceeds {tol:g}")
    return fv, pv


def q_functional(curve: BoundaryCurve, f, psi, lam: float) -> BoundaryField:
    """``f_s psi_s - (H + lam) lam f psi`` at the nodes.

    Vanishing identically for some orthogonal pair in an eigenspace is a
    necessary condition for the evaluation map to be critical there.
    """
    fv, pv = _check_pair(curve, f, psi)
    f_s = tangential_derivative(curve, fv).values
    p_s = tangential_derivative(curve, pv).values
    return curve.field(f_s * p_s - (curve.curvature + lam) * lam * fv * pv)


def psi_functional(
    curve: BoundaryCurve,
    f,
    psi,
    lam: float,
    dtn: DtnOperator | None = None,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
) -> BoundaryField:
    """``grad u . grad w - (H + 2 lam) lam u w`` on the boundary.

    ``u`` and ``w`` are the harmonic extensions of ``f`` and ``psi``; full
    gradients are used, so for eigenfields this agrees with
    :func:`q_functional` only up to discretization error.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    fv, pv = _check_pair(curve, f, psi)
    fit = dtn.fit if dtn is not None else None
    u = solve_dirichlet(curve, fv, order, svd_tol, fit=fit)
    w = solve_dirichlet(curve, pv, order, svd_tol, fit=fit)
    x = curve.nodes
    grad_dot = np.sum(u.gradient(x) * w.gradient(x), axis=1)
    return curve.field(grad_dot - (curve.curvature + 2 * lam) * lam * u(x) * w(x))


@dataclass
class CriticalScanResult:
    cluster: int
    n_grid: int
    min_q_norm: float
    argmin_pair: tuple[list[float], list[float]]
    verdict: str
    eps_crit: float
    eigenvalue: float
    multiplicity: int
    q_norms: list[float] = field(default_factory=list, repr=False)

    @property
    def message(self) -> str:
        if self.verdict == NO_CRITICAL:
            return f"no critical pair detected at resolution n_grid={self.n_grid}"
        return (
            f"min ||Q|| = {self.min_q_norm:.3e} below eps_crit={self.eps_crit:g} "
            f"at resolution n_grid={self.n_grid}; criticality is not certified"
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["argmin_pair"] = [list(map(float, v)) for v in self.argmin_pair]
        out["message"] = self.message
        return out


def stiefel_pairs(dim: int, n: int) -> np.ndarray:
    """``n`` orthonormal column pairs in ``R^dim`` from a Halton sequence.

    Returns an array of shape ``(n, dim, 2)``.
    """
    halton = qmc.Halton(d=2 * dim, scramble=False)
    pts = halton.random(n + 1)[1:]
    gauss = normal_dist.ppf(pts).reshape(n, dim, 2)
    out = np.empty_like(gauss)
    for i, g in enumerate(gauss):
        q, r = np.linalg.qr(g)
        out[i] = q * np.sign(np.diag(r))
    return out


def criticality_scan(
    curve: BoundaryCurve,
    spectrum: SteklovSpectrum,
    cluster: int,
    n_grid: int = 64,
    eps_crit: float = 1e-6,
) -> CriticalScanResult:
    """Minimum of ``||Q||_inf`` over orthonormal pairs drawn from one eigenspace.

    The scan can rule out critical pairs only at the sampled resolution; it
    never certifies that one exists.
    """
    members = list(spectrum.clusters[cluster])
    d = len(members)
    if d < 2:
        raise SimpleCluster(f"cluster {cluster} is simple")
    F = spectrum.eigenfields[members]
    lam = float(np.mean(spectrum.eigenvalues[members]))
    pairs = stiefel_pairs(d, n_grid)
    norms = []
    for frame in pairs:
        f = frame[:, 0] @ F
        psi = frame[:, 1] @ F
        norms.append(sup_norm(curve, q_functional(curve, f, psi, lam)))
    best = int(np.argmin(norms))
    min_q = float(norms[best])
    verdict = NEAR_CRITICAL if min_q < eps_crit else NO_CRITICAL
    return CriticalScanResult(
        cluster, n_grid, min_q,
        (pairs[best][:, 0].tolist(), pairs[best][:, 1].tolist()),
        verdict, eps_crit, lam, d, [float(x) for x in norms],
    )


@dataclass
class UniqueContinuationReport:
    min_window_max: float
    passed: bool
    tol: float
    arc_length_fraction: float
    window_nodes: int
    worst_start: int

    def to_dict(self) -> dict:
        return asdict(self)


def unique_continuation_check(
    curve: BoundaryCurve, f, arc_length_fraction: float = 1 / 16, tol: float = 1e-3
) -> UniqueContinuationReport:
    """Slide an arc window around the boundary and find where ``f`` is smallest.

    ``f`` is rescaled to unit sup-norm; the check passes when every window
    of the given fraction of the boundary length contains a value above
    ``tol`` in magnitude.
    """
    fv = np.abs(values_on(curve, f))
    peak = fv.max()
    if peak > 0:
        fv = fv / peak
    w = curve.weights
    s = np.concatenate([[0.0], np.cumsum(0.5 * (w[:-1] + w[1:]))])
    L = curve.length
    width = arc_length_fraction * L
    offsets = (s[None, :] - s[:, None]) % L
    mask = offsets <= width * (1 + 1e-12)
    window_max = np.where(mask, fv[None, :], -np.inf).max(axis=1)
    worst = int(np.argmin(window_max))
    mwm = float(window_max[worst])
    return UniqueContinuationReport(
        mwm, bool(mwm > tol), tol, arc_length_fraction, int(mask[worst].sum()), worst
    )


@dataclass
class SplitTrial:
    index: int
    seed: int
    sigma_cos: list[float]
    sigma_sin: list[float]
    amplitude: float
    status: str = "ok"
    cluster_gaps: list[float] = field(default_factory=list)
    min_gap: float | None = None
    passed: bool = False
    predicted_rates: list[list[float]] = field(default_factory=list)
    fd_rates: list[list[float]] = field(default_factory=list)
    rates_ok: bool | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SplitSummary:
    n_trials: int
    n_valid: int
    n_skipped: int
    n_passed: int
    fraction_passed: float
    all_rates_ok: bool
    gap_min: float
    multiple_clusters: list[list[int]]
    flagged: list[int]

    def to_dict(self) -> dict:
        return asdict(self)


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("STEKLOV_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        logger.warning("ignoring STEKLOV_THREADS=%r", env)
        return 1


def random_split_experiment(
    spec: CurveSpec,
    n_trials: int = 20,
    amplitude: float = 0.05,
    max_mode: int = 6,
    seed: int = 42,
    t_step: float = 1e-4,
    order: int = 24,
    svd_tol: float = DEFAULT_SVD_TOL,
    n_eigs: int = 7,
    gap_min: float | None = None,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    check_rates: bool = True,
    threads: int | None = None,
) -> tuple[list[SplitTrial], SplitSummary]:
    """Randomly perturb a curve and record whether its multiple eigenvalues split.

    Each trial draws normal-velocity coefficients on modes ``1..max_mode``
    uniformly from ``[-amplitude, amplitude]`` using its own child stream of
    ``seed``.  The perturbed curve is the base radius plus the compensated
    radial speed.  A trial passes when every multiple cluster of the base
    curve among the first ``n_eigs`` non-zero eigenvalues has split by more
    than ``gap_min`` (default ``1e-4 * amplitude``) and by more than the
    clustering threshold.  With ``check_rates`` the
    tracked finite-difference rates along the same velocity are compared to
    the splitting-matrix eigenvalues, to within ``max(1e-3, 1e-2 |rate|)``.

    Invalid perturbed curves are logged and skipped.
    """
    if gap_min is None:
        gap_min = 1e-4 * amplitude
    base = build_curve(spec)
    dtn = assemble_dtn(base, order, svd_tol)
    k_max = n_eigs + 2
    spectrum = steklov_spectrum(dtn, k_max, cluster_tol)
    window = set(range(1, n_eigs + 1))
    multiples = [c for c in spectrum.clusters if len(c) > 1 and set(c) <= window]
    theta = base.theta
    modes = np.arange(1, max_mode + 1)

    children = np.random.SeedSequence(seed).spawn(n_trials)
    draws = []
    for child in children:
        rng = np.random.default_rng(child)
        a = rng.uniform(-1.0, 1.0, max_mode) * amplitude
        b = rng.uniform(-1.0, 1.0, max_mode) * amplitude
        draws.append((a, b))

    def run(i):
        a, b = draws[i]
        trial = SplitTrial(i, seed, a.tolist(), b.tolist(), amplitude)
        sigma = np.cos(np.outer(theta, modes)) @ a + np.sin(np.outer(theta, modes)) @ b
        try:
            try:
                pspec = radial_perturbation(spec, sigma, 1.0, base)
                pcurve = build_curve(pspec)
            except InvalidCurveError as exc:
                raise InvalidPerturbedCurve(str(exc)) from exc
            pspec_ = steklov_spectrum(assemble_dtn(pcurve, order, svd_tol), k_max, cluster_tol)
        except InvalidPerturbedCurve as exc:
            logger.warning("trial %d skipped: %s", i, exc)
            trial.status = "skipped"
            trial.message = str(exc)
            return trial
        lam = pspec_.eigenvalues
        trial.cluster_gaps = [float(np.min(np.diff(lam[list(c)]))) for c in multiples]
        trial.min_gap = float(np.min(np.diff(lam[1 : n_eigs + 1])))
        # a split smaller than the clustering threshold is not a split
        floors = [max(gap_min, cluster_tol * (1 + lam[c[-1]])) for c in multiples]
        trial.passed = all(g > fl for g, fl in zip(trial.cluster_gaps, floors))
        if check_rates:
            ok = True
            for c in multiples:
                pred = splitting_rates(base, spectrum.eigenfields[list(c)], sigma, dtn)
                fd = _tracked_rates(
                    base,
                    radial_perturbation(spec, sigma, t_step, base),
                    radial_perturbation(spec, sigma, -t_step, base),
                    c, t_step, order, svd_tol, cluster_tol,
                )
                trial.predicted_rates.append(pred.tolist())
                trial.fd_rates.append(fd.tolist())
                ok &= bool(np.all(np.abs(pred - fd) <= np.maximum(1e-3, 1e-2 * np.abs(pred))))
            trial.rates_ok = ok
        return trial

    workers = _thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run, range(n_trials)))
    else:
        trials = [run(i) for i in range(n_trials)]

    valid = [t for t in trials if t.status == "ok"]
    n_passed = sum(t.passed for t in valid)
    flagged = [t.index for t in valid if not t.passed or t.rates_ok is False]
    for i in flagged:
        logger.warning("trial %d flagged for inspection", i)
    summary = SplitSummary(
        n_trials=n_trials,
        n_valid=len(valid),
        n_skipped=n_trials - len(valid),
        n_passed=int(n_passed),
        fraction_passed=n_passed / len(valid) if valid else 0.0,
        all_rates_ok=all(t.rates_ok is not False for t in valid),
        gap_min=gap_min,
        multiple_clusters=[list(c) for c in multiples],
        flagged=flagged,
    )
    return trials, summary
