"""Star-shaped planar boundaries and calculus along them.

A boundary is sampled at ``N`` uniformly spaced parameter values
``theta_j = 2 pi j / N``.  All derivatives are Fourier-spectral in ``theta``
and all integrals use the trapezoidal rule carrying the arc-length factor, so
``sum(weights * f * g)`` is the ``L2(dA)`` inner product on the boundary.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import optimize

from .exceptions import (
    CurveMismatch,
    OddNodeCount,
    RadiusNonPositive,
    UnderResolvedCurve,
)

__all__ = [
    "CurveSpec",
    "BoundaryCurve",
    "BoundaryField",
    "build_curve",
    "curve_from_points",
    "fourier_field",
    "tangential_derivative",
    "laplace_beltrami_boundary",
    "normal_variation",
    "inner",
    "norm",
    "sup_norm",
    "spectral_derivative",
]


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    out = [float(c) for c in coeffs]
    while out and out[-1] == 0.0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class CurveSpec:
    """Fourier-radial boundary ``r(theta) = r0 + sum a_k cos k theta + b_k sin k theta``.

    ``fourier_cos[i]`` and ``fourier_sin[i]`` are the coefficients of mode
    ``i + 1``.
    """

    fourier_cos: tuple[float, ...] = ()
    fourier_sin: tuple[float, ...] = ()
    base_radius: float = 1.0
    n_nodes: int = 256
    r_min: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "fourier_cos", tuple(float(c) for c in self.fourier_cos))
        object.__setattr__(self, "fourier_sin", tuple(float(c) for c in self.fourier_sin))
        object.__setattr__(self, "base_radius", float(self.base_radius))
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        coeffs = np.array(self.fourier_cos + self.fourier_sin + (self.base_radius,))
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("curve coefficients must be finite")

    @property
    def max_mode(self) -> int:
        return max(len(_trim(self.fourier_cos)), len(_trim(self.fourier_sin)))

    def radius(self, theta, order: int = 0) -> np.ndarray:
        """``order``-th theta-derivative of the radius function."""
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.base_radius if order == 0 else 0.0)
        # d^p/dtheta^p of cos(k t) = k^p cos(k t + p pi/2)
        shift = order * np.pi / 2
        for k, a in enumerate(self.fourier_cos, start=1):
            if a:
                r = r + a * k**order * np.cos(k * theta + shift)
        for k, b in enumerate(self.fourier_sin, start=1):
            if b:
                r = r + b * k**order * np.sin(k * theta + shift)
        return r

    def with_nodes(self, n_nodes: int) -> "CurveSpec":
        return CurveSpec(self.fourier_cos, self.fourier_sin, self.base_radius, n_nodes, self.r_min)

    def scaled(self, s: float) -> "CurveSpec":
        return CurveSpec(
            tuple(s * a for a in self.fourier_cos),
            tuple(s * b for b in self.fourier_sin),
            s * self.base_radius,
            self.n_nodes,
            s * self.r_min,
        )

    def to_dict(self) -> dict:
        return {
            "base_radius": self.base_radius,
            "cos": list(self.fourier_cos),
            "sin": list(self.fourier_sin),
            "n_nodes": self.n_nodes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "CurveSpec":
        kwargs = dict(
            fourier_cos=d.get("cos", ()),
            fourier_sin=d.get("sin", ()),
            base_radius=d.get("base_radius", 1.0),
            n_nodes=d.get("n_nodes", 256),
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "CurveSpec":
        return cls.from_dict(json.loads(text))

    def key(self) -> str:
        payload = json.dumps(
            [_trim(self.fourier_cos), _trim(self.fourier_sin), self.base_radius, self.n_nodes]
        )
        return "spec-" + hashlib.sha1(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Discretized closed curve.

    Attributes
    ----------
    nodes : ndarray (N, 2)
    tangent, normal : ndarray (N, 2)
        Unit tangent (counter-clockwise) and outward unit normal.
    curvature : ndarray (N,)
        Signed curvature ``H = div n``; equals 1 on the unit circle.
    speed : ndarray (N,)
        ``|d gamma / d theta|``.
    weights : ndarray (N,)
        Trapezoidal arc-length weights; they sum to the boundary length.
    """

    nodes: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    speed: np.ndarray
    weights: np.ndarray
    curve_id: str
    spec: CurveSpec | None = None
    scale: float = 1.0

    def __post_init__(self):
        for name in ("nodes", "tangent", "normal", "curvature", "speed", "weights"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_nodes) / self.n_nodes

    @property
    def length(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def d_theta(self) -> np.ndarray:
        """Dense Fourier differentiation matrix in ``theta`` (even ``N``)."""
        return fourier_diff_matrix(self.n_nodes)

    def field(self, values) -> "BoundaryField":
        return BoundaryField(np.asarray(values, dtype=float), self.curve_id)

    def __repr__(self):
        return f"BoundaryCurve(id={self.curve_id!r}, N={self.n_nodes}, length={self.length:.6g})"


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Real values sampled at the nodes of one curve."""

    values: np.ndarray
    curve_id: str

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("boundary field must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary field has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.shape[0]


def fourier_diff_matrix(n: int) -> np.ndarray:
    if n % 2:
        raise OddNodeCount(f"n_nodes must be even, got {n}")
    h = 2 * np.pi / n
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2)
    D[diff == 0] = 0.0
    return D


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """theta-derivative of periodic samples; the Nyquist mode is dropped."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    k = np.arange(n // 2 + 1, dtype=float)
    if n % 2 == 0:
        k[-1] = 0.0
    return np.fft.irfft((1j * k) ** order * np.fft.rfft(values, axis=-1), n=n, axis=-1)


def _check_nodes(n: int):
    if n % 2:
        raise OddNodeCount(f"n_nodes must be even, got {n}")
    if n < 4:
        raise ValueError(f"n_nodes must be at least 4, got {n}")


def build_curve(spec: CurveSpec) -> BoundaryCurve:
    """Sample a Fourier-radial curve with closed-form normals and curvature."""
    n = spec.n_nodes
    _check_nodes(n)
    if n < 4 * spec.max_mode:
        raise UnderResolvedCurve(
            f"n_nodes={n} does not resolve mode {spec.max_mode} (need >= {4 * spec.max_mode})"
        )
    theta = 2 * np.pi * np.arange(n) / n
    r = spec.radius(theta)
    if np.min(r) < spec.r_min:
        j = int(np.argmin(r))
        raise RadiusNonPositive(
            f"radius {r[j]:.4g} at theta={theta[j]:.4g} is below r_min={spec.r_min}"
        )
    dr = spec.radius(theta, 1)
    ddr = spec.radius(theta, 2)
    c, s = np.cos(theta), np.sin(theta)
    nodes = np.column_stack([r * c, r * s])
    dgamma = np.column_stack([dr * c - r * s, dr * s + r * c])
    speed = np.hypot(r, dr)
    tangent = dgamma / speed[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    curvature = (r**2 + 2 * dr**2 - r * ddr) / speed**3
    weights = (2 * np.pi / n) * speed
    return BoundaryCurve(
        nodes, tangent, normal, curvature, speed, weights, spec.key(), spec, spec.base_radius
    )


def curve_from_points(points, scale: float | None = None, curve_id: str | None = None) -> BoundaryCurve:
    """Curve through periodic samples ``points[j] = gamma(2 pi j / N)``.

    Geometry is recovered by spectral differentiation, so ``points`` must be a
    smooth counter-clockwise parameterization enclosing the origin.
    """
    pts = np.array(points, dtype=float)
    n = pts.shape[0]
    _check_nodes(n)
    d1 = spectral_derivative(pts.T, 1).T
    d2 = spectral_derivative(pts.T, 2).T
    speed = np.hypot(d1[:, 0], d1[:, 1])
    tangent = d1 / speed[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    weights = (2 * np.pi / n) * speed
    if curve_id is None:
        curve_id = "pts-" + hashlib.sha1(pts.tobytes()).hexdigest()[:16]
    if scale is None:
        scale = float(np.mean(np.hypot(pts[:, 0], pts[:, 1])))
    return BoundaryCurve(pts, tangent, normal, curvature, speed, weights, curve_id, None, scale)


def values_on(curve: BoundaryCurve, f) -> np.ndarray:
    """Nodal values of ``f`` after checking it lives on ``curve``.

    Plain arrays are accepted and taken to be sampled on ``curve``.
    """
    if isinstance(f, BoundaryField):
        if f.curve_id != curve.curve_id:
            raise CurveMismatch(f"field on {f.curve_id!r}, curve is {curve.curve_id!r}")
        return f.values
    vals = np.asarray(f, dtype=float)
    if vals.shape != (curve.n_nodes,):
        raise CurveMismatch(f"field has shape {vals.shape}, curve has {curve.n_nodes} nodes")
    return vals


def fourier_field(curve: BoundaryCurve, const: float = 0.0, cos=(), sin=()) -> BoundaryField:
    """Field ``const + sum cos[i] cos((i+1) theta) + sin[i] sin((i+1) theta)``."""
    theta = curve.theta
    vals = np.full(curve.n_nodes, float(const))
    for k, a in enumerate(cos, start=1):
        vals += a * np.cos(k * theta)
    for k, b in enumerate(sin, start=1):
        vals += b * np.sin(k * theta)
    return curve.field(vals)


def inner(curve: BoundaryCurve, f, g) -> float:
    return float(np.sum(curve.weights * values_on(curve, f) * values_on(curve, g)))


def norm(curve: BoundaryCurve, f) -> float:
    return float(np.sqrt(inner(curve, f, f)))


def tangential_derivative(curve: BoundaryCurve, f) -> BoundaryField:
    """Arc-length derivative ``df/ds``."""
    vals = values_on(curve, f)
    return curve.field(spectral_derivative(vals) / curve.speed)


def laplace_beltrami_boundary(curve: BoundaryCurve, f) -> BoundaryField:
    """``d^2 f / ds^2`` written in divergence form."""
    vals = values_on(curve, f)
    inner_ = spectral_derivative(vals) / curve.speed
    return curve.field(spectral_derivative(inner_) / curve.speed)


def normal_variation(curve: BoundaryCurve, sigma) -> tuple[BoundaryField, BoundaryField]:
    """Rate of change of the outward normal at a fixed point in space.

    For a normal displacement ``sigma * n`` the normal turns by
    ``-(d sigma / ds) * tangent``; the (x, y) components are returned.
    """
    ds = tangential_derivative(curve, sigma).values
    vec = -ds[:, None] * curve.tangent
    return curve.field(vec[:, 0]), curve.field(vec[:, 1])


def trig_interpolant(values: np.ndarray):
    """Callable evaluating the trigonometric interpolant of periodic samples."""
    vals = np.asarray(values, dtype=float)
    n = vals.shape[0]
    c = np.fft.rfft(vals) / n
    k = np.arange(c.shape[0])
    amp = 2 * c
    amp[0] = c[0]
    if n % 2 == 0:
        amp[-1] = c[-1]

    def evaluate(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.real(np.exp(1j * np.outer(theta, k)) @ amp)

    return evaluate


def sup_norm(curve: BoundaryCurve, f, oversample: int = 8) -> float:
    """Max of ``|f|`` over the continuous boundary, via its trig interpolant.

    The interpolant is scanned on an oversampled grid and the best candidate
    peaks are refined with a bounded scalar search.
    """
    vals = values_on(curve, f)
    n = vals.shape[0]
    if not np.any(vals):
        return 0.0
    m = oversample * n
    fine = np.fft.irfft(np.fft.rfft(vals), n=m) * (m / n)
    g = trig_interpolant(vals)
    h = 2 * np.pi / m
    best = float(np.max(np.abs(fine)))
    for idx in np.argsort(-np.abs(fine))[:4]:
        t0 = idx * h
        res = optimize.minimize_scalar(
            lambda t: -abs(g(t)[0]), bounds=(t0 - h, t0 + h), method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best
