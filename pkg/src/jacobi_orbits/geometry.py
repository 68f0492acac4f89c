"""Jacobi metric geometry: metric fields, Christoffel symbols, arc length,
and the time/velocity reconstruction that turns a geodesic path back into a
physical trajectory.

A constant-energy trajectory of the mechanical system is a geodesic of the
configuration-space metric

    g_ij(q) = 2 (E - U(q)) M_ij(q),

which degenerates on the Hill boundary E = U(q).  Inside a thin clamp band
(E - U <= eps_hill) the conformal factor is held at a small positive value
and a ``degenerate`` flag is raised instead of letting the metric vanish;
consumers that need derivatives (Christoffel symbols, relaxation steps)
refuse to operate there.

Known-geodesic test metrics (Euclidean, constant-matrix, sphere chart) live
behind the same :class:`MetricField` interface so the relaxation solver can
be validated against analytic geodesics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, TYPE_CHECKING

import numpy as np

from . import model
from .errors import DegenerateMetric, InsufficientEnergy, ZeroTangent
from .model import MechParams, State

if TYPE_CHECKING:
    from .relaxation import DiscreteString


def hill_clamp_epsilon(energy: float) -> float:
    """Width of the clamp band around the Hill boundary, scale-aware in E."""
    return 1e-9 * max(1.0, abs(energy))


@dataclass(frozen=True)
class MetricEval:
    """Metric tensor at one configuration."""

    g: np.ndarray
    g_inv: np.ndarray
    conformal_factor: float
    degenerate: bool


@dataclass(frozen=True)
class ChristoffelEval:
    """Christoffel symbols of the second kind, gamma[a, b, c] = Gamma^a_bc."""

    gamma: np.ndarray


class MetricData(NamedTuple):
    """Batched metric evaluation: g (..., 2, 2), dg (..., k, i, j) with
    dg[..., k, i, j] = d g_ij / d q_k, conformal factor and degeneracy mask."""

    g: np.ndarray
    dg: np.ndarray
    factor: np.ndarray
    degenerate: np.ndarray


def _inv_2x2_sym(g):
    a, b, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    det = a * d - b * b
    out = np.empty_like(g)
    out[..., 0, 0] = d / det
    out[..., 0, 1] = -b / det
    out[..., 1, 0] = -b / det
    out[..., 1, 1] = a / det
    return out


def christoffel_from_data(data: MetricData) -> np.ndarray:
    """Gamma^a_bc from an already-evaluated metric batch, shape (..., 2, 2, 2).

    Raises DegenerateMetric if any point lies in the Hill clamp band.
    """
    if np.any(data.degenerate):
        raise DegenerateMetric("metric degenerate at evaluation point(s)")
    g_inv = _inv_2x2_sym(data.g)
    dg = data.dg
    term = (
        np.einsum("...cib->...ibc", dg)
        + np.einsum("...bic->...ibc", dg)
        - dg
    )
    return 0.5 * np.einsum("...ai,...ibc->...abc", g_inv, term)


class MetricField:
    """A 2D Riemannian metric with analytic partial derivatives."""

    def evaluate(self, qs) -> MetricData:
        raise NotImplementedError

    def metric(self, q) -> MetricEval:
        data = self.evaluate(np.asarray(q, dtype=float))
        return MetricEval(
            g=data.g,
            g_inv=_inv_2x2_sym(data.g),
            conformal_factor=float(data.factor),
            degenerate=bool(data.degenerate),
        )

    def christoffel_many(self, qs) -> np.ndarray:
        """Gamma^a_bc at each configuration, shape (..., 2, 2, 2)."""
        return christoffel_from_data(self.evaluate(qs))

    def christoffel(self, q) -> ChristoffelEval:
        return ChristoffelEval(gamma=self.christoffel_many(np.asarray(q, dtype=float)))


class EuclideanMetric(MetricField):
    """Flat identity metric; geodesics are straight lines."""

    def evaluate(self, qs) -> MetricData:
        qs = np.asarray(qs, dtype=float)
        base = qs.shape[:-1]
        g = np.broadcast_to(np.eye(2), base + (2, 2)).copy()
        dg = np.zeros(base + (2, 2, 2))
        return MetricData(g, dg, np.ones(base), np.zeros(base, dtype=bool))


class ConstantMetric(MetricField):
    """Constant symmetric positive-definite matrix; geodesics are straight lines."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (2, 2) or not np.allclose(matrix, matrix.T):
            raise ValueError("need a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(matrix)[0] <= 0:
            raise ValueError("metric matrix must be positive definite")
        self.matrix = matrix

    def evaluate(self, qs) -> MetricData:
        qs = np.asarray(qs, dtype=float)
        base = qs.shape[:-1]
        g = np.broadcast_to(self.matrix, base + (2, 2)).copy()
        dg = np.zeros(base + (2, 2, 2))
        return MetricData(g, dg, np.ones(base), np.zeros(base, dtype=bool))


class SphereChartMetric(MetricField):
    """Round sphere in the (theta, phi) chart: g = R^2 diag(1, sin^2 theta).

    Geodesics are great circles; keep curves away from the poles where the
    chart degenerates.
    """

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = radius

    def evaluate(self, qs) -> MetricData:
        qs = np.asarray(qs, dtype=float)
        theta = qs[..., 0]
        base = qs.shape[:-1]
        r2 = self.radius**2
        g = np.zeros(base + (2, 2))
        g[..., 0, 0] = r2
        g[..., 1, 1] = r2 * np.sin(theta) ** 2
        dg = np.zeros(base + (2, 2, 2))
        dg[..., 0, 1, 1] = 2.0 * r2 * np.sin(theta) * np.cos(theta)
        return MetricData(g, dg, np.ones(base), np.zeros(base, dtype=bool))


class JacobiMetric(MetricField):
    """The energy-dependent metric 2 (E - U(q)) M(q) of the mechanical system."""

    def __init__(self, energy: float, params: MechParams):
        self.energy = float(energy)
        self.params = params
        self.eps_hill = hill_clamp_epsilon(self.energy)

    def evaluate(self, qs) -> MetricData:
        qs = np.asarray(qs, dtype=float)
        p = self.params
        margin = self.energy - model.potential(qs, p)
        degenerate = margin <= self.eps_hill
        factor = 2.0 * np.where(degenerate, self.eps_hill, margin)
        M = model.mass_matrix(qs, p)
        dM = model.mass_matrix_partials(qs, p)
        grad_u = model.gravity_vector(qs, p)
        g = factor[..., None, None] * M
        # product rule: d(f M)/dq_k = -2 dU/dq_k M + f dM/dq_k; the factor is
        # constant inside the clamp band, so its gradient is dropped there.
        dfactor = np.where(degenerate[..., None], 0.0, -2.0 * grad_u)
        dg = dfactor[..., :, None, None] * M[..., None, :, :] + factor[..., None, None, None] * dM
        return MetricData(g, dg, factor, degenerate)


def jacobi_metric(q, energy: float, params: MechParams) -> MetricEval:
    """Evaluate the Jacobi metric at one configuration."""
    return JacobiMetric(energy, params).metric(q)


def christoffel(q, energy: float, params: MechParams) -> ChristoffelEval:
    """Christoffel symbols of the Jacobi metric at one configuration."""
    return JacobiMetric(energy, params).christoffel(q)


class ArcLength(NamedTuple):
    """Riemannian length of a polyline; ``degenerate`` warns that at least
    one segment midpoint fell in the Hill clamp band."""

    length: float
    degenerate: bool


def _segments(curve: "DiscreteString"):
    """Per-segment (start, delta) arrays, including the seam of a closed curve."""
    v = curve.vertices
    if curve.closed:
        nxt = np.roll(v, -1, axis=0).copy()
        nxt[-1] = v[0] + 2.0 * np.pi * np.asarray(curve.winding_class, dtype=float)
    else:
        nxt = v[1:]
        v = v[:-1]
    return v, nxt - v


def arc_length(curve: "DiscreteString", field: MetricField) -> ArcLength:
    """Riemannian polyline length with the metric evaluated at segment midpoints."""
    start, delta = _segments(curve)
    data = field.evaluate(start + 0.5 * delta)
    seg2 = np.einsum("...i,...ij,...j->...", delta, data.g, delta)
    return ArcLength(float(np.sqrt(seg2).sum()), bool(np.any(data.degenerate)))


def _stencil_neighbors(curve: "DiscreteString"):
    """(prev, here, next) vertex arrays for the interior stencil.

    Closed curves use cyclic neighbors with the 2*pi*winding seam offset;
    open curves return the K-2 interior stencils.
    """
    v = curve.vertices
    if curve.closed:
        offset = 2.0 * np.pi * np.asarray(curve.winding_class, dtype=float)
        prev = np.roll(v, 1, axis=0).copy()
        prev[0] = v[-1] - offset
        nxt = np.roll(v, -1, axis=0).copy()
        nxt[-1] = v[0] + offset
        return prev, v, nxt
    return v[:-2], v[1:-1], v[2:]


def geodesic_residual(curve: "DiscreteString", field: MetricField) -> np.ndarray:
    """Per-vertex norms of the discrete geodesic equation gamma'' + Gamma(gamma', gamma').

    Uses the same central-difference stencils as the relaxation update, so a
    string is a fixed point of relaxation exactly where this residual vanishes.
    """
    prev, here, nxt = _stencil_neighbors(curve)
    ds = curve.spacing
    d2 = (nxt - 2.0 * here + prev) / ds**2
    d1 = (nxt - prev) / (2.0 * ds)
    gamma = field.christoffel_many(here)
    res = d2 + np.einsum("...abc,...b,...c->...a", gamma, d1, d1)
    return np.linalg.norm(res, axis=-1)


def reconstruct_velocity(q, tangent, energy: float, params: MechParams) -> State:
    """Scale a path tangent so (q, qd) has total energy ``energy``.

    qd = tangent * sqrt(2 (E - U(q)) / (tangent' M(q) tangent)); any positive
    rescaling of ``tangent`` yields the same velocity.
    """
    q = np.asarray(q, dtype=float)
    tangent = np.asarray(tangent, dtype=float)
    margin = float(energy - model.potential(q, params))
    if margin <= 0.0:
        raise InsufficientEnergy(f"E - U = {margin:.3e} <= 0 at q={q}")
    quad = float(tangent @ model.mass_matrix(q, params) @ tangent)
    if not np.isfinite(quad) or quad <= 0.0:
        raise ZeroTangent("tangent has no usable direction")
    qd = tangent * np.sqrt(2.0 * margin / quad)
    return State(q, qd)


def _vertex_tangents(curve: "DiscreteString") -> np.ndarray:
    """dq/ds at every vertex: central differences, one-sided (2nd order) at open ends."""
    v = curve.vertices
    ds = curve.spacing
    if curve.closed:
        prev, _, nxt = _stencil_neighbors(curve)
        return (nxt - prev) / (2.0 * ds)
    t = np.empty_like(v)
    t[1:-1] = (v[2:] - v[:-2]) / (2.0 * ds)
    t[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * ds)
    t[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * ds)
    return t


def reconstruct_time(curve: "DiscreteString", energy: float, params: MechParams) -> np.ndarray:
    """Cumulative physical time along a geodesic path at total energy E.

    Integrates dt/ds = sqrt(m_ij q'_i q'_j / (2 (E - U))) by the trapezoidal
    rule over the curve parameter.  Open curves return one timestamp per
    vertex (t[0] = 0); closed curves return K+1 values whose last entry is
    the full loop time (the period for a periodic orbit).

    Raises InsufficientEnergy if E <= U anywhere on the curve: brake points
    make dt/ds singular and must be excluded by the caller.
    """
    v = curve.vertices
    margin = energy - model.potential(v, params)
    if np.any(margin <= 0.0):
        k = int(np.argmin(margin))
        raise InsufficientEnergy(f"E - U = {margin[k]:.3e} <= 0 at vertex {k}")
    tang = _vertex_tangents(curve)
    quad = np.einsum("...i,...ij,...j->...", tang, model.mass_matrix(v, params), tang)
    w = np.sqrt(quad / (2.0 * margin))
    ds = curve.spacing
    if curve.closed:
        w_wrap = np.append(w, w[0])
        steps = 0.5 * (w_wrap[:-1] + w_wrap[1:]) * ds
    else:
        steps = 0.5 * (w[:-1] + w[1:]) * ds
    return np.concatenate([[0.0], np.cumsum(steps)])
