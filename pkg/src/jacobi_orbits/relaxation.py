"""Discrete string relaxation: evolve a polyline of configurations under the
geodesic heat flow

    d gamma / dt = gamma'' + Gamma(gamma', gamma')

until its discrete geodesic residual vanishes.  Open strings keep both
endpoints pinned (Dirichlet); closed strings have no boundary and carry a
winding class instead: the stored vertices are unwrapped angles and the seam
from the last vertex back to the first adds exactly 2*pi*(alpha1, alpha2),
so the finite-difference stencils never see a mod-2*pi jump.

Two steppers are provided: a plain explicit Euler step (subject to a CFL-type
bound) and the default semi-implicit step, which treats the second-difference
term with a tridiagonal solve (cyclic for closed strings) and evaluates the
Christoffel term at the current iterate, making the linear part
unconditionally stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    CollapseDetected,
    NonIntegerWinding,
    NotClosed,
    NullClassWithoutSeed,
    SolveFailure,
    StabilityViolation,
    TooFewVertices,
)
from .geometry import MetricField, christoffel_from_data

MIN_VERTICES = 8
SEGMENT_RATIO_LIMIT = 10.0
COLLAPSE_LENGTH_PER_VERTEX = 1e-6


@dataclass(frozen=True)
class DiscreteString:
    """Ordered vertex list on the configuration torus.

    ``vertices`` are unwrapped angles, shape (K, 2).  For a closed string the
    polyline wraps from the last vertex to ``vertices[0] + 2*pi*winding_class``;
    ``winding_class`` is meaningless for open strings.  ``spacing`` is the
    curve-parameter step between consecutive vertices (defaults to 1/(K-1)
    open, 1/K closed).
    """

    vertices: np.ndarray
    closed: bool = False
    winding_class: tuple[int, int] = (0, 0)
    spacing: float | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError(f"vertices must have shape (K, 2), got {v.shape}")
        if v.shape[0] < MIN_VERTICES:
            raise TooFewVertices(f"need >= {MIN_VERTICES} vertices, got {v.shape[0]}")
        if not np.isfinite(v).all():
            raise ValueError("vertices must be finite")
        wc = (int(self.winding_class[0]), int(self.winding_class[1]))
        seg = _segment_lengths(v, self.closed, wc)
        mean = seg.mean()
        if mean > 0.0 and seg.max() > SEGMENT_RATIO_LIMIT * mean:
            raise ValueError(
                f"segment length {seg.max():.3g} exceeds {SEGMENT_RATIO_LIMIT}x the mean {mean:.3g}"
            )
        ds = self.spacing
        if ds is None:
            ds = 1.0 / v.shape[0] if self.closed else 1.0 / (v.shape[0] - 1)
        if not ds > 0.0:
            raise ValueError(f"spacing must be positive, got {ds}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "winding_class", wc)
        object.__setattr__(self, "spacing", float(ds))

    @property
    def count(self) -> int:
        return self.vertices.shape[0]

    def seam_offset(self) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(self.winding_class, dtype=float)


@dataclass
class RelaxOptions:
    """Knobs for :func:`relax`.  ``step`` of None picks the scheme default:
    100 * ds^2 for the semi-implicit scheme, half the stability bound for the
    explicit one.

    ``remove_drift`` (closed strings only) subtracts the mean tangential
    component from each update.  Uniform tangential motion of a closed string
    is pure reparametrization (a zero mode): truncation error feeds it a tiny
    constant creep that never decays and would stall the velocity criterion
    forever.  Only the mean is removed, so the flow's own spacing control
    stays active.
    """

    scheme: str = "implicit"
    step: float | None = None
    max_iter: int = 100_000
    residual_tol: float = 1e-6
    velocity_tol: float = 1e-10
    redistribute_every: int = 100
    remove_drift: bool = True


@dataclass
class RelaxReport:
    """Convergence diagnostics for one relaxation run."""

    iterations: int
    final_length: float
    length_history: np.ndarray
    convergence_velocity: np.ndarray
    final_residual: float
    converged: bool


@dataclass(frozen=True)
class LoopSeed:
    """Perturbation for a closed-string initializer: a constant ``center``
    offset plus a circle of ``radius`` traversed once per loop.  Both keep the
    closure offset exact."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    phase: float = 0.0


class WindingNumber(NamedTuple):
    alpha: tuple[int, int]
    raw: np.ndarray


def _segment_lengths(v, closed, winding_class):
    if closed:
        nxt = np.roll(v, -1, axis=0).copy()
        nxt[-1] = v[0] + 2.0 * np.pi * np.asarray(winding_class, dtype=float)
        return np.linalg.norm(nxt - v, axis=1)
    return np.linalg.norm(np.diff(v, axis=0), axis=1)


def init_open_string(qa, qb, count: int) -> DiscreteString:
    """Straight-line open string from qa to qb with ``count`` vertices."""
    if count < MIN_VERTICES:
        raise TooFewVertices(f"need >= {MIN_VERTICES} vertices, got {count}")
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    u = np.linspace(0.0, 1.0, count)[:, None]
    return DiscreteString(vertices=(1.0 - u) * qa + u * qb, closed=False)


def init_closed_string(winding_class, count: int, seed=None) -> DiscreteString:
    """Closed string in a given winding class.

    With no seed the vertices trace the straight wind q(u) = 2*pi*u*(a1, a2),
    u in [0, 1).  ``seed`` may be a :class:`LoopSeed` perturbation or an
    explicit (count, 2) vertex array.  A (0, 0) loop is contractible and
    therefore requires a seed.
    """
    if count < MIN_VERTICES:
        raise TooFewVertices(f"need >= {MIN_VERTICES} vertices, got {count}")
    wc = (int(winding_class[0]), int(winding_class[1]))
    if isinstance(seed, np.ndarray):
        return DiscreteString(vertices=seed, closed=True, winding_class=wc)
    if wc == (0, 0) and (seed is None or seed.radius == 0.0):
        raise NullClassWithoutSeed("a (0,0) loop may shrink to a point; provide a seed loop")
    u = np.arange(count)[:, None] / count
    v = 2.0 * np.pi * u * np.asarray(wc, dtype=float)
    if seed is not None:
        ang = 2.0 * np.pi * u[:, 0] + seed.phase
        v = v + np.asarray(seed.center, dtype=float)
        v = v + seed.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return DiscreteString(vertices=v, closed=True, winding_class=wc)


def _neighbors(v, closed, offset):
    if closed:
        prev = np.roll(v, 1, axis=0).copy()
        prev[0] = v[-1] - offset
        nxt = np.roll(v, -1, axis=0).copy()
        nxt[-1] = v[0] + offset
        return prev, nxt
    return v[:-2], v[2:]


def _stability_bound(data, ds):
    """0.45 * ds^2 * (min eigenvalue of g over the string) / (max eigenvalue)."""
    a = data.g[..., 0, 0]
    b = data.g[..., 0, 1]
    d = data.g[..., 1, 1]
    mid = 0.5 * (a + d)
    rad = np.sqrt(0.25 * (a - d) ** 2 + b**2)
    lo = float((mid - rad).min())
    hi = float((mid + rad).max())
    return 0.45 * ds**2 * lo / hi


def _pde_terms(v, closed, offset, ds, gamma_all):
    """Second difference plus Christoffel transport at each free vertex."""
    prev, nxt = _neighbors(v, closed, offset)
    here = v if closed else v[1:-1]
    gamma = gamma_all if closed else gamma_all[1:-1]
    d2 = (nxt - 2.0 * here + prev) / ds**2
    d1 = (nxt - prev) / (2.0 * ds)
    return d2 + np.einsum("kabc,kb,kc->ka", gamma, d1, d1)


def _explicit_step_array(v, field: MetricField, closed, offset, ds, dt):
    data = field.evaluate(v)
    bound = _stability_bound(data, ds)
    if dt is None:
        dt = 0.5 * bound
    elif dt > bound:
        raise StabilityViolation(f"step {dt:.3e} exceeds stability bound {bound:.3e}")
    gamma = christoffel_from_data(data)
    rhs = _pde_terms(v, closed, offset, ds, gamma)
    out = v.copy()
    if closed:
        out += dt * rhs
    else:
        out[1:-1] += dt * rhs
    return out


def _banded_system(n, r, rho, B):
    """Band storage (l=u=3) for the linearized step operator.

    Unknowns interleave vertex components, (k, a) -> 2k + a.  Row blocks:
    (1+2r) I on the diagonal, -r I - rho B_k toward neighbor k+1 and
    -r I + rho B_k toward k-1, where B_k[a, c] = Gamma^a_bc(gamma_k) d1_k^b
    carries the transport term.
    """
    N = 2 * n
    ab = np.zeros((7, N))
    ab[3, :] = 1.0 + 2.0 * r
    for a in range(2):
        for c in range(2):
            delta = r if a == c else 0.0
            upper = -delta - rho * B[: n - 1, a, c]
            ab[1 + a - c, (2 + c)::2][: n - 1] = upper
            lower = -delta + rho * B[1:, a, c]
            ab[5 + a - c, c::2][: n - 1] = lower
    return ab


def _banded_solve(ab, b):
    try:
        return scipy.linalg.solve_banded((3, 3), ab, b)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - indicates a bug
        raise SolveFailure(str(exc)) from exc


def _solve_cyclic_block(n, r, rho, B, b):
    """Cyclic block-tridiagonal solve via the Woodbury identity: the two
    corner blocks are a rank-4 correction to the banded operator."""
    N = 2 * n
    ab = _banded_system(n, r, rho, B)
    eye = np.eye(2)
    corner_lo = -r * eye + rho * B[0]      # row block 0 <- column block n-1
    corner_up = -r * eye - rho * B[-1]     # row block n-1 <- column block 0
    rhs = np.zeros((N, 5))
    rhs[:, 0] = b.reshape(-1)
    rhs[0, 1] = rhs[1, 2] = 1.0            # E0 columns
    rhs[N - 2, 3] = rhs[N - 1, 4] = 1.0    # E_last columns
    sol = _banded_solve(ab, rhs)
    y, Z = sol[:, 0], sol[:, 1:]
    W = np.zeros((4, 4))
    W[:2, 2:] = corner_lo
    W[2:, :2] = corner_up
    VtZ = np.vstack([Z[:2, :], Z[N - 2:, :]])
    Vty = np.concatenate([y[:2], y[N - 2:]])
    core = np.linalg.inv(W) + VtZ
    try:
        coeff = np.linalg.solve(core, Vty)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - indicates a bug
        raise SolveFailure(str(exc)) from exc
    return (y - Z @ coeff).reshape(n, 2)


def _implicit_step_array(v, field: MetricField, closed, offset, ds, dt):
    """Semi-implicit step: second differences and (half of) the quadratic
    Christoffel transport are folded into one linear solve with Gamma frozen
    at the current iterate, so large dt stays stable."""
    if dt is None:
        dt = 100.0 * ds**2
    data = field.evaluate(v)
    gamma = christoffel_from_data(data)
    prev, nxt = _neighbors(v, closed, offset)
    here = v if closed else v[1:-1]
    g_here = gamma if closed else gamma[1:-1]
    d1 = (nxt - prev) / (2.0 * ds)
    B = np.einsum("kabc,kb->kac", g_here, d1)
    r = dt / ds**2
    rho = dt / (2.0 * ds)
    n = here.shape[0]
    eye = np.eye(2)
    b = here.copy()
    if closed:
        b[0] += (rho * B[0] - r * eye) @ offset
        b[-1] += (r * eye + rho * B[-1]) @ offset
        return _solve_cyclic_block(n, r, rho, B, b)
    b[0] += (r * eye - rho * B[0]) @ v[0]
    b[-1] += (r * eye + rho * B[-1]) @ v[-1]
    x = _banded_solve(_banded_system(n, r, rho, B), b.reshape(-1)).reshape(n, 2)
    out = v.copy()
    out[1:-1] = x
    return out


def relax_step_explicit(s: DiscreteString, field: MetricField, dt: float | None = None) -> DiscreteString:
    """One explicit Euler step of the geodesic flow on all free vertices.

    ``dt`` defaults to half the stability bound, which is recomputed from the
    current metric eigenvalue spread; an explicit ``dt`` above the bound
    raises StabilityViolation.
    """
    v = _explicit_step_array(s.vertices, field, s.closed, s.seam_offset(), s.spacing, dt)
    return replace(s, vertices=v)


def relax_step_implicit(s: DiscreteString, field: MetricField, dt: float | None = None) -> DiscreteString:
    """One semi-implicit step: tridiagonal solve for the second-difference
    term, Christoffel transport frozen at the current iterate."""
    v = _implicit_step_array(s.vertices, field, s.closed, s.seam_offset(), s.spacing, dt)
    return replace(s, vertices=v)


def _riemann_cumlen(v, closed, offset, field: MetricField):
    """Cumulative Riemannian length over the polyline (midpoint rule)."""
    if closed:
        nxt = np.roll(v, -1, axis=0).copy()
        nxt[-1] = v[0] + offset
    else:
        nxt = v[1:]
        v = v[:-1]
    delta = nxt - v
    data = field.evaluate(v + 0.5 * delta)
    seg = np.sqrt(np.einsum("ki,kij,kj->k", delta, data.g, delta))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _redistribute(v, closed, offset, field: MetricField):
    """Slide vertices along the polyline to near-uniform Riemannian spacing.

    Vertex 0 (and the last vertex of an open string) stay put.  Returns the
    input unchanged when the spacing is already nearly uniform, so a settled
    string is not disturbed.
    """
    cum = _riemann_cumlen(v, closed, offset, field)
    seg = np.diff(cum)
    total = cum[-1]
    if total <= 0.0 or np.any(seg <= 0.0):
        return v
    if seg.max() <= 1.2 * seg.mean() and seg.max() <= 1.5 * seg.min():
        return v
    return _interp_uniform(v, closed, offset, cum, v.shape[0])


def _interp_uniform(v, closed, offset, cum, count):
    """Linear interpolation along the polyline at ``count`` positions uniform
    in the cumulative coordinate ``cum``."""
    pts = np.vstack([v, v[0] + offset]) if closed else v
    total = cum[-1]
    targets = total * np.arange(count) / count if closed else total * np.arange(count) / (count - 1)
    out = np.empty((count, 2))
    for c in range(2):
        out[:, c] = np.interp(targets, cum, pts[:, c])
    if not closed:
        out[0] = v[0]
        out[-1] = v[-1]
    return out


def resample(s: DiscreteString, count: int, field: MetricField) -> DiscreteString:
    """New string with ``count`` vertices spaced uniformly in Riemannian
    length along the existing polyline; topology and winding preserved."""
    cum = _riemann_cumlen(s.vertices, s.closed, s.seam_offset(), field)
    v = _interp_uniform(s.vertices, s.closed, s.seam_offset(), cum, count)
    return DiscreteString(vertices=v, closed=s.closed, winding_class=s.winding_class)


def _max_residual(v, closed, offset, ds, field: MetricField):
    data = field.evaluate(v)
    gamma = christoffel_from_data(data)
    res = _pde_terms(v, closed, offset, ds, gamma)
    return float(np.linalg.norm(res, axis=1).max()) if res.size else 0.0


def relax(s: DiscreteString, field: MetricField, opts: RelaxOptions | None = None):
    """Iterate relaxation steps until the string settles on a geodesic.

    Convergence requires both the maximum discrete geodesic residual to fall
    below ``opts.residual_tol`` and the per-iteration movement
    v(t) = sum_k |gamma_{t-1}(k) - gamma_t(k)| below ``opts.velocity_tol``.
    Returns ``(string, report)`` with the report filled either way.

    Raises CollapseDetected when a closed string's polyline length drops
    below K * 1e-6 (a contractible loop shrinking to a point).
    """
    opts = opts or RelaxOptions()
    if opts.scheme == "implicit":
        step = _implicit_step_array
        dt = opts.step if opts.step is not None else 100.0 * s.spacing**2
    elif opts.scheme == "explicit":
        step = _explicit_step_array
        dt = opts.step
    else:
        raise ValueError(f"unknown scheme {opts.scheme!r}")

    v = s.vertices.copy()
    closed = s.closed
    offset = s.seam_offset()
    ds = s.spacing
    lengths = []
    velocities = []
    iterations = 0
    converged = False
    stalled = 0
    for it in range(1, opts.max_iter + 1):
        v_new = step(v, field, closed, offset, ds, dt)
        if closed and opts.remove_drift:
            prev, nxt = _neighbors(v, True, offset)
            tang = nxt - prev
            tang /= np.maximum(np.linalg.norm(tang, axis=1, keepdims=True), 1e-300)
            disp = v_new - v
            creep = np.einsum("ki,ki->k", disp, tang).mean()
            v_new = v_new - creep * tang
        velocity = float(np.linalg.norm(v_new - v, axis=1).sum())
        v = v_new
        iterations = it
        if closed:
            euclid = _segment_lengths(v, True, s.winding_class).sum()
            if euclid < v.shape[0] * COLLAPSE_LENGTH_PER_VERTEX:
                raise CollapseDetected(
                    f"closed string length {euclid:.3e} below collapse threshold after {it} iterations"
                )
        if opts.redistribute_every and it % opts.redistribute_every == 0:
            v = _redistribute(v, closed, offset, field)
        lengths.append(_riemann_cumlen(v, closed, offset, field)[-1])
        velocities.append(velocity)
        if velocity <= opts.velocity_tol:
            if _max_residual(v, closed, offset, ds, field) <= opts.residual_tol:
                converged = True
                break
            stalled += 1
            # motion has died but the residual floor sits above tolerance:
            # more iterations cannot help, bail out as not converged
            if stalled >= 100:
                break
        else:
            stalled = 0
    final_residual = _max_residual(v, closed, offset, ds, field)
    converged = converged or (
        final_residual <= opts.residual_tol and velocities[-1] <= opts.velocity_tol
    )
    result = replace(s, vertices=v)
    report = RelaxReport(
        iterations=iterations,
        final_length=lengths[-1],
        length_history=np.asarray(lengths),
        convergence_velocity=np.asarray(velocities),
        final_residual=final_residual,
        converged=converged,
    )
    return result, report


def winding_number(s: DiscreteString) -> WindingNumber:
    """Signed full turns of each joint along a closed string.

    Sums the unwrapped vertex increments (seam included) and divides by 2*pi;
    the pre-rounding values come back for diagnostics.  Raises NotClosed for
    open strings and NonIntegerWinding when a pre-rounding value sits more
    than 0.01 away from an integer (a broken string).
    """
    if not s.closed:
        raise NotClosed("winding number is defined for closed strings")
    v = s.vertices
    inc = np.diff(v, axis=0).sum(axis=0) + (v[0] + s.seam_offset() - v[-1])
    return _round_winding(inc / (2.0 * np.pi))


def winding_of_path(path, tol: float = 0.01) -> WindingNumber:
    """Winding numbers of a sampled closed path given as unwrapped angles.

    The path must return to its start modulo 2*pi; the net unwrapped change
    divided by 2*pi is the winding.  ``tol`` bounds the allowed deviation
    from an integer.
    """
    path = np.asarray(path, dtype=float)
    raw = (path[-1] - path[0]) / (2.0 * np.pi)
    return _round_winding(raw, tol)


def _round_winding(raw, tol: float = 0.01) -> WindingNumber:
    rounded = np.rint(raw)
    if np.any(np.abs(raw - rounded) > tol):
        raise NonIntegerWinding(f"winding {raw} deviates from integers by > {tol}")
    return WindingNumber(alpha=(int(rounded[0]), int(rounded[1])), raw=raw)
