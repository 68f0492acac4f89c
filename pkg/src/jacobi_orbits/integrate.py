"""Forward dynamics integration and event detection.

Fixed-step classical RK4 keeps runs reproducible and makes event
interpolation simple.  On top of plain simulation this module detects brake
points (zero-velocity turning events), Poincare-section crossings, and
measures how far a simulated trajectory strays from a polyline path in
configuration space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import NonFinite
from .model import MechParams, State


@dataclass
class Trajectory:
    """Fixed-step trajectory: times (N,), q and qd (N, 2), and the maximum
    energy drift |H(t) - H(0)| observed over the run."""

    times: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    energy_drift: float

    def state(self, i: int) -> State:
        return State(self.q[i], self.qd[i])

    def __len__(self) -> int:
        return self.times.size


def _deriv(y, p: MechParams):
    q, qd = y[..., :2], y[..., 2:]
    return np.concatenate([qd, model.accel_arrays(q, qd, p)], axis=-1)


def _rk4(y, dt, p: MechParams):
    k1 = _deriv(y, p)
    k2 = _deriv(y + 0.5 * dt * k1, p)
    k3 = _deriv(y + 0.5 * dt * k2, p)
    k4 = _deriv(y + dt * k3, p)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _pack(s: State):
    return np.concatenate([s.q, s.qd], axis=-1)


def _unpack(y) -> State:
    return State(y[..., :2], y[..., 2:])


def rk4_step(s: State, dt: float, p: MechParams) -> State:
    """One classical 4th-order Runge-Kutta step of the free dynamics."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return _unpack(_rk4(_pack(s), dt, p))


def propagate(s: State, duration: float, dt: float, p: MechParams) -> State:
    """Advance by an arbitrary duration: full dt steps plus one partial step.

    Broadcasts over batched states, which keeps finite-difference Jacobians
    of the flow map cheap.
    """
    y = _pack(s)
    n_full = int(math.floor(duration / dt))
    for _ in range(n_full):
        y = _rk4(y, dt, p)
    rem = duration - n_full * dt
    if rem > 0.0:
        y = _rk4(y, rem, p)
    if not np.isfinite(y).all():
        raise NonFinite(f"state diverged while propagating {duration} s at dt={dt}")
    return _unpack(y)


def simulate(s0: State, t_end: float, dt: float, p: MechParams) -> Trajectory:
    """Integrate for t_end seconds at fixed dt; len(times) = floor(t_end/dt) + 1."""
    if not (t_end > 0.0 and dt > 0.0):
        raise ValueError(f"need t_end > 0 and dt > 0, got {t_end}, {dt}")
    n = int(math.floor(t_end / dt))
    ys = np.empty((n + 1, 4))
    ys[0] = _pack(s0)
    y = ys[0]
    for k in range(1, n + 1):
        y = _rk4(y, dt, p)
        if not np.isfinite(y).all():
            raise NonFinite(f"state diverged at step {k} (t={k * dt:.6g}); reduce dt")
        ys[k] = y
    q, qd = ys[:, :2], ys[:, 2:]
    h = model.kinetic_energy(q, qd, p) + model.potential(q, p)
    drift = float(np.abs(h - h[0]).max())
    return Trajectory(times=np.arange(n + 1) * dt, q=q, qd=qd, energy_drift=drift)


def trajectory_energies(traj: Trajectory, p: MechParams) -> np.ndarray:
    """Total energy at every sample."""
    return model.kinetic_energy(traj.q, traj.qd, p) + model.potential(traj.q, p)


def brake_speed_threshold(energy: float, p: MechParams) -> float:
    """Speeds below this count as `stopped`: 1e-4 of the characteristic speed
    sqrt(2 (E - U_min) / lambda_min(M))."""
    margin = max(energy - model.potential_min(p), 0.0)
    char = math.sqrt(2.0 * margin / model.mass_eigenvalue_min(p))
    return 1e-4 * char


def detect_brake_points(traj: Trajectory, p: MechParams) -> list[tuple[float, np.ndarray]]:
    """(time, configuration) events where the joint speed dips to a local
    minimum below the brake threshold.

    Interior events are refined by a quadratic fit of |qd|^2 in time; the
    configuration is interpolated with the same three-point stencil.  A
    below-threshold start or end sample counts as an event at that sample.
    """
    if len(traj) == 0:
        return []
    energy = float(model.kinetic_energy(traj.q[0], traj.qd[0], p) + model.potential(traj.q[0], p))
    thresh = brake_speed_threshold(energy, p)
    v2 = np.einsum("ki,ki->k", traj.qd, traj.qd)
    t = traj.times
    events: list[tuple[float, np.ndarray]] = []
    n = v2.size
    if n >= 2 and v2[0] <= v2[1] and math.sqrt(v2[0]) < thresh:
        events.append((float(t[0]), traj.q[0].copy()))
    for k in range(1, n - 1):
        if not (v2[k] < v2[k - 1] and v2[k] <= v2[k + 1]):
            continue
        denom = v2[k - 1] - 2.0 * v2[k] + v2[k + 1]
        if denom > 0.0:
            frac = 0.5 * (v2[k - 1] - v2[k + 1]) / denom
            frac = min(max(frac, -1.0), 1.0)
            # parabola vertex value through the three samples
            v2_star = v2[k] - (v2[k - 1] - v2[k + 1]) ** 2 / (8.0 * denom)
        else:
            frac = 0.0
            v2_star = v2[k]
        if math.sqrt(max(v2_star, 0.0)) >= thresh:
            continue
        t_star = t[k] + frac * (t[k + 1] - t[k])
        # Lagrange 3-point interpolation of q at t_star
        q_star = (
            0.5 * frac * (frac - 1.0) * traj.q[k - 1]
            + (1.0 - frac * frac) * traj.q[k]
            + 0.5 * frac * (frac + 1.0) * traj.q[k + 1]
        )
        events.append((float(t_star), q_star))
    if n >= 2 and v2[-1] < v2[-2] and math.sqrt(v2[-1]) < thresh:
        events.append((float(t[-1]), traj.q[-1].copy()))
    return events


def section_crossings(
    traj: Trajectory, section: tuple[int, float, int], p: MechParams
) -> list[State]:
    """States where q[index] crosses ``value`` (modulo 2*pi, the section is a
    circle on the torus) with sign(qd[index]) = direction.

    Each bracketed crossing is refined by Newton iteration on RK4 substeps
    from the preceding sample, so the returned states satisfy the section
    equation to ~1e-12 and lie on the numerical flow.
    """
    index, value, direction = section
    if index not in (0, 1):
        raise ValueError(f"joint index must be 0 or 1, got {index}")
    if direction not in (-1, 1):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    x = _wrap_angle(traj.q[:, index] - value)
    dt = float(traj.times[1] - traj.times[0]) if len(traj) > 1 else 0.0
    out: list[State] = []
    for k in range(len(traj) - 1):
        if x[k] == 0.0:
            if np.sign(traj.qd[k, index]) == direction:
                out.append(traj.state(k))
            continue
        # a sign change across the +-pi seam is not a section crossing
        if x[k] * x[k + 1] >= 0.0 or abs(x[k] - x[k + 1]) > np.pi:
            continue
        y0 = np.concatenate([traj.q[k], traj.qd[k]])
        delta = dt * x[k] / (x[k] - x[k + 1])
        for _ in range(12):
            y = _rk4_partial(y0, delta, dt, p)
            f = _wrap_angle(y[index] - value)
            if abs(f) <= 1e-12:
                break
            slope = y[2 + index]
            if slope == 0.0:
                break
            delta = min(max(delta - f / slope, 0.0), dt)
        y = _rk4_partial(y0, delta, dt, p)
        if np.sign(y[2 + index]) == direction:
            out.append(_unpack(y))
    if x.size and x[-1] == 0.0 and np.sign(traj.qd[-1, index]) == direction:
        out.append(traj.state(-1))
    return out


def _wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


def _rk4_partial(y0, delta, dt, p):
    if delta <= 0.0:
        return y0
    return _rk4(y0, min(delta, dt), p)


def _closed_polyline(curve, points) -> np.ndarray:
    """Materialize a closed curve as one open polyline, replicating periodic
    copies until they cover the winding extent of ``points``."""
    v = curve.vertices
    off = curve.seam_offset()
    if not np.any(off):
        return np.vstack([v, v[:1]])
    span = np.abs(points - v[0]).max()
    need = min(int(span / np.abs(off[np.abs(off) > 0]).min()) + 2, 64)
    copies = [v + m * off for m in range(-need, need + 1)]
    return np.vstack(copies + [v[:1] + (need + 1) * off])


def _point_segment_dist(pt, a, b):
    ab = b - a
    denom = np.einsum("ki,ki->k", ab, ab)
    tpar = np.einsum("ki,ki->k", pt - a, ab) / np.where(denom > 0.0, denom, 1.0)
    tpar = np.clip(tpar, 0.0, 1.0)
    proj = a + tpar[:, None] * ab
    return np.linalg.norm(pt - proj, axis=1)


def path_deviation(traj, curve) -> float:
    """Max distance from trajectory samples to a string's polyline.

    Distances are Euclidean in unwrapped configuration coordinates.  Matching
    walks the polyline with a moving window so that a path revisiting nearby
    regions (or wrapping a closed curve several times) is compared against
    the locally-correct stretch rather than a far-away near-duplicate.
    """
    points = traj.q if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    poly = _closed_polyline(curve, points) if curve.closed else curve.vertices
    a, b = poly[:-1], poly[1:]
    n_seg = a.shape[0]
    window = max(8, n_seg // 20)
    dists = _point_segment_dist(np.broadcast_to(points[0], a.shape), a, b)
    j = int(np.argmin(dists))
    worst = float(dists[j])
    for pt in points[1:]:
        lo = max(0, j - window)
        hi = min(n_seg, j + window + 1)
        d = _point_segment_dist(np.broadcast_to(pt, a[lo:hi].shape), a[lo:hi], b[lo:hi])
        jj = int(np.argmin(d))
        j = lo + jj
        worst = max(worst, float(d[jj]))
    return worst
