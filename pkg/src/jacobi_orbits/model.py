"""Gravity double pendulum: energies, manipulator-form terms, linearization.

Conventions
-----------
Point masses m1, m2 sit at the ends of massless rigid links l1, l2.  The
first joint angle q1 is measured from the downward vertical; q2 is the
second link's angle relative to the first link.  The pivot is the origin,
y positive up, so the mass heights are

    y1 = -l1 cos(q1)
    y2 = -l1 cos(q1) - l2 cos(q1 + q2)

Kinetic energy is T = 1/2 qd' M(q) qd with the standard two-link inertia

    M11 = (m1 + m2) l1^2 + m2 l2^2 + 2 m2 l1 l2 cos(q2)
    M12 = m2 l2^2 + m2 l1 l2 cos(q2)
    M22 = m2 l2^2

and the potential (zero level at the pivot) is

    U = -(m1 + m2) g l1 cos(q1) - m2 g l2 cos(q1 + q2).

The equations of motion in manipulator form, M(q) qdd + C(q, qd) qd + g(q) = 0,
use the Christoffel-symbol Coriolis matrix so that Mdot - 2C is skew
symmetric.

All functions broadcast over leading axes: ``q`` may be shape (2,) or
(..., 2), and matrix-valued results gain trailing (2, 2) axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotAnEquilibrium

EQUILIBRIUM_TOL = 1e-10


@dataclass(frozen=True)
class MechParams:
    """Physical parameters: masses [kg], link lengths [m], gravity [m/s^2]."""

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    grav: float = 9.81

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError(f"masses must be positive, got m1={self.m1}, m2={self.m2}")
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"lengths must be positive, got l1={self.l1}, l2={self.l2}")
        if not self.grav >= 0:
            raise ValueError(f"grav must be nonnegative, got {self.grav}")


@dataclass(frozen=True)
class State:
    """Joint-space state: configuration q [rad] and velocity qd [rad/s].

    Angles are stored unwrapped; the configuration lives on the torus
    (identified mod 2pi) but no wrapping is ever applied implicitly.
    Arrays may carry leading batch axes as long as the trailing axis is 2.
    """

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qd = np.asarray(self.qd, dtype=float)
        if q.shape != qd.shape or q.shape[-1:] != (2,):
            raise ValueError(f"q/qd must both end in axis 2, got {q.shape} and {qd.shape}")
        if not (np.isfinite(q).all() and np.isfinite(qd).all()):
            raise ValueError("state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)


@dataclass(frozen=True)
class Linearization:
    """Second-order linearization M qdd + K (q - q_eq) = 0 about an equilibrium.

    ``frequencies`` are the generalized eigenfrequencies sorted ascending;
    ``modes`` holds the matching eigenvectors as columns, normalized so that
    modes.T @ mass @ modes = I.
    """

    mass: np.ndarray
    stiffness: np.ndarray
    frequencies: np.ndarray
    modes: np.ndarray


def _q12(q):
    q = np.asarray(q, dtype=float)
    return q[..., 0], q[..., 1]


def mass_matrix(q, p: MechParams) -> np.ndarray:
    """Inertia matrix M(q), shape (..., 2, 2); symmetric positive definite."""
    _, q2 = _q12(q)
    c2 = np.cos(q2)
    m11 = (p.m1 + p.m2) * p.l1**2 + p.m2 * p.l2**2 + 2.0 * p.m2 * p.l1 * p.l2 * c2
    m12 = p.m2 * p.l2**2 + p.m2 * p.l1 * p.l2 * c2
    m22 = p.m2 * p.l2**2 + np.zeros_like(c2)
    out = np.empty(np.shape(c2) + (2, 2))
    out[..., 0, 0] = m11
    out[..., 0, 1] = m12
    out[..., 1, 0] = m12
    out[..., 1, 1] = m22
    return out


def mass_matrix_partials(q, p: MechParams) -> np.ndarray:
    """dM/dq, shape (..., 2, 2, 2); index order [..., k, i, j] = dM_ij/dq_k.

    Only the q2 partial is nonzero for this chain.
    """
    _, q2 = _q12(q)
    h = -p.m2 * p.l1 * p.l2 * np.sin(q2)
    out = np.zeros(np.shape(q2) + (2, 2, 2))
    out[..., 1, 0, 0] = 2.0 * h
    out[..., 1, 0, 1] = h
    out[..., 1, 1, 0] = h
    return out


def potential(q, p: MechParams) -> np.ndarray:
    """Gravitational potential U(q) [J], zero level at the pivot height."""
    q1, q2 = _q12(q)
    return -(p.m1 + p.m2) * p.grav * p.l1 * np.cos(q1) - p.m2 * p.grav * p.l2 * np.cos(q1 + q2)


def gravity_vector(q, p: MechParams) -> np.ndarray:
    """Generalized gravity force g(q) = dU/dq, shape (..., 2)."""
    q1, q2 = _q12(q)
    s1 = np.sin(q1)
    s12 = np.sin(q1 + q2)
    g1 = (p.m1 + p.m2) * p.grav * p.l1 * s1 + p.m2 * p.grav * p.l2 * s12
    g2 = p.m2 * p.grav * p.l2 * s12
    return np.stack([g1, g2], axis=-1)


def gravity_jacobian(q, p: MechParams) -> np.ndarray:
    """dg/dq (the Hessian of U), shape (..., 2, 2); symmetric."""
    q1, q2 = _q12(q)
    c1 = np.cos(q1)
    c12 = np.cos(q1 + q2)
    a = (p.m1 + p.m2) * p.grav * p.l1 * c1 + p.m2 * p.grav * p.l2 * c12
    b = p.m2 * p.grav * p.l2 * c12
    out = np.empty(np.shape(c1) + (2, 2))
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = b
    out[..., 1, 1] = b
    return out


def coriolis_matrix(q, qd, p: MechParams) -> np.ndarray:
    """Coriolis/centrifugal matrix C(q, qd) from Christoffel symbols of M.

    Built so that Mdot - 2C is skew symmetric and qd' C qd = 1/2 qd' Mdot qd.
    """
    _, q2 = _q12(q)
    qd = np.asarray(qd, dtype=float)
    h = -p.m2 * p.l1 * p.l2 * np.sin(q2)
    qd1, qd2 = qd[..., 0], qd[..., 1]
    out = np.empty(np.shape(h) + (2, 2))
    out[..., 0, 0] = h * qd2
    out[..., 0, 1] = h * (qd1 + qd2)
    out[..., 1, 0] = -h * qd1
    out[..., 1, 1] = np.zeros_like(h)
    return out


def _solve_2x2(A, b):
    """Solve A x = b for (..., 2, 2) against (..., 2) via the adjugate."""
    a, bb = A[..., 0, 0], A[..., 0, 1]
    c, d = A[..., 1, 0], A[..., 1, 1]
    det = a * d - bb * c
    x0 = (d * b[..., 0] - bb * b[..., 1]) / det
    x1 = (-c * b[..., 0] + a * b[..., 1]) / det
    return np.stack([x0, x1], axis=-1)


def accel_arrays(q, qd, p: MechParams) -> np.ndarray:
    """Unvalidated array kernel behind :func:`accel`; hot path for integrators."""
    qd = np.asarray(qd, dtype=float)
    M = mass_matrix(q, p)
    C = coriolis_matrix(q, qd, p)
    rhs = np.einsum("...ij,...j->...i", C, qd) + gravity_vector(q, p)
    return _solve_2x2(M, -rhs)


def accel(s: State, p: MechParams) -> np.ndarray:
    """Joint acceleration qdd = -M(q)^{-1} (C(q,qd) qd + g(q)), shape (..., 2)."""
    return accel_arrays(s.q, s.qd, p)


def kinetic_energy(q, qd, p: MechParams) -> np.ndarray:
    """T = 1/2 qd' M(q) qd."""
    M = mass_matrix(q, p)
    qd = np.asarray(qd, dtype=float)
    return 0.5 * np.einsum("...i,...ij,...j->...", qd, M, qd)


def total_energy(s: State, p: MechParams) -> np.ndarray:
    """Hamiltonian H = T + U [J]; conserved along the free dynamics."""
    return kinetic_energy(s.q, s.qd, p) + potential(s.q, p)


def potential_min(p: MechParams) -> float:
    """Global minimum of U, attained at the hanging configuration (0, 0)."""
    return -p.grav * ((p.m1 + p.m2) * p.l1 + p.m2 * p.l2)


def potential_max(p: MechParams) -> float:
    """Global maximum of U, attained at the upright configuration (pi, 0)."""
    return p.grav * ((p.m1 + p.m2) * p.l1 + p.m2 * p.l2)


def mass_eigenvalue_min(p: MechParams) -> float:
    """min over q of the smallest eigenvalue of M(q).

    M depends on q2 only; the minimum is at q2 = pi (links folded), where
    the coupling term flips sign.
    """
    M = mass_matrix(np.array([0.0, np.pi]), p)
    return float(np.linalg.eigvalsh(M)[0])


def link_positions(q, p: MechParams) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian (x, y) of both point masses, each shape (..., 2)."""
    q1, q2 = _q12(q)
    x1 = p.l1 * np.sin(q1)
    y1 = -p.l1 * np.cos(q1)
    x2 = x1 + p.l2 * np.sin(q1 + q2)
    y2 = y1 - p.l2 * np.cos(q1 + q2)
    return np.stack([x1, y1], axis=-1), np.stack([x2, y2], axis=-1)


def linearize(q_eq, p: MechParams) -> Linearization:
    """Linearize the free dynamics about an equilibrium configuration.

    Solves the generalized eigenproblem K v = w^2 M v with K = dg/dq and
    M = M(q_eq), returning frequencies sorted ascending and M-orthonormal
    eigenvectors.  Raises NotAnEquilibrium when the gravity torque at q_eq
    exceeds ``EQUILIBRIUM_TOL``.
    """
    q_eq = np.asarray(q_eq, dtype=float)
    g = gravity_vector(q_eq, p)
    if np.linalg.norm(g) > EQUILIBRIUM_TOL:
        raise NotAnEquilibrium(f"|g({q_eq})| = {np.linalg.norm(g):.3e} > {EQUILIBRIUM_TOL}")
    M = mass_matrix(q_eq, p)
    K = gravity_jacobian(q_eq, p)
    w2, V = scipy.linalg.eigh(K, M)
    # Saddle equilibria have w^2 < 0; report nan rather than faking a frequency.
    freqs = np.where(w2 >= 0.0, np.sqrt(np.abs(w2)), np.nan)
    return Linearization(mass=M, stiffness=K, frequencies=freqs, modes=V)
