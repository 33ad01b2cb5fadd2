"""Benchmark systems: double integrator, aircraft pitch, Parrot Bebop 2."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .core import ConstraintSet, ErgParams, LyapunovSpec, PlantModel


@dataclass(frozen=True)
class BenchmarkBundle:
    name: str
    plant: PlantModel
    lyap: LyapunovSpec
    cons: ConstraintSet
    params: ErgParams
    r: np.ndarray
    x0: np.ndarray
    v0: np.ndarray
    t_max: float
    # constant quadratic forms backing lyap, where they exist
    P: np.ndarray | None = None
    # m1, m2 as printed alongside the model
    stated_bounds: tuple[float, float] | None = None


def _swap_block(P: np.ndarray) -> np.ndarray:
    """Reorder a 2x2 form written for ``[rate, ref - pos]`` into ``[pos - ref, rate]``.

    The reordering keeps the eigenvalues.
    """
    return np.array([[P[1, 1], -P[0, 1]], [-P[1, 0], P[0, 0]]])


# ---------------------------------------------------------------------------
# double integrator
# ---------------------------------------------------------------------------

DI_GAIN = np.array([10.0, 0.5])
DI_FEEDFORWARD = 10.0
DI_P_PRINTED = np.array([[2.25, -1.0], [-1.0, 22.0]])


def double_integrator(lyapunov: str = "consistent") -> BenchmarkBundle:
    """``xddot = u`` with ``u = -K [x, xdot] + G v`` and the constraint ``x <= 1``.

    ``lyapunov="printed"`` uses the printed matrix in ``[x - v, xdot]``
    coordinates.  That form is not decreasing along this closed loop, so the
    default ``"consistent"`` reads the same matrix in ``[xdot, v - x]``
    coordinates, where it is a valid Lyapunov matrix with the same eigenvalues.
    """
    k1, k2 = DI_GAIN
    G = DI_FEEDFORWARD

    A = np.array([[0.0, 1.0], [-k1, -k2]])
    plant = PlantModel.from_matrices(A, [[0.0], [G]], [[1.0], [0.0]], [0.0, 0.0], mu=1.0)
    if lyapunov == "printed":
        P = DI_P_PRINTED.copy()
    elif lyapunov == "consistent":
        P = _swap_block(DI_P_PRINTED)
    else:
        raise ValueError(f"unknown lyapunov variant {lyapunov!r}")
    lyap = LyapunovSpec.quadratic(P, plant)
    cons = ConstraintSet.state_only([[1.0, 0.0]], [1.0], m=1)
    params = ErgParams(dt=0.1, eta1=0.01, eta2=0.01, xi=0.045, delta=0.04)
    return BenchmarkBundle("double-integrator", plant, lyap, cons, params, r=np.array([1.1]),
                           x0=np.array([-1.0, 0.0]), v0=np.array([-1.0]), t_max=30.0, P=P,
                           stated_bounds=(2.2, 22.0))


# ---------------------------------------------------------------------------
# aircraft longitudinal dynamics
# ---------------------------------------------------------------------------

AC_D1 = 4.0
AC_D2 = 42.0
AC_B = 2e6
AC_J = 4.5e6
AC_KP = 4.7e5
AC_KD = 1.79e5
AC_STALL_DEG = 14.7

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def lift(alpha):
    return 2.5e5 + 1.5e5 * alpha - 230.0 * alpha ** 3


def lift_slope(alpha):
    return 1.5e5 - 690.0 * alpha ** 2


def lift_secant(a, b):
    """``(L(a) - L(b)) / (a - b)``, exact for ``a == b`` too."""
    return 1.5e5 - 230.0 * (a * a + a * b + b * b)


def aircraft_potential(alpha: float, v: float) -> float:
    """``int_v^alpha (d1 (L(s) - L(v)) + d2 kP (s - v)) cos(s) ds``.

    The integrand carries a factor ``(s - v)``, so the integral is written as
    ``(alpha - v)^2 * int_0^1 u * w(v + u (alpha - v)) du`` and evaluated by
    Gauss-Legendre; this stays accurate when ``alpha`` is close to ``v``.
    """
    d = alpha - v
    s = v + _GL_NODES * d
    w = (AC_D1 * lift_secant(s, v) + AC_D2 * AC_KP) * np.cos(s)
    return float(d * d * np.dot(_GL_WEIGHTS, _GL_NODES * w))


def aircraft_bound_matrices(v: float, alpha_s: float) -> tuple[np.ndarray, np.ndarray]:
    p1 = 0.5 * (AC_D1 * lift_secant(alpha_s, v) + AC_D2 * AC_KP) * math.cos(alpha_s)
    p2 = 0.5 * AC_D2 * AC_KP + 0.5 * AC_D1 * lift_slope(v)
    return np.diag([p1, 0.5 * AC_J]), np.diag([p2, 0.5 * AC_J])


def aircraft() -> BenchmarkBundle:
    """Angle-of-attack dynamics under a PD law with lift feedforward.

    State is ``[alpha, alpha_dot]`` in radians.  The stall limit, the repulsion
    margins and the desired reference are specified in degrees and converted.
    """
    alpha_s = math.radians(AC_STALL_DEG)

    def f(x, v):
        a, ad = x[0], x[1]
        u = -AC_KP * (a - v[0]) - AC_KD * ad + (AC_D1 / AC_D2) * lift(v[0])
        c = np.cos(a)
        add = (-AC_D1 * lift(a) * c - AC_B * ad + AC_D2 * u * c) / AC_J
        return np.array([ad, add])

    plant = PlantModel(f, [[1.0], [0.0]], [0.0, 0.0], mu=1.0)

    def value(x, v):
        return 0.5 * AC_J * x[1] ** 2 + aircraft_potential(x[0], v[0])

    def lower(v):
        return float(np.linalg.eigvalsh(aircraft_bound_matrices(v[0], alpha_s)[0])[0])

    def upper(v):
        return float(np.linalg.eigvalsh(aircraft_bound_matrices(v[0], alpha_s)[1])[-1])

    lyap = LyapunovSpec(value, lower, upper)
    cons = ConstraintSet.state_only([[1.0, 0.0]], [alpha_s], m=1)
    params = ErgParams(dt=0.1, eta1=0.01, eta2=0.01, xi=math.radians(0.3), delta=math.radians(0.1))
    return BenchmarkBundle("aircraft", plant, lyap, cons, params, r=np.array([math.radians(14.0)]),
                           x0=np.zeros(2), v0=np.zeros(1), t_max=100.0)


# ---------------------------------------------------------------------------
# Parrot Bebop 2
# ---------------------------------------------------------------------------

BEBOP_A = np.array([
    [0, 1, 0, 0, 0, 0],
    [0, -0.05, 0, 0, 0, 0],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, -0.02, 0, 0],
    [0, 0, 0, 0, 0, 1],
    [0, 0, 0, 0, 0, -1.79],
], dtype=float)
BEBOP_B = np.array([
    [0, -5.48, 0, 0, 0, 0],
    [0, 0, 0, -7.06, 0, 0],
    [0, 0, 0, 0, 0, -1.74],
], dtype=float).T
# (position gain, rate gain) per axis
BEBOP_PD = ((0.08, 0.06), (0.08, 0.06), (1.7, 0.05))
BEBOP_P_PRINTED = (
    np.array([[9.48, -1.0], [-1.0, 3.77]]),
    np.array([[7.05, -1.0], [-1.0, 3.54]]),
    np.array([[1.35, -1.0], [-1.0, 2.11]]),
)


def bebop_gain_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Feedback matrices with ``u = K x + H v``.

    The input matrix has negative entries, so the PD laws act with the sign
    that makes their position and rate terms stabilizing.
    """
    K = np.zeros((3, 6))
    H = np.zeros((3, 3))
    for i, (kp, kd) in enumerate(BEBOP_PD):
        K[i, 2 * i] = kp
        K[i, 2 * i + 1] = kd
        H[i, i] = -kp
    return K, H


def bebop_closed_loop() -> tuple[np.ndarray, np.ndarray]:
    K, H = bebop_gain_matrices()
    return BEBOP_A + BEBOP_B @ K, BEBOP_B @ H


def bebop_drone(lyapunov: str = "consistent") -> BenchmarkBundle:
    """Linear position model with decoupled PD loops and the wall ``p_y <= 1``."""
    Acl, Bcl = bebop_closed_loop()
    M = np.zeros((6, 3))
    M[0, 0] = M[2, 1] = M[4, 2] = 1.0
    plant = PlantModel.from_matrices(Acl, Bcl, M, np.zeros(6), mu=1.0)
    if lyapunov == "printed":
        P = block_diag(*BEBOP_P_PRINTED)
    elif lyapunov == "consistent":
        P = block_diag(*(_swap_block(b) for b in BEBOP_P_PRINTED))
    else:
        raise ValueError(f"unknown lyapunov variant {lyapunov!r}")
    lyap = LyapunovSpec.quadratic(P, plant)
    cons = ConstraintSet.state_only([[0, 0, 1.0, 0, 0, 0]], [1.0], m=3)
    params = ErgParams(dt=0.083, eta1=0.01, eta2=0.01, xi=0.045, delta=0.04)
    return BenchmarkBundle("bebop", plant, lyap, cons, params, r=np.array([0.0, 1.2, 1.5]),
                           x0=np.zeros(6), v0=np.zeros(3), t_max=30.0, P=P,
                           stated_bounds=(0.6592, 9.6460))


BUNDLES = {
    "double-integrator": double_integrator,
    "aircraft": aircraft,
    "bebop": bebop_drone,
}


def get_bundle(name: str) -> BenchmarkBundle:
    try:
        return BUNDLES[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(BUNDLES)}") from None
