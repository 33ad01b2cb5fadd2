"""Discrete-time explicit reference governor (ERG).

The governor filters a desired reference ``r`` into an applied reference ``v``
for a pre-stabilized plant.  Each sample it evaluates the navigation field
``g = DSM * (attraction + repulsion)`` at the previous applied reference and
takes one Euler step ``v <- v + dt * kappa * g``.  The gain ``kappa`` is either
fixed or recomputed every sample from the distance between the current
equilibrium and the tightened constraints, which keeps the reference
steady-state admissible and the state inside the constraints.

All constraints are affine, ``c_i(x, v) = b_i - a_i @ x - e_i @ v``, and the
equilibrium map is affine, ``xbar(v) = M @ v + q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import optimize

ADMISSIBILITY_TOL = 1e-9


class ErgError(Exception):
    """Base class for governor errors."""


class ZeroGradientError(ErgError):
    """An active constraint has no dependence on the applied reference."""


class SingularQuadraticFormError(ErgError):
    pass


class NotQuadraticError(ErgError):
    pass


class NotInDError(ErgError):
    """The applied reference lies outside the steady-state admissible set."""


def _vec(a) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass(frozen=True)
class PlantModel:
    """Pre-stabilized plant ``xdot = f(x, v)`` with affine equilibrium map.

    ``mu`` bounds the sensitivity of the equilibrium to the reference and must
    dominate the spectral norm of ``eq_matrix``.
    """

    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    eq_matrix: np.ndarray
    eq_offset: np.ndarray
    mu: float
    # (A, B) when f(x, v) = A x + B v; lets the simulator batch sub-steps
    linear: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        q = _vec(self.eq_offset)
        if q.shape != (M.shape[0],):
            raise ValueError("eq_offset must have one entry per state")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if np.linalg.norm(M, 2) > self.mu * (1 + 1e-12):
            raise ValueError(f"mu={self.mu} is below the equilibrium sensitivity {np.linalg.norm(M, 2)}")
        object.__setattr__(self, "eq_matrix", M)
        object.__setattr__(self, "eq_offset", q)
        if self.linear is not None:
            A, B = (np.atleast_2d(np.asarray(a, dtype=float)) for a in self.linear)
            if A.shape != (M.shape[0], M.shape[0]) or B.shape != M.shape:
                raise ValueError("linear matrices have the wrong shape")
            object.__setattr__(self, "linear", (A, B))

    @classmethod
    def from_matrices(cls, A, B, eq_matrix, eq_offset, mu: float) -> "PlantModel":
        """Linear closed loop ``xdot = A x + B v``."""
        A = np.asarray(A, dtype=float)
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return cls(lambda x, v: A @ x + B @ v, eq_matrix, eq_offset, mu, linear=(A, B))

    @property
    def n(self) -> int:
        return self.eq_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.eq_matrix.shape[1]

    def equilibrium(self, v) -> np.ndarray:
        return self.eq_matrix @ _vec(v) + self.eq_offset

    def f(self, x, v) -> np.ndarray:
        return np.asarray(self.dynamics(x, v), dtype=float)

    def equilibrium_residual(self, vs) -> float:
        """Largest ``|f(xbar(v), v)|`` over the sampled references ``vs``."""
        return max(float(np.max(np.abs(self.f(self.equilibrium(v), _vec(v))))) for v in vs)


@dataclass(frozen=True)
class ConstraintSet:
    """Affine constraints ``c(x, v) = b - A x - E v >= 0`` (row-wise)."""

    state_coeffs: np.ndarray
    ref_coeffs: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.state_coeffs, dtype=float))
        E = np.atleast_2d(np.asarray(self.ref_coeffs, dtype=float))
        b = _vec(self.offsets)
        if A.shape[0] < 1:
            raise ValueError("at least one constraint is required")
        if E.shape[0] != A.shape[0] or b.shape != (A.shape[0],):
            raise ValueError("constraint rows disagree in count")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("constraints on the reference alone (zero state row) are not supported")
        object.__setattr__(self, "state_coeffs", A)
        object.__setattr__(self, "ref_coeffs", E)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "_row_norms", norms)

    @classmethod
    def state_only(cls, A, b, m: int) -> "ConstraintSet":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A, np.zeros((A.shape[0], m)), b)

    def __len__(self) -> int:
        return self.offsets.shape[0]

    @property
    def row_norms(self) -> np.ndarray:
        return self._row_norms

    def value(self, x, v) -> np.ndarray:
        return self.offsets - self.state_coeffs @ _vec(x) - self.ref_coeffs @ _vec(v)

    def at_equilibrium(self, v, plant: PlantModel) -> np.ndarray:
        v = _vec(v)
        return self.value(plant.equilibrium(v), v)

    def ref_gradients(self, plant: PlantModel) -> np.ndarray:
        """Rows are ``grad_v c_i(xbar(v), v) = -(M^T a_i + e_i)``."""
        return -(self.state_coeffs @ plant.eq_matrix + self.ref_coeffs)


@dataclass(frozen=True)
class LyapunovSpec:
    """Lyapunov function ``V(x, v)`` with quadratic bounds ``m1(v)``, ``m2(v)``.

    ``quad_form`` is set only when ``V`` is exactly ``e^T P(v) e`` with
    ``e = x - xbar(v)``; the exact threshold needs it.
    """

    value: Callable[[np.ndarray, np.ndarray], float]
    lower: Callable[[np.ndarray], float]
    upper: Callable[[np.ndarray], float]
    quad_form: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # set when the quadratic form does not depend on v
    P: Optional[np.ndarray] = None

    @classmethod
    def quadratic(cls, P, plant: PlantModel, m1: Optional[float] = None, m2: Optional[float] = None):
        """Constant quadratic form; bounds default to the extreme eigenvalues of ``P``."""
        P = np.array(P, dtype=float)
        if not np.allclose(P, P.T):
            raise ValueError("P must be symmetric")
        eig = np.linalg.eigvalsh(P)
        m1 = float(eig[0]) if m1 is None else float(m1)
        m2 = float(eig[-1]) if m2 is None else float(m2)
        if not 0 < m1 <= m2:
            raise ValueError("need 0 < m1 <= m2")

        def value(x, v):
            e = _vec(x) - plant.equilibrium(v)
            return float(e @ P @ e)

        return cls(value, lambda v: m1, lambda v: m2, lambda v: P, P=P)

    def bounds(self, v) -> tuple[float, float]:
        v = _vec(v)
        return float(self.lower(v)), float(self.upper(v))


@dataclass(frozen=True)
class KappaPolicy:
    """How the per-sample gain is chosen: ``dynamic``, ``invariance`` or ``fixed``."""

    kind: str
    value: float = math.nan

    def __post_init__(self):
        if self.kind not in ("dynamic", "invariance", "fixed"):
            raise ValueError(f"unknown kappa policy {self.kind!r}")
        if self.kind == "fixed" and not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError("fixed kappa must be a finite value >= 0")

    @classmethod
    def fixed(cls, value: float) -> "KappaPolicy":
        return cls("fixed", float(value))

    @classmethod
    def parse(cls, text: str) -> "KappaPolicy":
        """Parse ``dynamic``, ``invariance`` or ``fixed:<float>``."""
        text = text.strip().lower()
        if text in ("dynamic", "invariance"):
            return cls(text)
        if text.startswith("fixed:"):
            try:
                value = float(text[len("fixed:"):])
            except ValueError:
                raise ValueError(f"bad fixed kappa {text!r}") from None
            return cls.fixed(value)
        raise ValueError(f"unknown kappa policy {text!r}")

    @property
    def is_dynamic(self) -> bool:
        return self.kind != "fixed"

    def __str__(self) -> str:
        return f"fixed:{self.value:g}" if self.kind == "fixed" else self.kind


DYNAMIC = KappaPolicy("dynamic")
INVARIANCE_ONLY = KappaPolicy("invariance")


@dataclass(frozen=True)
class ErgParams:
    dt: float
    eta1: float
    eta2: float
    xi: float
    delta: float
    kappa: KappaPolicy = DYNAMIC

    def __post_init__(self):
        if self.dt <= 0 or self.eta1 <= 0 or self.eta2 <= 0:
            raise ValueError("dt, eta1 and eta2 must be positive")
        if not self.xi > self.delta > 0:
            raise ValueError("need xi > delta > 0")


@dataclass
class ErgState:
    v_prev: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.v_prev = _vec(self.v_prev).copy()


class StepInfo(NamedTuple):
    kappa: float
    dsm: float
    theta_bar: float
    g_norm: float


def attraction_field(v, r, eta1: float) -> np.ndarray:
    d = _vec(r) - _vec(v)
    return d / max(float(np.linalg.norm(d)), eta1)


def repulsion_field(v, plant: PlantModel, cons: ConstraintSet, xi: float, delta: float) -> np.ndarray:
    if not xi > delta > 0:
        raise ValueError("need xi > delta > 0")
    c = cons.at_equilibrium(v, plant)
    weights = np.maximum((xi - c) / (xi - delta), 0.0)
    out = np.zeros(plant.m)
    active = weights > 0
    if not np.any(active):
        return out
    grads = cons.ref_gradients(plant)[active]
    norms = np.linalg.norm(grads, axis=1)
    if np.any(norms == 0.0):
        raise ZeroGradientError("active constraint does not depend on the applied reference")
    return (weights[active] / norms) @ grads


def threshold_gamma(v, lyap: LyapunovSpec, cons: ConstraintSet, plant: PlantModel) -> float:
    """Smallest value of a quadratic ``V(., v)`` on any constraint boundary.

    For ``V = e^T P e`` the minimum over ``{c_i = 0}`` is ``c_i^2 / (a_i^T P^-1 a_i)``
    with ``c_i`` taken at the equilibrium.  An equilibrium already outside some
    constraint gives 0.
    """
    if lyap.quad_form is None:
        raise NotQuadraticError("no quadratic form available; use threshold_gamma_hat")
    v = _vec(v)
    P = lyap.quad_form(v)
    A = cons.state_coeffs
    try:
        PinvAt = np.linalg.solve(P, A.T)
    except np.linalg.LinAlgError:
        raise SingularQuadraticFormError("P(v) is singular") from None
    denom = np.einsum("ij,ji->i", A, PinvAt)
    if np.any(denom <= 0) or not np.all(np.isfinite(denom)):
        raise SingularQuadraticFormError("P(v) is not positive definite")
    c = np.maximum(cons.at_equilibrium(v, plant), 0.0)
    return float(np.min(c * c / denom))


def threshold_gamma_hat(v, lyap: LyapunovSpec, cons: ConstraintSet, plant: PlantModel) -> float:
    """Ball-based lower bound ``m1(v) * min_i dist(xbar(v), {c_i = 0})^2``."""
    v = _vec(v)
    d = np.maximum(cons.at_equilibrium(v, plant), 0.0) / cons.row_norms
    return float(lyap.lower(v) * np.min(d * d))


def threshold(v, lyap: LyapunovSpec, cons: ConstraintSet, plant: PlantModel) -> float:
    if lyap.quad_form is not None:
        return threshold_gamma(v, lyap, cons, plant)
    return threshold_gamma_hat(v, lyap, cons, plant)


def dsm(x, v, lyap: LyapunovSpec, cons: ConstraintSet, plant: PlantModel) -> float:
    """Dynamic safety margin ``Gamma(v) - V(x, v)``; may be negative."""
    v = _vec(v)
    return threshold(v, lyap, cons, plant) - float(lyap.value(_vec(x), v))


def navigation_field(x, v, r, params: ErgParams, plant: PlantModel, lyap: LyapunovSpec,
                     cons: ConstraintSet) -> np.ndarray:
    v = _vec(v)
    rho = attraction_field(v, r, params.eta1) + repulsion_field(v, plant, cons, params.xi, params.delta)
    return dsm(x, v, lyap, cons, plant) * rho


def distance_to_tightened_constraints(v, cons: ConstraintSet, plant: PlantModel, delta: float,
                                      strict: bool = True) -> tuple[np.ndarray, float]:
    """Distances from ``xbar(v)`` to each hyperplane ``{c_i(., v) = delta}``.

    With ``strict`` an equilibrium violating a tightened constraint by more
    than ``ADMISSIBILITY_TOL`` raises; otherwise signed distances are returned.
    """
    c = cons.at_equilibrium(v, plant)
    if strict:
        if np.any(c < delta - ADMISSIBILITY_TOL):
            raise NotInDError(f"min c_i(xbar_v, v) = {c.min():.6g} < delta = {delta}")
        c = np.maximum(c, delta)
    thetas = (c - delta) / cons.row_norms
    return thetas, float(np.min(thetas))


def _g_scale(g: Optional[np.ndarray], x, v_prev, r, params, plant, lyap, cons) -> float:
    if g is None:
        g = navigation_field(x, v_prev, r, params, plant, lyap, cons)
    return plant.mu * params.dt * max(float(np.linalg.norm(g)), params.eta2)


def kappa_invariance_bound(x, v_prev, r, theta_bar: float, params: ErgParams, plant: PlantModel,
                           lyap: LyapunovSpec, cons: ConstraintSet, g: Optional[np.ndarray] = None) -> float:
    """Largest gain that keeps the next reference steady-state admissible."""
    return max(theta_bar, 0.0) / _g_scale(g, x, v_prev, r, params, plant, lyap, cons)


def kappa_feasibility_bound(x, v_prev, r, theta_bar: float, params: ErgParams, plant: PlantModel,
                            lyap: LyapunovSpec, cons: ConstraintSet, g: Optional[np.ndarray] = None) -> float:
    """Largest gain that also keeps the state inside the constraints.

    The admissible equilibrium shift is split between the reference step and
    the current tracking error using the Lyapunov bounds at ``v_prev``.
    """
    v_prev = _vec(v_prev)
    m1, m2 = lyap.bounds(v_prev)
    s1, s2 = math.sqrt(m1), math.sqrt(m2)
    err = float(np.linalg.norm(_vec(x) - plant.equilibrium(v_prev)))
    num = max((s1 * max(theta_bar, 0.0) - s2 * err) / (s1 + s2), 0.0)
    return num / _g_scale(g, x, v_prev, r, params, plant, lyap, cons)


class Governor:
    """Governor bound to one plant, Lyapunov function and constraint set.

    Geometry that does not change between samples (reference gradients,
    exact-threshold denominators for a constant quadratic form) is computed
    once, which keeps :meth:`step` cheap inside long simulations.
    """

    def __init__(self, params: ErgParams, plant: PlantModel, lyap: LyapunovSpec, cons: ConstraintSet):
        self.params = params
        self.plant = plant
        self.lyap = lyap
        self.cons = cons
        self._M = plant.eq_matrix
        self._q = plant.eq_offset
        # c_i(xbar(v), v) = c0_i + G_i @ v
        self._G = cons.ref_gradients(plant)
        self._c0 = cons.offsets - cons.state_coeffs @ plant.eq_offset
        gnorm = np.linalg.norm(self._G, axis=1)
        self._G_unit = np.divide(self._G, gnorm[:, None], out=np.zeros_like(self._G), where=gnorm[:, None] > 0)
        self._G_zero = gnorm == 0
        self._row_norms = cons.row_norms
        self._inv_denom = None
        if lyap.P is not None:
            A = cons.state_coeffs
            try:
                denom = np.einsum("ij,ji->i", A, np.linalg.solve(lyap.P, A.T))
            except np.linalg.LinAlgError:
                raise SingularQuadraticFormError("P is singular") from None
            if np.any(denom <= 0):
                raise SingularQuadraticFormError("P is not positive definite")
            self._inv_denom = 1.0 / denom

    def constraints_at_equilibrium(self, v: np.ndarray) -> np.ndarray:
        return self._c0 + self._G @ v

    def threshold(self, v: np.ndarray, c_eq: Optional[np.ndarray] = None) -> float:
        if c_eq is None:
            c_eq = self.constraints_at_equilibrium(v)
        cp = np.maximum(c_eq, 0.0)
        if self._inv_denom is not None:
            return float(np.min(cp * cp * self._inv_denom))
        if self.lyap.quad_form is not None:
            return threshold_gamma(v, self.lyap, self.cons, self.plant)
        d = cp / self._row_norms
        return float(self.lyap.lower(v) * np.min(d * d))

    def dsm(self, x: np.ndarray, v: np.ndarray) -> float:
        return self.threshold(v) - float(self.lyap.value(x, v))

    def step(self, x, state: ErgState, r) -> tuple[np.ndarray, StepInfo]:
        p = self.params
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        v = state.v_prev
        c_eq = self._c0 + self._G @ v
        margin = self.threshold(v, c_eq) - float(self.lyap.value(x, v))

        d = r - v
        rho = d / max(math.sqrt(float(d @ d)), p.eta1)
        w = (p.xi - c_eq) / (p.xi - p.delta)
        active = w > 0
        if active.any():
            if self._G_zero[active].any():
                raise ZeroGradientError("active constraint does not depend on the applied reference")
            rho = rho + w[active] @ self._G_unit[active]
        g = margin * rho
        g_norm = math.sqrt(float(g @ g))

        policy = p.kappa
        if policy.is_dynamic:
            if np.any(c_eq < p.delta - ADMISSIBILITY_TOL):
                raise NotInDError(f"min c_i(xbar_v, v) = {c_eq.min():.6g} < delta = {p.delta}")
            theta_bar = float(np.min((np.maximum(c_eq, p.delta) - p.delta) / self._row_norms))
            scale = self.plant.mu * p.dt * max(g_norm, p.eta2)
            if policy.kind == "dynamic":
                m1, m2 = self.lyap.bounds(v)
                s1, s2 = math.sqrt(m1), math.sqrt(m2)
                e = x - (self._M @ v + self._q)
                err = math.sqrt(float(e @ e))
                kappa = max((s1 * theta_bar - s2 * err) / (s1 + s2), 0.0) / scale
            else:
                kappa = theta_bar / scale
        else:
            theta_bar = float(np.min((c_eq - p.delta) / self._row_norms))
            kappa = policy.value

        v_new = v + p.dt * kappa * g
        state.v_prev = v_new
        state.k += 1
        return v_new, StepInfo(float(kappa), margin, theta_bar, g_norm)


def erg_step(x, state: ErgState, r, params: ErgParams, plant: PlantModel, lyap: LyapunovSpec,
             cons: ConstraintSet) -> tuple[np.ndarray, StepInfo]:
    """Advance the governor by one sample; ``state`` is updated in place.

    Dynamic policies require ``state.v_prev`` to be steady-state admissible and
    raise :class:`NotInDError` otherwise.  A fixed gain is applied as given.
    """
    return Governor(params, plant, lyap, cons).step(_vec(x), state, _vec(r))


def best_admissible_reference(r, params: ErgParams, plant: PlantModel, cons: ConstraintSet) -> np.ndarray:
    """Limit the governor converges to: ``r`` itself or its admissible approximation.

    For a reference that is not strictly admissible the limit is the zero of the
    attraction-plus-repulsion field, searched from the projection of ``r`` onto
    the tightened admissible set.
    """
    r = _vec(r)
    c_r = cons.at_equilibrium(r, plant)
    if np.all(c_r >= params.xi):
        return r
    # c_i(xbar_v, v) = c0_i + G_i @ v is affine in v
    G = cons.ref_gradients(plant)
    c0 = cons.at_equilibrium(np.zeros(plant.m), plant)
    start = _project_halfspaces(r, G, params.delta - c0)

    def field(v):
        return attraction_field(v, r, params.eta1) + repulsion_field(v, plant, cons, params.xi, params.delta)

    if np.linalg.norm(field(start)) < 1e-12:
        return start
    sol = optimize.root(field, start, method="hybr")
    if sol.success and np.linalg.norm(field(sol.x)) < 1e-9:
        return sol.x
    return start


def _project_halfspaces(p: np.ndarray, G: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``{v : G v >= lo}``."""
    if np.all(G @ p >= lo):
        return p
    if G.shape[0] == 1:
        g = G[0]
        return p + (lo[0] - g @ p) / (g @ g) * g
    res = optimize.minimize(
        lambda v: 0.5 * np.sum((v - p) ** 2),
        p,
        jac=lambda v: v - p,
        constraints=[{"type": "ineq", "fun": lambda v: G @ v - lo, "jac": lambda v: G}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 200},
    )
    return res.x
