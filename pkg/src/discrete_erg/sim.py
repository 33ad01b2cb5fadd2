"""Fixed-step closed-loop simulation of a plant driven by the governor.

The applied reference is held constant between governor samples (zero-order
hold) and the plant is integrated with classical RK4 sub-steps.  Constraints
are monitored at every sub-step.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    ADMISSIBILITY_TOL,
    ConstraintSet,
    ErgError,
    ErgParams,
    ErgState,
    Governor,
    KappaPolicy,
    LyapunovSpec,
    PlantModel,
    _vec,
    best_admissible_reference,
)


class NonFiniteStateError(ErgError):
    """The integrated state (or applied reference) stopped being finite."""

    def __init__(self, message: str, log: Optional["RunLog"] = None):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class SimConfig:
    t_max: float = 30.0
    substeps: int = 10
    settle_tol: float = 1e-3
    # a run only counts as settled if it stays within tolerance this long
    settle_window: float = 1.0
    # stop early once settled for this long (None: run the full horizon)
    settle_hold: Optional[float] = None
    # stop early once both violation flags are set
    stop_when_violated: bool = False

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.settle_hold is not None and self.settle_hold < self.settle_window:
            raise ValueError("settle_hold must not be shorter than settle_window")


@dataclass
class RunLog:
    """Per-sample trajectory plus violation flags and settling metrics."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    dsm: np.ndarray
    min_c: np.ndarray
    v_target: np.ndarray
    constraint_violated: bool = False
    d_invariance_violated: bool = False
    # smallest constraint value over every sub-step
    min_c_substep: float = math.inf
    # componentwise extremes of the state over every sub-step
    x_max: np.ndarray = field(default=None)
    x_min: np.ndarray = field(default=None)
    ise: float = 0.0
    settling_time: float = math.nan
    # the run ended early on a non-finite state
    diverged: bool = False

    @property
    def terminal_v(self) -> np.ndarray:
        return self.v[-1]

    @property
    def terminal_x(self) -> np.ndarray:
        return self.x[-1]

    @property
    def settled(self) -> bool:
        return not math.isnan(self.settling_time)

    def header(self) -> list[str]:
        n, m = self.x.shape[1], self.v.shape[1]
        return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{j + 1}" for j in range(m)]
                + ["kappa", "dsm", "min_c"])

    def to_csv(self, path=None) -> str:
        """Serialize one row per governor sample; returns the text as well."""
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        data = np.column_stack([self.t, self.x, self.v, self.kappa, self.dsm, self.min_c])
        for row in data:
            buf.write(",".join(_fmt(val) for val in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def summary(self) -> str:
        st = "never" if not self.settled else f"{self.settling_time:.3f}s"
        v = " ".join(f"{val:.6g}" for val in self.terminal_v)
        div = " diverged=yes" if self.diverged else ""
        return (f"violated={'yes' if self.constraint_violated else 'no'} "
                f"d_violated={'yes' if self.d_invariance_violated else 'no'} "
                f"settling={st} terminal_v=[{v}]{div}")


def _fmt(val: float) -> str:
    return "%.17g" % val


def rk4_step(plant: PlantModel, x, v, h: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step with ``v`` held constant."""
    if h <= 0:
        raise ValueError("step must be positive")
    f = plant.dynamics
    x = np.asarray(x, dtype=float)
    k1 = f(x, v)
    k2 = f(x + 0.5 * h * k1, v)
    k3 = f(x + 0.5 * h * k2, v)
    k4 = f(x + h * k3, v)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError("state became non-finite during integration")
    return out


def linear_substep_maps(A: np.ndarray, B: np.ndarray, h: float, substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked maps giving every RK4 sub-step state of ``xdot = A x + B v``.

    One RK4 step of a linear system with ``v`` held is exactly
    ``x+ = Phi x + Psi v`` with ``Phi`` the degree-4 Taylor polynomial of
    ``exp(hA)``; returns ``(Sx, Sv)`` with ``x_j = Sx[j] @ x + Sv[j] @ v``.
    """
    n = A.shape[0]
    H = h * A
    H2 = H @ H
    H3 = H2 @ H
    I = np.eye(n)
    Phi = I + H + H2 / 2.0 + H3 / 6.0 + H3 @ H / 24.0
    Psi = h * (I + H / 2.0 + H2 / 6.0 + H3 / 24.0) @ B
    Sx = np.empty((substeps, n, n))
    Sv = np.empty((substeps, n, B.shape[1]))
    X, U = I, np.zeros_like(Psi)
    for j in range(substeps):
        X = Phi @ X
        U = Phi @ U + Psi
        Sx[j] = X
        Sv[j] = U
    return Sx, Sv


def simulate(plant: PlantModel, lyap: LyapunovSpec, cons: ConstraintSet, params: ErgParams,
             sim: SimConfig, x0, v0, r, policy: Optional[KappaPolicy] = None) -> RunLog:
    """Run the governor and plant from ``(x0, v0)`` towards ``r``.

    At each sample ``t_k = k dt`` the governor produces ``v_k`` from ``x(t_k)``
    and ``v_{k-1}`` (with ``v_{-1} = v0``); ``v_k`` is then held over
    ``[t_k, t_{k+1})``.  The logged DSM is the one at the updated pair
    ``(x(t_k), v_k)``.  Divergence raises :class:`NonFiniteStateError` carrying
    the partial log.
    """
    if policy is not None:
        params = dataclasses.replace(params, kappa=policy)
    with np.errstate(over="ignore", invalid="ignore"):
        return _simulate(plant, lyap, cons, params, sim, _vec(x0).copy(), _vec(v0), _vec(r))


def _simulate(plant, lyap, cons, params, sim, x, v0, r) -> RunLog:
    gov = Governor(params, plant, lyap, cons)
    state = ErgState(v0)
    if x.shape != (plant.n,) or state.v_prev.shape != (plant.m,) or r.shape != (plant.m,):
        raise ValueError("x0, v0 or r has the wrong dimension")

    v_target = best_admissible_reference(r, params, plant, cons)
    x_target = plant.equilibrium(v_target)
    dt = params.dt
    h = dt / sim.substeps
    n_samples = int(math.floor(sim.t_max / dt + 1e-9)) + 1
    maps = None
    if plant.linear is not None:
        Sx, Sv = linear_substep_maps(*plant.linear, h, sim.substeps)
        maps = (Sx.reshape(-1, plant.n), Sv.reshape(-1, plant.m))
    Ac, Ec, bc = cons.state_coeffs, cons.ref_coeffs, cons.offsets
    tol = sim.settle_tol

    ts, xs, vs, kappas, dsms, mincs = [], [], [], [], [], []
    violated = d_violated = False
    min_c_sub = math.inf
    x_max = x.copy()
    x_min = x.copy()
    ise = 0.0
    settle_since = math.nan

    def finish(diverged: bool = False) -> RunLog:
        held = (not diverged and not math.isnan(settle_since)
                and ts[-1] - settle_since >= sim.settle_window - 1e-12)
        return RunLog(
            t=np.array(ts), x=np.array(xs).reshape(-1, plant.n), v=np.array(vs).reshape(-1, plant.m),
            kappa=np.array(kappas), dsm=np.array(dsms), min_c=np.array(mincs), v_target=v_target,
            constraint_violated=violated, d_invariance_violated=d_violated, min_c_substep=min_c_sub,
            x_max=x_max, x_min=x_min, ise=ise, settling_time=settle_since if held else math.nan,
            diverged=diverged,
        )

    for k in range(n_samples):
        t = k * dt
        v, info = gov.step(x, state, r)
        if not np.all(np.isfinite(v)):
            raise NonFiniteStateError("applied reference became non-finite", finish(True))

        if np.any(gov.constraints_at_equilibrium(v) < params.delta - ADMISSIBILITY_TOL):
            d_violated = True
        cmin = float(np.min(bc - Ac @ x - Ec @ v))
        min_c_sub = min(min_c_sub, cmin)
        if cmin < -ADMISSIBILITY_TOL:
            violated = True
        ts.append(t)
        xs.append(x)
        vs.append(v)
        kappas.append(info.kappa)
        dsms.append(gov.dsm(x, v))
        mincs.append(cmin)

        ex = x - x_target
        ev = v - v_target
        settled = math.sqrt(float(ex @ ex)) < tol and math.sqrt(float(ev @ ev)) < tol
        if settled:
            if math.isnan(settle_since):
                settle_since = t
        else:
            settle_since = math.nan

        if k == n_samples - 1:
            break
        if sim.stop_when_violated and violated and d_violated:
            break
        if sim.settle_hold is not None and settled and t - settle_since >= sim.settle_hold - 1e-12:
            break

        if maps is not None:
            X = (maps[0] @ x + maps[1] @ v).reshape(sim.substeps, plant.n)
            if not np.all(np.isfinite(X)):
                raise NonFiniteStateError("state became non-finite during integration", finish(True))
        else:
            X = np.empty((sim.substeps, plant.n))
            xj = x
            for j in range(sim.substeps):
                try:
                    xj = rk4_step(plant, xj, v, h)
                except NonFiniteStateError as exc:
                    exc.log = finish(True)
                    raise
                X[j] = xj
        err = np.sum((X - x_target) ** 2, axis=1)
        ise += 0.5 * h * (float(ex @ ex) + 2.0 * float(err[:-1].sum()) + float(err[-1]))
        np.maximum(x_max, X.max(axis=0), out=x_max)
        np.minimum(x_min, X.min(axis=0), out=x_min)
        cmin = float(np.min(bc - X @ Ac.T - Ec @ v))
        min_c_sub = min(min_c_sub, cmin)
        if cmin < -ADMISSIBILITY_TOL:
            violated = True
        x = X[-1].copy()

    return finish()
