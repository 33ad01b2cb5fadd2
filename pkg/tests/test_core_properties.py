import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from discrete_erg import (
    ErgParams,
    ErgState,
    INVARIANCE_ONLY,
    attraction_field,
    bebop_drone,
    double_integrator,
    dsm,
    erg_step,
    kappa_feasibility_bound,
    kappa_invariance_bound,
    repulsion_field,
    threshold_gamma,
    threshold_gamma_hat,
)

DI = double_integrator()
DRONE = bebop_drone()
finite = st.floats(-5.0, 5.0, allow_nan=False)
vec3 = st.lists(finite, min_size=3, max_size=3)


@given(v=st.lists(finite, min_size=3, max_size=3), r=vec3, eta=st.floats(1e-4, 1.0))
def test_attraction_norm_at_most_one(v, r, eta):
    n = np.linalg.norm(attraction_field(v, r, eta))
    assert n <= 1.0 + 1e-12
    if np.linalg.norm(np.subtract(r, v)) >= eta:
        assert math.isclose(n, 1.0, rel_tol=1e-12)


@given(v=st.floats(-3.0, 1.5))
def test_repulsion_vanishes_iff_inactive(v):
    p = DI.params
    c = 1.0 - v
    out = repulsion_field([v], DI.plant, DI.cons, p.xi, p.delta)
    if c >= p.xi:
        assert out[0] == 0.0
    else:
        assert out[0] < 0.0
        assert math.isclose(abs(out[0]), (p.xi - c) / (p.xi - p.delta), rel_tol=1e-12)


@given(v=st.floats(-5.0, 1.0))
def test_gamma_hat_below_gamma_double_integrator(v):
    g = threshold_gamma([v], DI.lyap, DI.cons, DI.plant)
    assert threshold_gamma_hat([v], DI.lyap, DI.cons, DI.plant) <= g + 1e-9


@given(v=st.tuples(finite, st.floats(-5.0, 1.0), finite))
def test_gamma_hat_below_gamma_drone(v):
    g = threshold_gamma(v, DRONE.lyap, DRONE.cons, DRONE.plant)
    assert threshold_gamma_hat(v, DRONE.lyap, DRONE.cons, DRONE.plant) <= g + 1e-9


@settings(max_examples=300)
@given(v=st.floats(-20.0, 0.96), e=st.tuples(st.floats(-3, 3), st.floats(-10, 10)), r=st.floats(-20, 20))
def test_feasibility_bound_below_invariance_bound(v, e, r):
    x = np.array([v + e[0], e[1]])
    theta = 0.96 - v
    args = (x, [v], [r], theta, DI.params, DI.plant, DI.lyap, DI.cons)
    assert kappa_feasibility_bound(*args) <= kappa_invariance_bound(*args) + 1e-15


@settings(max_examples=300)
@given(v=st.floats(-20.0, 0.96), e=st.tuples(st.floats(-3, 3), st.floats(-10, 10)), r=st.floats(-20, 20),
       invariance=st.booleans())
def test_step_keeps_reference_admissible(v, e, r, invariance):
    params = DI.params
    if invariance:
        params = ErgParams(**{**params.__dict__, "kappa": INVARIANCE_ONLY})
    x = np.array([v + e[0], e[1]])
    v_new, _ = erg_step(x, ErgState([v]), [r], params, DI.plant, DI.lyap, DI.cons)
    assert 1.0 - v_new[0] >= params.delta - 1e-9


@settings(max_examples=200)
@given(v=st.floats(-5.0, 0.99), angle=st.floats(0, 2 * math.pi), frac=st.floats(0.0, 1.0))
def test_level_set_inside_constraints(v, angle, frac):
    # a nonnegative margin means the whole sub-level set through x is safe
    P = DI.P
    gamma = threshold_gamma([v], DI.lyap, DI.cons, DI.plant)
    L = np.linalg.cholesky(P)
    u = np.array([math.cos(angle), math.sin(angle)])
    e = math.sqrt(gamma * frac) * np.linalg.solve(L.T, u)
    x = DI.plant.equilibrium([v]) + e
    assert dsm(x, [v], DI.lyap, DI.cons, DI.plant) >= -1e-9
    assert 1.0 - x[0] >= -1e-9
