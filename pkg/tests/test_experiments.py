import math

import numpy as np
import pytest

from discrete_erg import DYNAMIC, KappaPolicy
from discrete_erg.experiments import (
    REPORT_HEADER,
    MonteCarloSpec,
    VariantResult,
    convergence_checks,
    run_aircraft_comparison,
    run_convergence_comparison,
    run_drone_comparison,
    run_table1,
)

AC_STALL_LIMIT_DEG = 14.7


@pytest.fixture(scope="module")
def small_table():
    return run_table1(MonteCarloSpec(runs=40, seed=11))


@pytest.fixture(scope="module")
def convergence():
    return run_convergence_comparison()


@pytest.fixture(scope="module")
def aircraft_report():
    return run_aircraft_comparison()


@pytest.fixture(scope="module")
def drone_report():
    return run_drone_comparison()


def test_beta_stream_is_per_index():
    a = MonteCarloSpec(runs=10, seed=5)
    b = MonteCarloSpec(runs=1000, seed=5)
    np.testing.assert_array_equal(a.betas(), b.betas()[:10])
    assert a.beta(3) == b.beta(3)
    assert MonteCarloSpec(seed=6).beta(3) != a.beta(3)


def test_beta_range():
    betas = MonteCarloSpec(runs=500, seed=1).betas()
    assert betas.min() >= -50.0 and betas.max() < 0.95
    assert len(np.unique(betas)) == 500


def test_spec_validation():
    with pytest.raises(ValueError):
        MonteCarloSpec(runs=0)
    with pytest.raises(ValueError):
        MonteCarloSpec(seed=-1)


def test_table_rows(small_table):
    assert [r.variant for r in small_table.rows] == ["dynamic", "fixed:0.1", "fixed:0.4", "fixed:0.7", "fixed:1"]
    for r in small_table.rows:
        assert r.runs == 40
        assert 0.0 <= r.violation_rate_pct <= 100.0
        assert 0.0 <= r.d_violation_rate_pct <= 100.0


def test_table_dynamic_zero(small_table):
    row = small_table.row(DYNAMIC)
    assert row.violations == 0 and row.d_violations == 0 and row.diverged == 0


def test_table_monotone(small_table):
    rates = [small_table.row(KappaPolicy.fixed(k)).violation_rate_pct for k in (0.1, 0.4, 0.7, 1.0)]
    assert rates == sorted(rates)


def test_table_deterministic(small_table):
    again = run_table1(MonteCarloSpec(runs=40, seed=11))
    assert again.to_csv() == small_table.to_csv()


def test_table_single_equilibrium_start():
    spec = MonteCarloSpec(runs=1, beta_low=0.0, beta_high=0.0, variants=(DYNAMIC,))
    assert spec.beta(0) == 0.0
    row = run_table1(spec).row(DYNAMIC)
    assert row.violations == 0 and row.d_violations == 0


def test_report_csv(small_table, tmp_path):
    text = small_table.to_csv(tmp_path / "t.csv")
    lines = text.splitlines()
    assert lines[0] == REPORT_HEADER
    assert len(lines) == 6
    assert (tmp_path / "t.csv").read_text(encoding="utf-8") == text


def test_rates_are_exact_counts():
    r = VariantResult("x", runs=3, violations=1, d_violations=2)
    assert r.violation_rate_pct == 100.0 / 3
    assert r.d_violation_rate_pct == 200.0 / 3


def test_convergence_passes(convergence):
    for name, ok, detail in convergence_checks(convergence):
        assert ok, f"{name}: {detail}"


def test_convergence_fixed_zero_frozen(convergence):
    log = convergence.log(KappaPolicy.fixed(0.0))
    np.testing.assert_array_equal(log.v[:, 0], -1.0)
    assert not log.settled


def test_convergence_write(convergence, tmp_path):
    convergence.write(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["double-integrator.csv", "double-integrator_dynamic.csv", "double-integrator_fixed_0.csv",
                     "double-integrator_fixed_1.csv"]


def test_aircraft_fixed_zero_stays(aircraft_report):
    log = aircraft_report.log(KappaPolicy.fixed(0.0))
    np.testing.assert_allclose(log.x[:, 0], 0.0, atol=1e-12)


def test_aircraft_fast_gain_violates(aircraft_report):
    log = aircraft_report.log(KappaPolicy.fixed(1e-3))
    assert log.constraint_violated
    assert aircraft_report.row(KappaPolicy.fixed(1e-3)).violation_rate_pct == 100.0


def test_aircraft_dynamic_safe(aircraft_report):
    log = aircraft_report.log(DYNAMIC)
    assert not log.constraint_violated and not log.d_invariance_violated
    assert math.degrees(log.x_max[0]) < AC_STALL_LIMIT_DEG


def test_drone_fixed_zero_holds(drone_report):
    log = drone_report.log(KappaPolicy.fixed(0.0))
    np.testing.assert_array_equal(log.v, np.zeros_like(log.v))
    np.testing.assert_allclose(log.x, 0.0, atol=1e-12)


def test_drone_dynamic(drone_report):
    log = drone_report.log(DYNAMIC)
    assert not log.constraint_violated
    assert log.terminal_v[1] == pytest.approx(0.96, abs=1e-2)
