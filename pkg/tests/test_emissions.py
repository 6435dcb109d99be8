import pytest
from hypothesis import given
from hypothesis import strategies as st

from atsc.emissions import (
    CepCurve,
    EmissionLedger,
    EmissionParams,
    accumulate_emissions,
    co2_rate,
    engine_power,
    wheel_power,
)
from atsc.sim import LANES, Movement, TrafficSnapshot, Vehicle

REF = EmissionParams(m_veh=1500.0, m_load=0.0, m_rot=0.0, f_r=0.012, rho=1.2, c_d=0.35, area=2.2, gradient=0.0, g=9.81)
CURVE = CepCurve()


def test_wheel_power_zero_speed():
    assert wheel_power(0.0, 2.0, REF) == 0.0


def test_wheel_power_reference_point():
    # hand evaluation: rolling 1500*9.81*0.012*10, drag 0.5*1.2*0.35*2.2*10**3
    p_roll = 1500 * 9.81 * 0.012 * 10
    p_air = 0.5 * 1.2 * 0.35 * 2.2 * 1000
    assert p_roll == pytest.approx(1765.8, abs=1e-9)
    assert p_air == pytest.approx(462.0, abs=1e-9)
    assert wheel_power(10.0, 0.0, REF) == pytest.approx(2227.8, abs=1e-9)


def test_wheel_power_grade_and_inertia_terms():
    p = EmissionParams(m_veh=1000.0, m_load=200.0, m_rot=50.0, gradient=0.02)
    flat = EmissionParams(m_veh=1000.0, m_load=200.0, m_rot=50.0)
    assert wheel_power(5.0, 0.0, p) - wheel_power(5.0, 0.0, flat) == pytest.approx(1200 * 9.81 * 0.02 * 5)
    assert wheel_power(5.0, 1.0, flat) - wheel_power(5.0, 0.0, flat) == pytest.approx(1250 * 5.0)


def test_engine_power():
    assert engine_power(2227.8, 0.9) == pytest.approx(2475.3333333333, abs=1e-6)
    assert engine_power(-5000.0, 0.9) == 0.0
    assert engine_power(1234.5, 1.0) == 1234.5
    with pytest.raises(ValueError):
        engine_power(1.0, 0.0)


def test_co2_idle_rate():
    assert co2_rate(0.0, CURVE) == pytest.approx(0.3, abs=1e-12)


def test_co2_breakpoint_and_midpoint():
    assert co2_rate(20_000.0, CURVE) == pytest.approx(9000.0 / 3600.0, abs=1e-12)
    assert co2_rate(35_000.0, CURVE) == pytest.approx((9000.0 + 18000.0) / 2 / 3600.0, abs=1e-12)
    assert co2_rate(1e9, CURVE) == pytest.approx(27000.0 / 3600.0)


def test_cep_validation():
    with pytest.raises(ValueError):
        CepCurve((0.0, 5.0, 5.0), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        CepCurve((0.0, 5.0), (2.0, 1.0))
    with pytest.raises(ValueError):
        EmissionParams(eta=1.2)


def test_empty_snapshot_leaves_total():
    ledger = EmissionLedger(pe_total=12.5)
    accumulate_emissions(ledger, TrafficSnapshot(), REF, CURVE)
    assert ledger.pe_total == 12.5


def test_idling_vehicle_ten_seconds():
    snap = TrafficSnapshot()
    snap.lanes[0] = [Vehicle(0, LANES[0], Movement.LEFT, 500.0, 0.0)]
    ledger = EmissionLedger()
    for _ in range(10):
        accumulate_emissions(ledger, snap, REF, CURVE)
    assert ledger.pe_total == pytest.approx(3.0, abs=1e-12)


@given(v=st.floats(0.5, 20.0), a1=st.floats(-3.0, 3.0), a2=st.floats(-3.0, 3.0))
def test_rate_monotone_in_acceleration(v, a1, a2):
    lo, hi = sorted((a1, a2))
    r_lo = co2_rate(engine_power(wheel_power(v, lo, REF), REF.eta), CURVE)
    r_hi = co2_rate(engine_power(wheel_power(v, hi, REF), REF.eta), CURVE)
    assert r_hi >= r_lo >= 0.0
    if wheel_power(v, lo, REF) > 0 and hi - lo > 1e-6 and wheel_power(v, hi, REF) / REF.eta < 80_000:
        assert r_hi > r_lo
