"""Power-based CO2 emission model.

Wheel power is the sum of rolling, aerodynamic, inertial and grade
resistance terms.  Engine power is wheel power divided by the gearbox
efficiency, and the CO2 rate is read off a characteristic emission-over-power
curve (CEP) by linear interpolation.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .sim import TrafficSnapshot


@dataclass(frozen=True)
class EmissionParams:
    m_veh: float = 1500.0
    m_load: float = 0.0
    m_rot: float = 0.0
    f_r: float = 0.012
    rho: float = 1.2
    c_d: float = 0.35
    area: float = 2.2
    gradient: float = 0.0
    eta: float = 0.9
    g: float = 9.81

    def __post_init__(self) -> None:
        if self.m_veh <= 0 or self.m_load < 0 or self.m_rot < 0:
            raise ValueError("emission masses must be positive (load and rotational mass >= 0)")
        if not 0 < self.eta <= 1:
            raise ValueError("emission.eta must lie in (0, 1]")
        for name in ("f_r", "rho", "c_d", "area", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"emission.{name} must be positive")


@dataclass(frozen=True)
class CepCurve:
    """Breakpoints of engine power (kW) against CO2 rate (g/h).

    The first breakpoint is the idle point at 0 kW.
    """

    power_kw: tuple[float, ...] = (0.0, 5.0, 20.0, 50.0, 80.0)
    rate_gph: tuple[float, ...] = (1080.0, 3600.0, 9000.0, 18000.0, 27000.0)

    def __post_init__(self) -> None:
        p, r = self.power_kw, self.rate_gph
        if len(p) != len(r) or len(p) < 2:
            raise ValueError("CEP curve needs matching power and rate breakpoints (at least two)")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("CEP power breakpoints must be strictly increasing")
        if any(x < 0 for x in r) or any(b < a for a, b in zip(r, r[1:])):
            raise ValueError("CEP rates must be non-negative and non-decreasing")
        if p[0] != 0.0:
            raise ValueError("CEP curve must start at 0 kW (idle point)")

    @property
    def idle_gph(self) -> float:
        return self.rate_gph[0]


def wheel_power(v: float, a: float, p: EmissionParams) -> float:
    """Tractive power at the wheels in watts; negative while braking."""
    m = p.m_veh + p.m_load
    p_roll = m * p.g * p.f_r * v
    p_air = 0.5 * p.rho * p.c_d * p.area * v**3
    p_accel = (m + p.m_rot) * a * v
    p_grad = m * p.g * p.gradient * v
    return p_roll + p_air + p_accel + p_grad


def engine_power(wheel: float, eta: float) -> float:
    if not 0 < eta <= 1:
        raise ValueError("gearbox efficiency must lie in (0, 1]")
    return wheel / eta if wheel > 0 else 0.0


def co2_rate(engine: float, curve: CepCurve) -> float:
    """CO2 rate in g/s for an engine power in watts."""
    if engine <= 0:
        return curve.idle_gph / 3600.0
    kw = engine / 1000.0
    xs, ys = curve.power_kw, curve.rate_gph
    if kw >= xs[-1]:
        return ys[-1] / 3600.0
    i = bisect.bisect_right(xs, kw)
    x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
    return (y0 + (y1 - y0) * (kw - x0) / (x1 - x0)) / 3600.0


def vehicle_co2(v: float, a: float, params: EmissionParams, curve: CepCurve) -> float:
    return co2_rate(engine_power(wheel_power(v, a, params), params.eta), curve)


@dataclass
class EmissionLedger:
    pe_total: float = 0.0
    history: list[float] = field(default_factory=list)


def step_emissions(snapshot: TrafficSnapshot, params: EmissionParams, curve: CepCurve, dt: float = 1.0) -> float:
    # fsum makes the step total independent of vehicle order
    return math.fsum(vehicle_co2(v.speed, v.accel, params, curve) * dt for v in snapshot.vehicles)


def accumulate_emissions(
    ledger: EmissionLedger,
    snapshot: TrafficSnapshot,
    params: EmissionParams,
    curve: CepCurve,
    dt: float = 1.0,
) -> EmissionLedger:
    grams = step_emissions(snapshot, params, curve, dt)
    ledger.pe_total += grams
    ledger.history.append(grams)
    return ledger


def rates_for(speeds: Sequence[float], accels: Sequence[float], params: EmissionParams, curve: CepCurve) -> list[float]:
    return [vehicle_co2(v, a, params, curve) for v, a in zip(speeds, accels)]
