"""Signal phases, the min-green/yellow interlock and the benchmark controllers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Protocol, Sequence

from .sim import LANE_INDEX, LANES, N_LANES, Approach, Color, DemandProfile, LaneId, Simulation


class Phase(IntEnum):
    WEG = 0
    WELG = 1
    NSG = 2
    NSLG = 3


PHASES: tuple[Phase, ...] = tuple(Phase)

PHASE_LANES: dict[Phase, frozenset[LaneId]] = {
    Phase.WEG: frozenset(LaneId(a, i) for a in (Approach.W, Approach.E) for i in (1, 2)),
    Phase.WELG: frozenset(LaneId(a, 0) for a in (Approach.W, Approach.E)),
    Phase.NSG: frozenset(LaneId(a, i) for a in (Approach.N, Approach.S) for i in (1, 2)),
    Phase.NSLG: frozenset(LaneId(a, 0) for a in (Approach.N, Approach.S)),
}

# Lane index -> the phase that serves it.  Every lane is served by exactly one phase.
LANE_PHASE: tuple[Phase, ...] = tuple(
    next(p for p in PHASES if lane in PHASE_LANES[p]) for lane in LANES
)


def conflicting(a: LaneId, b: LaneId) -> bool:
    """Movements served by different phases may not be green together."""
    return LANE_PHASE[LANE_INDEX[a]] != LANE_PHASE[LANE_INDEX[b]]


class ControllerKind(str, Enum):
    FIXED = "fixed"
    ACTUATED = "actuated"
    TE = "te"
    SED = "sed"


@dataclass
class PhaseMachine:
    """Signal state with latched phase requests.

    A request for another phase is held in ``pending`` until the active
    green has lasted ``min_green`` seconds; the switch then runs ``yellow``
    seconds of amber on the outgoing lanes before the target turns green.
    """

    active: Phase = Phase.WEG
    elapsed_green: int = 0
    in_yellow: bool = False
    yellow_remaining: int = 0
    pending: Optional[Phase] = None
    min_green: int = 10
    yellow: int = 4

    def request(self, target: Phase) -> "PhaseMachine":
        target = Phase(target)
        if self.in_yellow:
            return self
        self.pending = None if target == self.active else target
        return self

    def colors(self) -> tuple[Color, ...]:
        served = PHASE_LANES[self.active]
        on = Color.YELLOW if self.in_yellow else Color.GREEN
        return tuple(on if lane in served else Color.RED for lane in LANES)

    def tick(self) -> tuple[Color, ...]:
        """Return this second's lane colors and advance the timers by 1 s."""
        if not self.in_yellow and self.pending is not None and self.elapsed_green >= self.min_green:
            self.in_yellow = True
            self.yellow_remaining = self.yellow
        colors = self.colors()
        if self.in_yellow:
            self.yellow_remaining -= 1
            if self.yellow_remaining == 0:
                self.active = self.pending
                self.pending = None
                self.in_yellow = False
                self.elapsed_green = 0
        else:
            self.elapsed_green += 1
        return colors


def request_phase(machine: PhaseMachine, target: Phase) -> PhaseMachine:
    return machine.request(target)


def tick(machine: PhaseMachine) -> tuple[Color, ...]:
    return machine.tick()


def next_phase(phase: Phase) -> Phase:
    return Phase((int(phase) + 1) % len(PHASES))


class InfeasibleDemandError(ValueError):
    pass


@dataclass(frozen=True)
class WebsterPlan:
    cycle: float
    lost_time: float
    flow_ratios: tuple[float, ...]
    greens: tuple[float, ...]

    @property
    def schedule(self) -> list[tuple[Phase, int]]:
        """Integer-second greens per phase in rotation order."""
        return [(p, max(1, round(g))) for p, g in zip(PHASES, self.greens)]


def critical_flow_ratios(demand: DemandProfile, saturation_flow: float = 1800.0) -> tuple[float, ...]:
    flows = demand.lane_flows()
    return tuple(max(flows[lane] for lane in PHASE_LANES[p]) / saturation_flow for p in PHASES)


def webster_fixed_time(
    demand: DemandProfile,
    saturation_flow: float = 1800.0,
    yellow: float = 4.0,
    min_green: float = 10.0,
) -> WebsterPlan:
    """Webster optimal cycle with proportional green splits.

    Lost time is one yellow per phase.  Each green is floored at
    ``min_green``, so the realised cycle can exceed the optimum.
    """
    ratios = critical_flow_ratios(demand, saturation_flow)
    total = sum(ratios)
    if total >= 1.0:
        raise InfeasibleDemandError(f"critical flow ratio sum Y={total:.3f} must be < 1")
    lost = yellow * len(PHASES)
    cycle = (1.5 * lost + 5.0) / (1.0 - total)
    effective = cycle - lost
    if total > 0:
        shares = [y / total for y in ratios]
    else:
        shares = [1.0 / len(PHASES)] * len(PHASES)
    greens = tuple(max(min_green, s * effective) for s in shares)
    return WebsterPlan(cycle, lost, ratios, greens)


def webster_cycle(total_ratio: float, lost_time: float) -> float:
    if total_ratio >= 1.0:
        raise InfeasibleDemandError(f"critical flow ratio sum Y={total_ratio:.3f} must be < 1")
    return (1.5 * lost_time + 5.0) / (1.0 - total_ratio)


class Controller(Protocol):
    def decide(self, sim: Simulation, machine: PhaseMachine) -> Optional[Phase]:
        ...


@dataclass
class FixedTimeController:
    schedule: list[tuple[Phase, int]]

    def decide(self, sim: Simulation, machine: PhaseMachine) -> Optional[Phase]:
        greens = dict(self.schedule)
        if machine.in_yellow:
            return None
        if machine.elapsed_green >= greens.get(machine.active, machine.min_green):
            order = [p for p, _ in self.schedule]
            i = order.index(machine.active) if machine.active in order else -1
            return order[(i + 1) % len(order)]
        return machine.active


@dataclass
class DetectorState:
    """Seconds since each lane's detector last saw a vehicle."""

    since: tuple[float, ...]

    @classmethod
    def from_sim(cls, sim: Simulation) -> "DetectorState":
        now = sim.snapshot.time
        return cls(tuple(now - t for t in sim.last_detection))


@dataclass
class ActuatedController:
    gap_time: float = 3.0
    max_green: int = 60

    def decide_from(self, detectors: DetectorState, machine: PhaseMachine) -> Optional[Phase]:
        if machine.in_yellow:
            return None
        if machine.elapsed_green < machine.min_green:
            return machine.active
        if machine.elapsed_green >= self.max_green:
            return next_phase(machine.active)
        served = [LANE_INDEX[lane] for lane in PHASE_LANES[machine.active]]
        # a detection during the last completed second has age 0
        newest = min(detectors.since[k] for k in served)
        if newest >= self.gap_time:
            return next_phase(machine.active)
        return machine.active

    def decide(self, sim: Simulation, machine: PhaseMachine) -> Optional[Phase]:
        return self.decide_from(DetectorState.from_sim(sim), machine)


def actuated_controller(detector_state: DetectorState, machine: PhaseMachine, gap_time=3.0, max_green=60):
    return ActuatedController(gap_time, max_green).decide_from(detector_state, machine)


@dataclass
class SignalAudit:
    """Streaming checker for the interlock rules on emitted lane colors."""

    min_green: int = 10
    yellow: int = 4
    violations: list[str] = field(default_factory=list)
    _prev: Optional[tuple[Color, ...]] = None
    _run: list[int] = field(default_factory=lambda: [0] * N_LANES)
    _t: int = 0

    def observe(self, colors: Sequence[Color]) -> None:
        greens = [LANES[k] for k, c in enumerate(colors) if c == Color.GREEN]
        for i, a in enumerate(greens):
            for b in greens[i + 1 :]:
                if conflicting(a, b):
                    self.violations.append(f"t={self._t}: conflicting greens {a} and {b}")
        if self._prev is not None:
            for k, (old, new) in enumerate(zip(self._prev, colors)):
                if old == new:
                    continue
                if old == Color.GREEN:
                    if self._run[k] < self.min_green:
                        self.violations.append(f"t={self._t}: lane {LANES[k]} green only {self._run[k]} s")
                    if new != Color.YELLOW:
                        self.violations.append(f"t={self._t}: lane {LANES[k]} green->{new.name} without yellow")
                elif old == Color.YELLOW:
                    if self._run[k] != self.yellow:
                        self.violations.append(f"t={self._t}: lane {LANES[k]} yellow lasted {self._run[k]} s")
                    if new != Color.RED:
                        self.violations.append(f"t={self._t}: lane {LANES[k]} yellow->{new.name}")
        for k, c in enumerate(colors):
            if self._prev is not None and self._prev[k] == c:
                self._run[k] += 1
            else:
                self._run[k] = 1
        self._prev = tuple(colors)
        self._t += 1


__all__ = [
    "ActuatedController",
    "Controller",
    "ControllerKind",
    "DetectorState",
    "FixedTimeController",
    "InfeasibleDemandError",
    "LANE_PHASE",
    "PHASES",
    "PHASE_LANES",
    "Phase",
    "PhaseMachine",
    "SignalAudit",
    "WebsterPlan",
    "actuated_controller",
    "conflicting",
    "critical_flow_ratios",
    "next_phase",
    "request_phase",
    "tick",
    "webster_cycle",
    "webster_fixed_time",
]
