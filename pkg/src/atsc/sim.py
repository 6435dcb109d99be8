"""Deterministic 1 Hz microsimulation of an isolated four-leg intersection.

Each approach has three lanes: lane 0 carries left turns, lane 1 through
traffic and lane 2 through-or-right traffic.  Vehicle positions are measured
from the lane entry (0) towards the stop line (``lane_length``) and always
refer to the front bumper.  Car following uses the Intelligent Driver Model;
a red or yellow light is a standing virtual leader at the stop line.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np


class Approach(str, Enum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"


APPROACHES: tuple[Approach, ...] = (Approach.N, Approach.S, Approach.E, Approach.W)


class Movement(str, Enum):
    LEFT = "L"
    THROUGH = "T"
    RIGHT = "R"


class Color(IntEnum):
    RED = 0
    YELLOW = 1
    GREEN = 2


@dataclass(frozen=True, order=True)
class LaneId:
    approach: Approach
    index: int

    def __str__(self) -> str:
        return f"{self.approach.value}{self.index}"


# Fixed lane order used by every per-lane sequence in the package.
LANES: tuple[LaneId, ...] = tuple(LaneId(a, i) for a in APPROACHES for i in range(3))
LANE_INDEX: dict[LaneId, int] = {lane: k for k, lane in enumerate(LANES)}
N_LANES = len(LANES)

# Streams a right turn from the key approach merges into or crosses:
# the through lanes of one approach and the left lane of another.
_RIGHT_TURN_CONFLICTS: dict[Approach, tuple[LaneId, ...]] = {
    Approach.N: (LaneId(Approach.E, 1), LaneId(Approach.E, 2), LaneId(Approach.S, 0)),
    Approach.S: (LaneId(Approach.W, 1), LaneId(Approach.W, 2), LaneId(Approach.N, 0)),
    Approach.E: (LaneId(Approach.S, 1), LaneId(Approach.S, 2), LaneId(Approach.W, 0)),
    Approach.W: (LaneId(Approach.N, 1), LaneId(Approach.N, 2), LaneId(Approach.E, 0)),
}


class CollisionError(RuntimeError):
    """Raised in strict mode when a follower reaches its leader."""


@dataclass(frozen=True)
class IDMParams:
    v0: float = 13.9
    a_max: float = 2.0
    b: float = 3.0
    s0: float = 2.0
    T: float = 1.2
    delta: float = 4.0
    length: float = 5.0

    def __post_init__(self) -> None:
        for name in ("v0", "a_max", "b", "s0", "T", "length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"idm.{name} must be positive")


@dataclass(frozen=True)
class Geometry:
    lane_length: float = 500.0
    clearance_time: float = 3.0
    stop_threshold: float = 0.1
    yellow_time: int = 4
    rtor_gap: float = 4.0
    rtor_stop_distance: float = 1.0
    detector_distance: float = 50.0

    def __post_init__(self) -> None:
        if self.lane_length <= 0:
            raise ValueError("geometry.lane_length must be positive")


@dataclass
class DemandProfile:
    """Arrival rates (veh/h) and (left, through, right) splits per approach."""

    rates: dict[Approach, float]
    splits: dict[Approach, tuple[float, float, float]]

    def __post_init__(self) -> None:
        self.rates = {Approach(k): float(v) for k, v in self.rates.items()}
        self.splits = {Approach(k): tuple(float(x) for x in v) for k, v in self.splits.items()}
        for a in APPROACHES:
            rate = self.rates.setdefault(a, 0.0)
            if rate < 0:
                raise ValueError(f"demand.rates.{a.value} must be >= 0")
            split = self.splits.setdefault(a, (0.2, 0.6, 0.2))
            if len(split) != 3 or any(x < 0 or x > 1 for x in split):
                raise ValueError(f"demand.splits.{a.value} must be three fractions in [0, 1]")
            if abs(sum(split) - 1.0) > 1e-9:
                raise ValueError(f"demand.splits.{a.value} must sum to 1")

    @classmethod
    def uniform(cls, rate: float, split=(0.2, 0.6, 0.2)) -> "DemandProfile":
        return cls({a: rate for a in APPROACHES}, {a: split for a in APPROACHES})

    def scaled(self, factor: float) -> "DemandProfile":
        return DemandProfile({a: r * factor for a, r in self.rates.items()}, dict(self.splits))

    def lane_flows(self) -> dict[LaneId, float]:
        """Expected flow (veh/h) on every lane under the routing rule."""
        flows = {}
        for a in APPROACHES:
            left, through, right = self.splits[a]
            rate = self.rates[a]
            p1 = through_lane1_probability(through, right)
            flows[LaneId(a, 0)] = rate * left
            flows[LaneId(a, 1)] = rate * through * p1
            flows[LaneId(a, 2)] = rate * (through * (1 - p1) + right)
        return flows


def through_lane1_probability(through: float, right: float) -> float:
    # Balances expected flow between lane 1 (through) and lane 2 (through + right).
    if through <= 0:
        return 0.0
    return min(1.0, (through + right) / (2 * through))


@dataclass
class Vehicle:
    id: int
    lane: LaneId
    movement: Movement
    pos: float
    speed: float
    accel: float = 0.0
    length: float = 5.0
    waiting_time: float = 0.0
    spawn_time: float = 0.0
    crossed_at: Optional[float] = None
    # yellow / red-turn permission state
    committed: bool = False
    must_stop: bool = False

    @property
    def crossed(self) -> bool:
        return self.crossed_at is not None


@dataclass
class TrafficSnapshot:
    time: float = 0.0
    lanes: list[list[Vehicle]] = field(default_factory=lambda: [[] for _ in LANES])
    signal: tuple[Color, ...] = tuple(Color.RED for _ in LANES)
    entered: int = 0
    exited: int = 0
    banked_wait: float = 0.0

    @property
    def vehicles(self) -> Iterator[Vehicle]:
        for lane in self.lanes:
            yield from lane

    def __len__(self) -> int:
        return sum(len(lane) for lane in self.lanes)


def idm_acceleration(
    speed: float,
    params: IDMParams,
    gap: Optional[float] = None,
    leader_speed: float = 0.0,
) -> float:
    """IDM acceleration for a follower at ``speed``.

    ``gap`` is the bumper-to-bumper distance to the leader; ``None`` means a
    free road.  A non-positive gap raises :class:`CollisionError`.
    """
    free = 1.0 - (speed / params.v0) ** params.delta
    if gap is None:
        return params.a_max * free
    if gap <= 0:
        raise CollisionError(f"non-positive gap {gap!r}")
    dv = speed - leader_speed
    s_star = params.s0 + max(0.0, speed * params.T + speed * dv / (2 * math.sqrt(params.a_max * params.b)))
    return params.a_max * (free - (s_star / gap) ** 2)


def vehicle_acceleration(follower: Vehicle, leader: Optional[Vehicle], params: IDMParams) -> float:
    if leader is None:
        return idm_acceleration(follower.speed, params)
    gap = leader.pos - leader.length - follower.pos
    return idm_acceleration(follower.speed, params, gap, leader.speed)


def demand_streams(seed: int) -> dict[Approach, np.random.Generator]:
    """One independent generator per approach, derived from ``seed`` only."""
    return {
        a: np.random.default_rng(np.random.SeedSequence([seed, 1, k]))
        for k, a in enumerate(APPROACHES)
    }


def spawn_arrivals(
    streams: dict[Approach, np.random.Generator],
    demand: DemandProfile,
    t: float,
    first_id: int,
    params: IDMParams,
) -> list[Vehicle]:
    """Draw this second's Poisson arrivals for every approach.

    Returned vehicles are not inserted yet; the caller queues them at the
    lane entry.  The number of draws per stream depends only on the stream
    itself, so arrivals are independent of the control decisions.
    """
    out = []
    next_id = first_id
    for a in APPROACHES:
        rng = streams[a]
        n = int(rng.poisson(demand.rates[a] / 3600.0))
        left, through, right = demand.splits[a]
        p1 = through_lane1_probability(through, right)
        for _ in range(n):
            u, w = rng.random(2)
            if u < left:
                movement, index = Movement.LEFT, 0
            elif u < left + through:
                movement, index = Movement.THROUGH, (1 if w < p1 else 2)
            else:
                movement, index = Movement.RIGHT, 2
            out.append(
                Vehicle(
                    id=next_id,
                    lane=LaneId(a, index),
                    movement=movement,
                    pos=0.0,
                    speed=params.v0,
                    length=params.length,
                    spawn_time=t,
                )
            )
            next_id += 1
    return out


def cumulative_waiting(snapshot: TrafficSnapshot) -> float:
    """Episode waiting time: present vehicles plus those already exited."""
    return snapshot.banked_wait + sum(v.waiting_time for v in snapshot.vehicles)


class Simulation:
    """Stateful simulation of one intersection; owns its demand streams."""

    def __init__(
        self,
        demand: DemandProfile,
        seed: int,
        idm: IDMParams = IDMParams(),
        geometry: Geometry = Geometry(),
        strict: bool = True,
    ):
        self.demand = demand
        self.idm = idm
        self.geometry = geometry
        self.strict = strict
        self.streams = demand_streams(seed)
        self.snapshot = TrafficSnapshot()
        self.pending: list[deque[Vehicle]] = [deque() for _ in LANES]
        self.next_id = 0
        self.faults = 0
        self.hard_stops = 0
        self._yellow_steps = [0] * N_LANES
        self.last_detection = [-math.inf] * N_LANES

    @property
    def stop_line(self) -> float:
        return self.geometry.lane_length

    def queue_length(self) -> int:
        return sum(
            1
            for v in self.snapshot.vehicles
            if not v.crossed and v.speed < self.geometry.stop_threshold
        )

    # -- stop line logic -------------------------------------------------

    def _rtor_clear(self, approach: Approach, colors: Sequence[Color]) -> bool:
        g = self.geometry
        for lane in _RIGHT_TURN_CONFLICTS[approach]:
            k = LANE_INDEX[lane]
            if colors[k] == Color.RED:
                continue
            for v in self.snapshot.lanes[k]:
                if v.crossed:
                    return False
                dist = self.stop_line - v.pos
                if dist / max(v.speed, 0.1) < g.rtor_gap:
                    return False
        return True

    def _head_may_pass(self, k: int, head: Vehicle, color: Color, colors: Sequence[Color]) -> bool:
        g = self.geometry
        if color == Color.GREEN:
            return True
        if head.committed:
            return color == Color.YELLOW or head.movement == Movement.RIGHT
        if color == Color.YELLOW:
            if head.must_stop:
                return False
            remaining = g.yellow_time - self._yellow_steps[k] + 1
            dist = self.stop_line - head.pos
            cannot_stop = dist <= 0 or head.speed**2 / (2 * dist) > self.idm.b
            can_clear = head.speed * remaining > dist
            if cannot_stop and can_clear:
                head.committed = True
                return True
            head.must_stop = True
            return False
        # red: only a stopped right-turner at the line may go, when clear
        if (
            head.movement == Movement.RIGHT
            and self.stop_line - head.pos <= g.rtor_stop_distance
            and head.speed < g.stop_threshold
            and self._rtor_clear(head.lane.approach, colors)
        ):
            head.committed = True
            return True
        return False

    # -- main update -----------------------------------------------------

    def step(self, colors: Sequence[Color], dt: float = 1.0) -> TrafficSnapshot:
        snap = self.snapshot
        g, p = self.geometry, self.idm
        colors = tuple(Color(c) for c in colors)
        if len(colors) != N_LANES:
            raise ValueError(f"expected {N_LANES} lane colors, got {len(colors)}")
        for k, c in enumerate(colors):
            self._yellow_steps[k] = self._yellow_steps[k] + 1 if c == Color.YELLOW else 0
        t_new = snap.time + dt
        stop = self.stop_line

        for k, lane in enumerate(snap.lanes):
            if not lane:
                continue
            color = colors[k]
            if color == Color.GREEN:
                for v in lane:
                    v.must_stop = False
            # accelerations from the current state (synchronous update)
            accels = []
            restricted = [False] * len(lane)
            head_done = False
            for i, v in enumerate(lane):
                leader = lane[i - 1] if i > 0 else None
                a = vehicle_acceleration(v, leader, p)
                if not v.crossed and not head_done:
                    head_done = True
                    if not self._head_may_pass(k, v, color, colors):
                        restricted[i] = True
                        a = min(a, idm_acceleration(v.speed, p, stop + p.s0 - v.pos, 0.0))
                accels.append(a)
            for i, v in enumerate(lane):
                old_speed, old_pos = v.speed, v.pos
                new_speed = max(0.0, old_speed + accels[i] * dt)
                new_pos = old_pos + new_speed * dt
                if restricted[i] and new_pos > stop:
                    # the line is a hard boundary; Euler steps would creep past it
                    new_speed = max(0.0, stop - old_pos) / dt
                    new_pos = old_pos + new_speed * dt
                    if old_speed - new_speed > 2 * p.b * dt:
                        self.hard_stops += 1
                v.accel = (new_speed - old_speed) / dt
                v.speed = new_speed
                v.pos = new_pos
                if new_speed < g.stop_threshold:
                    v.waiting_time += dt
                det = stop - g.detector_distance
                if (old_pos < det <= new_pos) or (new_pos - v.length <= det <= new_pos):
                    self.last_detection[k] = t_new
                if v.crossed_at is None and new_pos > stop:
                    v.crossed_at = t_new
            # collision check
            for i in range(1, len(lane)):
                gap = lane[i - 1].pos - lane[i - 1].length - lane[i].pos
                if gap <= 0:
                    if self.strict:
                        raise CollisionError(
                            f"t={t_new}: vehicle {lane[i].id} reached {lane[i - 1].id} on lane {LANES[k]}"
                        )
                    self.faults += 1
                    lane[i].pos = lane[i - 1].pos - lane[i - 1].length - 1e-3
            # removal after the conflict-zone traversal
            while lane and lane[0].crossed_at is not None and t_new - lane[0].crossed_at >= g.clearance_time:
                gone = lane.pop(0)
                snap.exited += 1
                snap.banked_wait += gone.waiting_time

        # arrivals and entry
        for v in spawn_arrivals(self.streams, self.demand, t_new, self.next_id, p):
            self.pending[LANE_INDEX[v.lane]].append(v)
            self.next_id = v.id + 1
        for k, queue in enumerate(self.pending):
            if not queue:
                continue
            lane = snap.lanes[k]
            if lane and lane[-1].pos - lane[-1].length < p.s0:
                continue
            v = queue.popleft()
            v.spawn_time = t_new
            lane.append(v)
            snap.entered += 1

        snap.time = t_new
        snap.signal = colors
        return snap

    def pending_count(self) -> int:
        return sum(len(q) for q in self.pending)


def lane_sorted(lane: Sequence[Vehicle]) -> bool:
    """True when the lane list is ordered front-first without overlap."""
    positions = [-v.pos for v in lane]
    return positions == sorted(positions) and len(set(positions)) == len(positions)


__all__ = [
    "APPROACHES",
    "Approach",
    "CollisionError",
    "Color",
    "DemandProfile",
    "Geometry",
    "IDMParams",
    "LANES",
    "LANE_INDEX",
    "LaneId",
    "Movement",
    "N_LANES",
    "Simulation",
    "TrafficSnapshot",
    "Vehicle",
    "cumulative_waiting",
    "demand_streams",
    "idm_acceleration",
    "spawn_arrivals",
    "vehicle_acceleration",
]
