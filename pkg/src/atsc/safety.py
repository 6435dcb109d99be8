"""Time-to-collision and cumulative rear-end conflict counting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .sim import TrafficSnapshot, Vehicle

TTC_THRESHOLD = 3.0


def ttc_from_gap(gap: float, follower_speed: float, leader_speed: float) -> Optional[float]:
    closing = follower_speed - leader_speed
    if closing <= 0:
        return None
    return gap / closing


def ttc(follower: Vehicle, leader: Vehicle) -> Optional[float]:
    """Seconds until the follower reaches the leader's rear at current speeds.

    ``None`` when the pair is not closing.
    """
    gap = leader.pos - leader.length - follower.pos
    return ttc_from_gap(gap, follower.speed, leader.speed)


def lane_conflicts(lane: Sequence[Vehicle], threshold: float = TTC_THRESHOLD) -> int:
    count = 0
    for leader, follower in zip(lane, lane[1:]):
        value = ttc(follower, leader)
        if value is not None and value < threshold:
            count += 1
    return count


def step_conflicts(snapshot: TrafficSnapshot, threshold: float = TTC_THRESHOLD) -> int:
    """Adjacent same-lane pairs whose TTC is strictly below ``threshold``."""
    return sum(lane_conflicts(lane, threshold) for lane in snapshot.lanes)


def conflict_pairs(snapshot: TrafficSnapshot, threshold: float = TTC_THRESHOLD) -> set[tuple[int, int]]:
    pairs = set()
    for lane in snapshot.lanes:
        for leader, follower in zip(lane, lane[1:]):
            value = ttc(follower, leader)
            if value is not None and value < threshold:
                pairs.add((follower.id, leader.id))
    return pairs


@dataclass
class ConflictLedger:
    ctc: int = 0
    history: list[int] = field(default_factory=list)

    def add(self, step_count: int) -> "ConflictLedger":
        if step_count < 0:
            raise ValueError("step conflict count must be >= 0")
        self.ctc += step_count
        self.history.append(step_count)
        return self


def accumulate(ledger: ConflictLedger, step_count: int) -> ConflictLedger:
    return ledger.add(step_count)


@dataclass
class ConflictEvents:
    """Counts conflict onsets: a pair contributes once per uninterrupted episode."""

    total: int = 0
    _active: set[tuple[int, int]] = field(default_factory=set)

    def observe(self, pairs: Iterable[tuple[int, int]]) -> int:
        pairs = set(pairs)
        new = len(pairs - self._active)
        self._active = pairs
        self.total += new
        return new
