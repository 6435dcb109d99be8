import math

import numpy as np
import pytest

from atsc.sim import (
    APPROACHES,
    LANE_INDEX,
    LANES,
    Approach,
    CollisionError,
    Color,
    DemandProfile,
    IDMParams,
    LaneId,
    Movement,
    Simulation,
    TrafficSnapshot,
    Vehicle,
    cumulative_waiting,
    demand_streams,
    idm_acceleration,
    spawn_arrivals,
)

P = IDMParams()
RED = [Color.RED] * len(LANES)
GREEN = [Color.GREEN] * len(LANES)


def empty_sim(**kw):
    return Simulation(DemandProfile.uniform(0.0), seed=0, **kw)


def put(sim, lane_k, pos, speed, movement=Movement.THROUGH, vid=None):
    lane = sim.snapshot.lanes[lane_k]
    v = Vehicle(vid if vid is not None else 1000 + len(lane), LANES[lane_k], movement, pos, speed)
    lane.append(v)
    lane.sort(key=lambda x: -x.pos)
    sim.snapshot.entered += 1
    return v


# -- spawn_arrivals -----------------------------------------------------------


def test_zero_rate_never_spawns():
    streams = demand_streams(3)
    demand = DemandProfile.uniform(0.0)
    assert all(not spawn_arrivals(streams, demand, t, 0, P) for t in range(2000))


def test_poisson_total_within_three_sigma():
    demand = DemandProfile({"N": 600.0}, {})
    streams = demand_streams(42)
    total = sum(len(spawn_arrivals(streams, demand, t, 0, P)) for t in range(3600))
    assert abs(total - 600) <= 3 * math.sqrt(600)


def test_degenerate_split_routes_left():
    demand = DemandProfile.uniform(900.0, (1.0, 0.0, 0.0))
    streams = demand_streams(1)
    spawned = [v for t in range(600) for v in spawn_arrivals(streams, demand, t, 0, P)]
    assert spawned
    assert all(v.movement == Movement.LEFT and v.lane.index == 0 for v in spawned)
    assert all(v.pos == 0.0 and v.speed == P.v0 for v in spawned)


def test_routing_respects_lane_movements():
    demand = DemandProfile.uniform(1200.0)
    streams = demand_streams(5)
    spawned = [v for t in range(900) for v in spawn_arrivals(streams, demand, t, 0, P)]
    for v in spawned:
        if v.movement == Movement.LEFT:
            assert v.lane.index == 0
        elif v.movement == Movement.RIGHT:
            assert v.lane.index == 2
        else:
            assert v.lane.index in (1, 2)


def test_demand_validation():
    with pytest.raises(ValueError):
        DemandProfile({"N": -1.0}, {})
    with pytest.raises(ValueError):
        DemandProfile({"N": 1.0}, {"N": (0.5, 0.5, 0.5)})


# -- IDM ----------------------------------------------------------------------


def test_idm_free_flow_equilibrium():
    assert idm_acceleration(P.v0, P) == 0.0


def test_idm_standstill_free_road():
    assert idm_acceleration(0.0, P) == P.a_max


def test_idm_standstill_equilibrium():
    assert idm_acceleration(0.0, P, gap=P.s0, leader_speed=0.0) == 0.0


def test_idm_nonpositive_gap_is_fault():
    with pytest.raises(CollisionError):
        idm_acceleration(5.0, P, gap=0.0, leader_speed=5.0)


# -- step -----------------------------------------------------------------------


def test_empty_step_advances_time():
    sim = empty_sim()
    snap = sim.step(GREEN)
    assert snap.time == 1.0 and len(snap) == 0 and snap.entered == snap.exited == 0


def test_free_flow_green_advances_v0():
    sim = empty_sim()
    v = put(sim, 4, 100.0, P.v0)
    sim.step(GREEN)
    assert v.pos == 100.0 + P.v0
    assert v.speed == P.v0


def fine_step_stop(pos0, v0, stop, params, dt=0.01, horizon=30.0):
    """Independent IDM integration against a standing obstacle at the stop line."""
    pos, v = pos0, v0
    t = 0.0
    root = math.sqrt(params.a_max * params.b)
    while t < horizon:
        gap = stop + params.s0 - pos
        s_star = params.s0 + max(0.0, v * params.T + v * v / (2 * root))
        a = params.a_max * (1 - (v / params.v0) ** 4 - (s_star / gap) ** 2)
        v = max(0.0, v + a * dt)
        pos = min(pos + v * dt, stop)
        t += dt
    return pos


def test_stops_before_red_line():
    sim = empty_sim()
    v = put(sim, 4, 400.0, 14.0)
    positions = []
    for _ in range(30):
        sim.step(RED)
        positions.append(v.pos)
        assert v.pos <= 500.0
    assert v.speed < 0.1
    assert 500.0 - v.pos <= 0.5
    oracle = fine_step_stop(400.0, 14.0, 500.0, P)
    assert abs(positions[-1] - oracle) < 1.0


def test_vehicle_exits_after_clearance():
    sim = empty_sim()
    put(sim, 4, 495.0, P.v0)
    sim.step(GREEN)  # crosses the line
    assert len(sim.snapshot) == 1
    for _ in range(3):
        sim.step(GREEN)
    assert len(sim.snapshot) == 0 and sim.snapshot.exited == 1


def test_collision_fault_in_strict_mode():
    sim = empty_sim()
    put(sim, 4, 100.0, 0.0, vid=1)
    put(sim, 4, 97.0, 0.0, vid=2)  # overlaps the 5 m leader
    with pytest.raises(CollisionError):
        sim.step(GREEN)


def test_right_turn_on_red_when_clear():
    sim = empty_sim()
    k = LANE_INDEX[LaneId(Approach.S, 2)]
    v = put(sim, k, 499.5, 0.0, movement=Movement.RIGHT)
    for _ in range(5):
        sim.step(RED)
    assert v.crossed or v not in sim.snapshot.lanes[k]


def test_right_turn_yields_to_green_through_traffic():
    sim = empty_sim()
    k = LANE_INDEX[LaneId(Approach.S, 2)]
    w = LANE_INDEX[LaneId(Approach.W, 1)]
    v = put(sim, k, 499.5, 0.0, movement=Movement.RIGHT)
    put(sim, w, 480.0, 10.0)  # 2 s from the conflict zone
    colors = list(RED)
    colors[w] = Color.GREEN
    sim.step(colors)
    assert not v.crossed and v.pos <= 500.0


def test_through_vehicle_never_turns_on_red():
    sim = empty_sim()
    k = LANE_INDEX[LaneId(Approach.S, 2)]
    v = put(sim, k, 499.5, 0.0, movement=Movement.THROUGH)
    for _ in range(20):
        sim.step(RED)
    assert not v.crossed


# -- cumulative_waiting --------------------------------------------------------


def test_cwt_zero_when_nobody_stops():
    sim = empty_sim()
    put(sim, 0, 0.0, P.v0)
    for _ in range(60):
        sim.step(GREEN)
    assert cumulative_waiting(sim.snapshot) == 0.0


def test_cwt_counts_stopped_steps():
    sim = empty_sim()
    put(sim, 4, 500.0, 0.0)
    for _ in range(5):
        sim.step(RED)
    assert cumulative_waiting(sim.snapshot) == 5.0


def test_cwt_includes_banked_wait():
    snap = TrafficSnapshot(banked_wait=2.0 + 3.0 + 4.0)
    assert cumulative_waiting(snap) == 9.0


# -- whole-run invariants ------------------------------------------------------


def alternating_colors(t):
    # 30 s W-E through, 4 s yellow, 30 s N-S through, 4 s yellow
    phase = t % 68
    colors = []
    for lane in LANES:
        we = lane.approach in (Approach.W, Approach.E)
        served = lane.index > 0 and ((we and phase < 34) or (not we and phase >= 34))
        if not served:
            colors.append(Color.RED)
        elif phase % 34 < 30:
            colors.append(Color.GREEN)
        else:
            colors.append(Color.YELLOW)
    return colors


def test_invariants_over_long_run():
    demand = DemandProfile.uniform(500.0, (0.0, 0.8, 0.2))
    sim = Simulation(demand, seed=11)
    for t in range(4000):
        colors = alternating_colors(t)
        before = {v.id: v.pos for v in sim.snapshot.vehicles}
        waits = {v.id: v.waiting_time for v in sim.snapshot.vehicles}
        snap = sim.step(colors)
        assert snap.entered == snap.exited + len(snap)
        for k, lane in enumerate(snap.lanes):
            for lead, foll in zip(lane, lane[1:]):
                assert foll.pos < lead.pos - lead.length
            for v in lane:
                assert 0.0 <= v.speed <= P.v0 + P.a_max
                assert v.waiting_time >= waits.get(v.id, 0.0)
                if colors[k] == Color.RED and v.movement != Movement.RIGHT and v.id in before:
                    crossed_now = before[v.id] <= 500.0 < v.pos
                    assert not crossed_now


def test_determinism_bit_identical():
    def trace(seed):
        sim = Simulation(DemandProfile.uniform(600.0), seed=seed)
        rows = []
        for t in range(600):
            sim.step(alternating_colors(t))
            rows.extend((v.id, v.pos, v.speed, v.accel) for v in sim.snapshot.vehicles)
        return rows

    assert trace(3) == trace(3)
    assert trace(3) != trace(4)


def test_blocked_arrivals_wait_instead_of_vanishing():
    demand = DemandProfile({"N": 3000.0}, {"N": (1.0, 0.0, 0.0)})
    sim = Simulation(demand, seed=2)
    drawn = 0
    for _ in range(1200):
        sim.step(RED)
    drawn = sim.next_id
    snap = sim.snapshot
    assert snap.entered + sim.pending_count() == drawn
    assert sim.pending_count() > 0
