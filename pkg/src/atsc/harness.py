"""Training, evaluation and controller comparison runs with CSV output."""

from __future__ import annotations

import csv
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .agent import D3QNAgent
from .config import ScenarioConfig
from .emissions import EmissionLedger, accumulate_emissions
from .encoding import encode, state_size
from .rewards import EFFICIENCY_ONLY, MetricsRecord, RewardShaper, RewardWeights
from .safety import ConflictEvents, ConflictLedger, conflict_pairs, step_conflicts
from .signals import (
    ActuatedController,
    ControllerKind,
    FixedTimeController,
    PhaseMachine,
    SignalAudit,
    webster_fixed_time,
)
from .sim import LANES, Simulation, cumulative_waiting

log = logging.getLogger(__name__)

STEP_COLUMNS = [
    "t", "phase", "in_yellow", "conflicts", "ctc", "cwt", "co2_g", "cde_g",
    "queue", "vehicles", "exited", "mean_speed",
]
TRAJECTORY_COLUMNS = [
    "t", "veh_id", "approach", "lane", "movement", "pos_m", "speed_mps", "accel_mps2", "waiting_s",
]
EPISODE_COLUMNS = [
    "episode", "seed", "reward", "ctc", "cwt", "cde_g", "served", "mean_speed",
    "epsilon", "mean_loss", "w_safety", "w_efficiency", "w_carbon",
]
SUMMARY_FIELDS = ["conflicts", "waiting_s", "co2_g", "served", "mean_speed"]


class MissingCheckpointError(ValueError):
    pass


def fmt(x) -> str:
    # repr round-trips floats exactly, which the offline replay checks rely on
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


class CsvSink:
    def __init__(self, path, columns: Sequence[str]):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)

    def row(self, values: Iterable) -> None:
        self.writer.writerow([fmt(v) for v in values])

    def close(self) -> None:
        self.fh.close()


@dataclass
class EpisodeSummary:
    conflicts: int = 0
    waiting_s: float = 0.0
    co2_g: float = 0.0
    served: int = 0
    mean_speed: float = 0.0

    def as_row(self) -> list:
        return [getattr(self, k) for k in SUMMARY_FIELDS]


@dataclass
class EpisodeResult:
    summary: EpisodeSummary
    reward: float = 0.0
    losses: list[float] = field(default_factory=list)
    conflict_events: int = 0
    audit: Optional[SignalAudit] = None
    hard_stops: int = 0


def make_controller(cfg: ScenarioConfig, kind: ControllerKind):
    if kind == ControllerKind.FIXED:
        plan = webster_fixed_time(cfg.effective_demand, cfg.signal.saturation_flow, cfg.signal.yellow, cfg.signal.min_green)
        return FixedTimeController(plan.schedule)
    if kind == ControllerKind.ACTUATED:
        return ActuatedController(cfg.signal.gap_time, cfg.signal.max_green)
    raise ValueError(f"{kind} is an agent controller")


class Episode:
    """One simulated episode; advances one second per :meth:`advance` call."""

    def __init__(self, cfg: ScenarioConfig, seed: int, strict: bool = True):
        self.cfg = cfg
        self.sim = Simulation(cfg.effective_demand, seed, cfg.idm, cfg.geometry, strict=strict)
        self.machine = PhaseMachine(min_green=cfg.signal.min_green, yellow=cfg.signal.yellow)
        self.grid = cfg.grid.build()
        self.conflicts = ConflictLedger()
        self.emissions = EmissionLedger()
        self.events = ConflictEvents()
        self.speed_sum = 0.0
        self.speed_n = 0
        self.last_step_conflicts = 0
        self.last_step_co2 = 0.0

    def state(self) -> np.ndarray:
        g = self.cfg.grid
        return encode(self.sim.snapshot, self.machine, self.grid, self.cfg.geometry.lane_length, g.max_green, g.include_phase)

    def metrics(self) -> MetricsRecord:
        return MetricsRecord(self.conflicts.ctc, cumulative_waiting(self.sim.snapshot), self.emissions.pe_total)

    def advance(self, request=None, count_events: bool = False):
        if request is not None:
            self.machine.request(request)
        colors = self.machine.tick()
        snap = self.sim.step(colors)
        n = step_conflicts(snap)
        self.conflicts.add(n)
        accumulate_emissions(self.emissions, snap, self.cfg.emission, self.cfg.cep)
        self.last_step_conflicts = n
        self.last_step_co2 = self.emissions.history[-1]
        if count_events:
            self.events.observe(conflict_pairs(snap))
        for v in snap.vehicles:
            self.speed_sum += v.speed
            self.speed_n += 1
        return colors

    def summary(self) -> EpisodeSummary:
        return EpisodeSummary(
            conflicts=self.conflicts.ctc,
            waiting_s=cumulative_waiting(self.sim.snapshot),
            co2_g=self.emissions.pe_total,
            served=self.sim.snapshot.exited,
            mean_speed=self.speed_sum / self.speed_n if self.speed_n else 0.0,
        )


def _mean_speed(snap) -> float:
    speeds = [v.speed for v in snap.vehicles]
    return sum(speeds) / len(speeds) if speeds else 0.0


def run_episode(
    cfg: ScenarioConfig,
    seed: int,
    controller=None,
    agent: Optional[D3QNAgent] = None,
    shaper: Optional[RewardShaper] = None,
    learn: bool = False,
    steps_sink: Optional[CsvSink] = None,
    traj_sink: Optional[CsvSink] = None,
    audit: bool = False,
    count_events: bool = False,
    strict: bool = True,
) -> EpisodeResult:
    ep = Episode(cfg, seed, strict=strict)
    checker = SignalAudit(cfg.signal.min_green, cfg.signal.yellow) if audit else None
    result = EpisodeResult(EpisodeSummary(), audit=checker)
    prev = ep.metrics()
    s = ep.state() if agent is not None else None
    for _ in range(cfg.run.episode_length):
        if agent is not None:
            a = agent.act(s, None if learn else 0.0)
            colors = ep.advance(a, count_events)
        else:
            colors = ep.advance(controller.decide(ep.sim, ep.machine), count_events)
        if checker is not None:
            checker.observe(colors)
        cur = ep.metrics()
        if shaper is not None:
            r, _, _ = shaper.reward(prev, cur)
            result.reward += r
            if agent is not None and learn:
                s_next = ep.state()
                loss = agent.observe(s, a, r, s_next, False)
                if loss is not None:
                    result.losses.append(loss)
                s = s_next
        if agent is not None and not learn:
            s = ep.state()
        prev = cur
        snap = ep.sim.snapshot
        if steps_sink is not None:
            steps_sink.row([
                snap.time, ep.machine.active.name, ep.machine.in_yellow, ep.last_step_conflicts,
                ep.conflicts.ctc, cur.cwt, ep.last_step_co2, ep.emissions.pe_total,
                ep.sim.queue_length(), len(snap), snap.exited, _mean_speed(snap),
            ])
        if traj_sink is not None:
            for k, lane in enumerate(snap.lanes):
                for v in lane:
                    traj_sink.row([
                        snap.time, v.id, v.lane.approach.value, LANES[k].index, v.movement.value,
                        v.pos, v.speed, v.accel, v.waiting_time,
                    ])
    result.summary = ep.summary()
    result.conflict_events = ep.events.total
    result.hard_stops = ep.sim.hard_stops
    return result


# -- training ----------------------------------------------------------------


def agent_weights(cfg: ScenarioConfig, kind: ControllerKind) -> RewardWeights:
    return EFFICIENCY_ONLY if kind == ControllerKind.TE else cfg.reward.weights


def make_shaper(cfg: ScenarioConfig, weights: RewardWeights) -> RewardShaper:
    r = cfg.reward
    return RewardShaper(weights=weights, window=r.window, warmup=r.warmup, scales=r.scales)


def run_training(
    cfg: ScenarioConfig,
    out_dir,
    kind: ControllerKind = ControllerKind.SED,
    entropy_reweight: Optional[int] = None,
    progress: Optional[Callable[[int, EpisodeResult], None]] = None,
) -> Path:
    """Train an agent; writes ``episodes.csv`` and ``checkpoint.npz`` to ``out_dir``."""
    kind = ControllerKind(kind)
    if kind not in (ControllerKind.TE, ControllerKind.SED):
        raise ValueError("training needs an agent controller (te or sed)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reweight = cfg.reward.entropy_reweight if entropy_reweight is None else entropy_reweight
    g = cfg.grid
    agent = D3QNAgent(state_size(g.build(), g.include_phase), cfg.agent, cfg.run.agent_seed)
    initial = agent_weights(cfg, kind)
    shaper = make_shaper(cfg, initial)
    sink = CsvSink(out / "episodes.csv", EPISODE_COLUMNS)
    try:
        for episode in range(cfg.run.episodes):
            seed = cfg.training_seed(episode)
            res = run_episode(cfg, seed, agent=agent, shaper=shaper, learn=True)
            s = res.summary
            w = shaper.weights.as_tuple()
            sink.row([
                episode, seed, res.reward, s.conflicts, s.waiting_s, s.co2_g, s.served, s.mean_speed,
                agent.epsilon, float(np.mean(res.losses)) if res.losses else 0.0, *w,
            ])
            log.info("episode %d reward %.2f ctc %d cwt %.0f cde %.0f", episode, res.reward, s.conflicts, s.waiting_s, s.co2_g)
            if progress is not None:
                progress(episode, res)
            if reweight and kind == ControllerKind.SED and (episode + 1) % reweight == 0:
                shaper.reweight(initial)
            else:
                shaper.samples.clear()
    finally:
        sink.close()
    path = out / "checkpoint.npz"
    agent.save(path)
    return path


# -- evaluation --------------------------------------------------------------


def run_eval(
    cfg: ScenarioConfig,
    controller: ControllerKind,
    out_dir,
    checkpoint=None,
    seeds: Optional[Sequence[int]] = None,
    log_trajectories: bool = False,
    conflict_events: bool = False,
) -> list[EpisodeSummary]:
    """Evaluate one controller on held-out seeds.

    Writes ``steps_<seed>.csv`` per seed (plus ``trajectories_<seed>.csv`` when
    requested) and ``summary.csv`` with one row per seed.
    """
    kind = ControllerKind(controller)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agent = None
    ctrl = None
    if kind in (ControllerKind.TE, ControllerKind.SED):
        if checkpoint is None or not Path(checkpoint).exists():
            raise MissingCheckpointError(f"controller {kind.value} needs a checkpoint")
        agent = D3QNAgent.load(checkpoint)
    else:
        ctrl = make_controller(cfg, kind)
    seeds = list(cfg.run.eval_seeds if seeds is None else seeds)
    summaries = []
    cols = ["seed", *SUMMARY_FIELDS] + (["conflict_events"] if conflict_events else [])
    summary_sink = CsvSink(out / "summary.csv", cols)
    try:
        for seed in seeds:
            steps = CsvSink(out / f"steps_{seed}.csv", STEP_COLUMNS)
            traj = CsvSink(out / f"trajectories_{seed}.csv", TRAJECTORY_COLUMNS) if log_trajectories else None
            try:
                res = run_episode(cfg, seed, controller=ctrl, agent=agent, steps_sink=steps, traj_sink=traj,
                                  count_events=conflict_events)
            finally:
                steps.close()
                if traj is not None:
                    traj.close()
            summaries.append(res.summary)
            extra = [res.conflict_events] if conflict_events else []
            summary_sink.row([seed, *res.summary.as_row(), *extra])
    finally:
        summary_sink.close()
    return summaries


# -- comparison --------------------------------------------------------------

COMPARE_COLUMNS = ["controller", "metric", "mean", "std", "delta_vs_fixed_pct"]


def _delta(value: float, base: float) -> float:
    if base == 0:
        return 0.0
    return 100.0 * (value - base) / base


def compare(
    cfg: ScenarioConfig,
    controllers: Sequence[ControllerKind],
    seeds: Sequence[int],
    out_dir,
    checkpoints: Optional[dict] = None,
) -> dict[str, dict[str, tuple[float, float]]]:
    """Mean and sample std of every summary metric per controller.

    Agent controllers without a checkpoint in ``checkpoints`` are trained
    first under ``out_dir/train_<kind>``.  Percentage deltas are relative to
    the fixed-time row, or to the first row when fixed-time is absent.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoints = dict(checkpoints or {})
    table: dict[str, dict[str, tuple[float, float]]] = {}
    for kind in map(ControllerKind, controllers):
        if kind.value in table:
            continue
        ckpt = checkpoints.get(kind.value)
        if kind in (ControllerKind.TE, ControllerKind.SED) and ckpt is None:
            ckpt = run_training(cfg, out / f"train_{kind.value}", kind)
            checkpoints[kind.value] = ckpt
        sums = run_eval(cfg, kind, out / f"eval_{kind.value}", ckpt, seeds)
        table[kind.value] = {
            m: (statistics.fmean(getattr(s, m) for s in sums),
                statistics.stdev([float(getattr(s, m)) for s in sums]) if len(sums) > 1 else 0.0)
            for m in SUMMARY_FIELDS
        }
    names = list(table)
    base_name = "fixed" if "fixed" in table else names[0]
    sink = CsvSink(out / "comparison.csv", COMPARE_COLUMNS)
    try:
        for name in names:
            for m in SUMMARY_FIELDS:
                mean, std = table[name][m]
                sink.row([name, m, mean, std, _delta(mean, table[base_name][m][0])])
    finally:
        sink.close()
    return table


def moving_average(xs: Sequence[float], window: int) -> list[float]:
    return [statistics.fmean(xs[i - window + 1 : i + 1]) for i in range(window - 1, len(xs))]


__all__ = [
    "CsvSink",
    "Episode",
    "EpisodeResult",
    "EpisodeSummary",
    "MissingCheckpointError",
    "agent_weights",
    "compare",
    "make_controller",
    "make_shaper",
    "moving_average",
    "run_episode",
    "run_eval",
    "run_training",
]
