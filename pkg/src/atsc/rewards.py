"""Difference rewards, sliding min-max normalization and entropy weighting."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("safety", "efficiency", "carbon")


@dataclass(frozen=True)
class MetricsRecord:
    ctc: float = 0.0
    cwt: float = 0.0
    cde: float = 0.0


@dataclass(frozen=True)
class RewardWeights:
    w_safety: float = 0.5
    w_efficiency: float = 0.25
    w_carbon: float = 0.25

    def __post_init__(self) -> None:
        w = self.as_tuple()
        if any(x < 0 or x > 1 for x in w):
            raise ValueError("reward weights must lie in [0, 1]")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"reward weights must sum to 1, got {sum(w)!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w_safety, self.w_efficiency, self.w_carbon)

    @classmethod
    def from_sequence(cls, w) -> "RewardWeights":
        return cls(*(float(x) for x in w))


EFFICIENCY_ONLY = RewardWeights(0.0, 1.0, 0.0)


def raw_rewards(prev: MetricsRecord, cur: MetricsRecord) -> tuple[float, float, float]:
    """Negated increments of the cumulative indicators (always <= 0)."""
    return (-(cur.ctc - prev.ctc), -(cur.cwt - prev.cwt), -(cur.cde - prev.cde))


class NormalizationWindow:
    """Sliding window of one channel's recent raw rewards.

    Monotonic deques track the window minimum and maximum so each update is
    amortized O(1) even for very long windows.
    """

    def __init__(self, size: int = 500):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self.values: deque[float] = deque(maxlen=size)
        self._count = 0
        self._mins: deque[tuple[int, float]] = deque()
        self._maxs: deque[tuple[int, float]] = deque()

    def __len__(self) -> int:
        return len(self.values)

    def bounds(self) -> tuple[float, float]:
        return self._mins[0][1], self._maxs[0][1]

    def push(self, value: float) -> None:
        i = self._count
        self._count += 1
        self.values.append(value)
        while self._mins and self._mins[-1][1] >= value:
            self._mins.pop()
        self._mins.append((i, value))
        while self._maxs and self._maxs[-1][1] <= value:
            self._maxs.pop()
        self._maxs.append((i, value))
        oldest = i - self.size
        while self._mins[0][0] <= oldest:
            self._mins.popleft()
        while self._maxs[0][0] <= oldest:
            self._maxs.popleft()

    def normalize(self, value: float) -> float:
        """Min-max position of ``value`` in the window, then absorb it.

        A degenerate window (max == min) maps to 0.5.  Values outside the
        window range are clipped to [0, 1].
        """
        lo, hi = self.bounds() if self.values else (value, value)
        self.push(value)
        if hi == lo:
            return 0.5
        return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def normalize(value: float, window: NormalizationWindow) -> float:
    return window.normalize(value)


class InsufficientSamplesError(ValueError):
    pass


def entropy_weights(samples, fallback: RewardWeights = RewardWeights(), eps: float = 1e-12) -> RewardWeights:
    """Entropy weight method over an (n, 3) matrix of normalized samples.

    Columns with less variation carry less information and get less weight;
    when every column is constant the ``fallback`` weights are returned.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError("samples must be an (n, 3) matrix")
    n = x.shape[0]
    if n < 2:
        raise InsufficientSamplesError("entropy weights need at least two samples")
    x = x + eps
    p = x / x.sum(axis=0)
    e = -(p * np.log(p)).sum(axis=0) / math.log(n)
    d = np.clip(1.0 - e, 0.0, None)
    # float noise from eps on a constant column is not information
    d[d < 1e-12] = 0.0
    if d.sum() <= 0:
        return fallback
    w = d / d.sum()
    # exact simplex after rounding
    w[-1] = 1.0 - w[0] - w[1]
    return RewardWeights(*(float(max(0.0, v)) for v in w))


def combine(norm_rewards, weights: RewardWeights) -> float:
    r = norm_rewards
    w = weights.as_tuple()
    return w[0] * r[0] + w[1] * r[1] + w[2] * r[2]


@dataclass
class RewardShaper:
    """Turns consecutive metric records into the scalar training reward.

    During the first ``warmup`` steps raw rewards are mapped to
    ``clip(1 + raw / scale, 0, 1)``; afterwards the sliding min-max windows
    take over.  Windows persist across episodes.
    """

    weights: RewardWeights = field(default_factory=RewardWeights)
    window: int = 500
    warmup: int = 50
    scales: tuple[float, float, float] = (10.0, 100.0, 1000.0)
    steps: int = 0
    windows: list[NormalizationWindow] = field(init=False)
    samples: list[tuple[float, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.windows = [NormalizationWindow(self.window) for _ in CHANNELS]

    def normalized(self, raw: tuple[float, float, float]) -> tuple[float, float, float]:
        if self.steps < self.warmup:
            for w, r in zip(self.windows, raw):
                w.push(r)
            out = tuple(min(1.0, max(0.0, 1.0 + r / s)) for r, s in zip(raw, self.scales))
        else:
            out = tuple(w.normalize(r) for w, r in zip(self.windows, raw))
        self.steps += 1
        return out

    def reward(self, prev: MetricsRecord, cur: MetricsRecord) -> tuple[float, tuple[float, float, float], tuple[float, float, float]]:
        raw = raw_rewards(prev, cur)
        norm = self.normalized(raw)
        self.samples.append(norm)
        return combine(norm, self.weights), raw, norm

    def reweight(self, initial: RewardWeights, blend: float = 0.5) -> RewardWeights:
        """Blend entropy weights from the collected samples with ``initial``."""
        if len(self.samples) >= 2:
            ew = entropy_weights(self.samples, fallback=initial).as_tuple()
            mixed = [blend * a + (1 - blend) * b for a, b in zip(ew, initial.as_tuple())]
            mixed[-1] = 1.0 - mixed[0] - mixed[1]
            self.weights = RewardWeights(*mixed)
        self.samples.clear()
        return self.weights
