"""Dueling double deep Q-network on plain numpy.

The network is a ReLU trunk followed by a scalar value head and a
per-action advantage head, aggregated as ``Q = V + A - mean(A)``.
Gradients are computed analytically; the optimizer is plain SGD.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

N_ACTIONS = 4
CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 32
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    target_sync: int = 500
    capacity: int = 50_000
    hidden: tuple[int, ...] = (128, 128)
    grad_clip: Optional[float] = None
    train_every: int = 1
    learn_start: int = 0
    # exploratory actions are repeated for 1..explore_hold decisions (1 = plain epsilon-greedy)
    explore_hold: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ConfigError("agent.gamma must lie in [0, 1)")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ConfigError("agent epsilon bounds must lie in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("agent.lr must be positive")
        if self.batch_size < 1 or self.capacity < 1 or self.target_sync < 1:
            raise ConfigError("agent.batch_size, capacity and target_sync must be >= 1")
        if self.train_every < 1:
            raise ConfigError("agent.train_every must be >= 1")
        if self.explore_hold < 1:
            raise ConfigError("agent.explore_hold must be >= 1")

    def epsilon(self, step: int) -> float:
        if self.eps_decay_steps <= 0:
            return self.eps_end
        if step >= self.eps_decay_steps:
            return self.eps_end
        frac = step / self.eps_decay_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class QNetwork:
    """Parameters are kept in one ordered list: trunk (W, b) pairs, then the
    value head (W, b), then the advantage head (W, b)."""

    def __init__(self, n_inputs: int, hidden: Sequence[int] = (128, 128), n_actions: int = N_ACTIONS, rng=None):
        self.n_inputs = int(n_inputs)
        self.hidden = tuple(int(h) for h in hidden)
        self.n_actions = int(n_actions)
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = (self.n_inputs,) + self.hidden
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims, dims[1:]):
            self.params += _glorot(rng, fan_in, fan_out)
        self.params += _glorot(rng, dims[-1], 1)
        self.params += _glorot(rng, dims[-1], self.n_actions)

    @property
    def n_trunk(self) -> int:
        return len(self.hidden)

    def copy(self) -> "QNetwork":
        other = object.__new__(QNetwork)
        other.n_inputs, other.hidden, other.n_actions = self.n_inputs, self.hidden, self.n_actions
        other.params = [p.copy() for p in self.params]
        return other

    def load_from(self, other: "QNetwork") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_inputs:
            raise ConfigError(f"state has length {x.shape[-1]}, network expects {self.n_inputs}")
        return x

    def heads(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Value (batch,) and advantages (batch, n_actions)."""
        x = self._check(x)
        h = np.atleast_2d(x)
        for i in range(self.n_trunk):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = np.maximum(h @ W + b, 0.0)
        Wv, bv, Wa, ba = self.params[-4:]
        return (h @ Wv + bv)[:, 0], h @ Wa + ba

    def forward(self, x) -> np.ndarray:
        """Q-values; shape (n_actions,) for one state, (batch, n_actions) for many."""
        single = np.ndim(x) == 1
        v, a = self.heads(x)
        q = v[:, None] + a - a.mean(axis=1, keepdims=True)
        return q[0] if single else q

    def loss_and_grads(self, x, actions, targets) -> tuple[float, list[np.ndarray]]:
        """Mean squared TD error over the batch and its parameter gradients."""
        x = np.atleast_2d(self._check(x))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        n = x.shape[0]
        acts = [x]
        pre = []
        h = x
        for i in range(self.n_trunk):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0)
            acts.append(h)
        Wv, bv, Wa, ba = self.params[-4:]
        v = (h @ Wv + bv)[:, 0]
        a = h @ Wa + ba
        q = v[:, None] + a - a.mean(axis=1, keepdims=True)
        rows = np.arange(n)
        err = q[rows, actions] - targets
        loss = float(np.mean(err**2))

        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * err / n
        dv = dq.sum(axis=1, keepdims=True)
        da = dq - dq.mean(axis=1, keepdims=True)
        grads: list[np.ndarray] = [np.empty(0)] * len(self.params)
        grads[-4] = h.T @ dv
        grads[-3] = dv.sum(axis=0)
        grads[-2] = h.T @ da
        grads[-1] = da.sum(axis=0)
        dh = dv @ Wv.T + da @ Wa.T
        for i in reversed(range(self.n_trunk)):
            dz = dh * (pre[i] > 0)
            grads[2 * i] = acts[i].T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ self.params[2 * i].T
        return loss, grads

    def sgd(self, grads: Sequence[np.ndarray], lr: float, clip: Optional[float] = None) -> None:
        scale = 1.0
        if clip is not None:
            norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
            if norm > clip:
                scale = clip / norm
        for p, g in zip(self.params, grads):
            p -= (lr * scale) * g


def _glorot(rng, fan_in: int, fan_out: int) -> list[np.ndarray]:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    b = np.zeros(fan_out)
    return [W, b]


def forward(net: QNetwork, s) -> np.ndarray:
    return net.forward(s)


def greedy(q: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return int(np.argmax(q))


def act(net: QNetwork, s, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action.  Exactly one uniform draw is consumed per call."""
    if not 0 <= eps <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    u = rng.random()
    if u < eps:
        return int(rng.integers(net.n_actions))
    return greedy(net.forward(s))


class ReplayBuffer:
    def __init__(self, capacity: int, state_size: int):
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_size))
        self.s_next = np.zeros((self.capacity, state_size))
        self.a = np.zeros(self.capacity, dtype=np.int64)
        self.r = np.zeros(self.capacity)
        self.done = np.zeros(self.capacity, dtype=bool)
        self.size = 0
        self.head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s_next, done: bool) -> None:
        if not 0 <= a < N_ACTIONS:
            raise ValueError(f"action {a} out of range")
        i = self.head
        self.s[i], self.a[i], self.r[i], self.s_next[i], self.done[i] = s, a, r, s_next, done
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=n)
        return self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx]


def double_q_targets(batch, online: QNetwork, target: QNetwork, gamma: float) -> np.ndarray:
    """``r + gamma * Q_target(s', argmax_a Q_online(s', a))``; ``r`` when done."""
    _, _, r, s_next, done = batch
    r = np.asarray(r, dtype=float)
    best = np.argmax(online.forward(np.atleast_2d(s_next)), axis=1)
    q_next = target.forward(np.atleast_2d(s_next))[np.arange(len(best)), best]
    return r + gamma * q_next * (1.0 - np.asarray(done, dtype=float))


def train_step(net: QNetwork, target: QNetwork, buffer: ReplayBuffer, hp: Hyperparams, rng) -> Optional[float]:
    """One SGD update on a uniform minibatch; ``None`` when the buffer is underfull."""
    if len(buffer) < hp.batch_size:
        return None
    batch = buffer.sample(hp.batch_size, rng)
    y = double_q_targets(batch, net, target, hp.gamma)
    loss, grads = net.loss_and_grads(batch[0], batch[1], y)
    net.sgd(grads, hp.lr, hp.grad_clip)
    return loss


def sync_target(online: QNetwork, target: QNetwork, step: int, period: int) -> QNetwork:
    if period < 1:
        raise ValueError("sync period must be >= 1")
    if step % period == 0:
        target.load_from(online)
    return target


class D3QNAgent:
    """Online and target networks, replay memory and the agent's RNG streams."""

    def __init__(self, state_size: int, hp: Hyperparams = Hyperparams(), seed: int = 0):
        self.hp = hp
        self.seed = seed
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
        self.rng_act = np.random.default_rng(np.random.SeedSequence([seed, 3]))
        self.rng_replay = np.random.default_rng(np.random.SeedSequence([seed, 4]))
        self.online = QNetwork(state_size, hp.hidden, rng=init_rng)
        self.target = self.online.copy()
        self.buffer = ReplayBuffer(hp.capacity, state_size)
        self.steps = 0
        self.updates = 0
        self.held_action = 0
        self.hold_left = 0

    @property
    def epsilon(self) -> float:
        return self.hp.epsilon(self.steps)

    def act(self, s, eps: Optional[float] = None) -> int:
        """Epsilon-greedy action, with exploratory actions optionally held.

        With ``explore_hold > 1`` a random action is kept for a uniformly
        drawn 1..explore_hold decisions, so exploration can reach phase
        durations that independent per-second draws almost never produce.
        """
        eps = self.epsilon if eps is None else eps
        if not 0 <= eps <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.hp.explore_hold == 1:
            return act(self.online, s, eps, self.rng_act)
        if eps == 0.0:
            self.hold_left = 0
            return greedy(self.online.forward(s))
        if self.hold_left > 0:
            self.hold_left -= 1
            return self.held_action
        if self.rng_act.random() < eps:
            self.held_action = int(self.rng_act.integers(self.online.n_actions))
            self.hold_left = int(self.rng_act.integers(self.hp.explore_hold))
            return self.held_action
        return greedy(self.online.forward(s))

    def observe(self, s, a: int, r: float, s_next, done: bool) -> Optional[float]:
        self.buffer.add(s, a, r, s_next, done)
        self.steps += 1
        if self.steps < self.hp.learn_start or self.steps % self.hp.train_every:
            return None
        loss = train_step(self.online, self.target, self.buffer, self.hp, self.rng_replay)
        if loss is not None:
            self.updates += 1
            sync_target(self.online, self.target, self.updates, self.hp.target_sync)
        return loss

    # -- checkpoints -------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "n_inputs": self.online.n_inputs,
            "hidden": list(self.online.hidden),
            "n_actions": self.online.n_actions,
            "hyperparams": asdict(self.hp),
            "seed": self.seed,
            "steps": self.steps,
            "updates": self.updates,
            "hold": [self.held_action, self.hold_left],
            "rng_act": self.rng_act.bit_generator.state,
            "rng_replay": self.rng_replay.bit_generator.state,
        }
        arrays = {f"online_{i}": p for i, p in enumerate(self.online.params)}
        arrays.update({f"target_{i}": p for i, p in enumerate(self.target.params)})
        buf = io.BytesIO()
        np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path) -> "D3QNAgent":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ConfigError(f"unsupported checkpoint version {meta.get('version')!r}")
            hp_fields = dict(meta["hyperparams"])
            hp_fields["hidden"] = tuple(hp_fields["hidden"])
            hp = Hyperparams(**hp_fields)
            # replay memory is not checkpointed; keep the allocation small
            agent = cls(meta["n_inputs"], Hyperparams(**{**hp_fields, "capacity": 1}), meta["seed"])
            agent.hp = hp
            n = len(agent.online.params)
            agent.online.params = [np.array(data[f"online_{i}"]) for i in range(n)]
            agent.target.params = [np.array(data[f"target_{i}"]) for i in range(n)]
        agent.steps = meta["steps"]
        agent.updates = meta["updates"]
        agent.held_action, agent.hold_left = meta.get("hold", [0, 0])
        agent.rng_act.bit_generator.state = meta["rng_act"]
        agent.rng_replay.bit_generator.state = meta["rng_replay"]
        return agent
