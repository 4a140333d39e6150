"""Demonstration sets: generation, statistics, sampling, file I/O and
behavior-cloning pretraining of the reference-action generator.

Demo file layout (plain text, one record per line, fields separated by a
single space, floats written with ``repr`` so they round-trip exactly)::

    #td3fg-demos v1 obs_dim=<int> act_dim=<int> count=<int>
    trajectory <tier> <seed> <total_return> <n_transitions>
    <s[0..obs_dim)> <a[0..act_dim)> <r> <s_next[0..obs_dim)> <done 0|1> <FR> <HR> <CC> <TC>
    ...

Each ``trajectory`` header is followed by exactly ``n_transitions`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .env import TIERS, Components, EnvSpec, ScriptedExpert, Trajectory, Transition, rollout
from .errors import EmptyDemosError, InvalidConfigError, InvalidSampleError, ShapeError
from .nn import AdamState, MlpNet, adam_step, backward, forward_cached, mlp_init

DEFAULT_MIX = {"expert": 60, "suboptimal": 30, "failing": 10}


class TransitionBatch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    from_demo: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.rewards)


def stack_transitions(transitions) -> TransitionBatch:
    return TransitionBatch(
        np.array([tr.s for tr in transitions], dtype=np.float64),
        np.array([tr.a for tr in transitions], dtype=np.float64),
        np.array([tr.r for tr in transitions], dtype=np.float64),
        np.array([tr.s_next for tr in transitions], dtype=np.float64),
        np.array([tr.done for tr in transitions], dtype=np.float64),
    )


class DemoStats(NamedTuple):
    max: float
    min: float
    mean: float


def demo_stats(demos) -> DemoStats:
    trajectories = getattr(demos, "trajectories", demos)
    if not trajectories:
        raise EmptyDemosError("demo set is empty")
    returns = [t.total_return for t in trajectories]
    return DemoStats(max(returns), min(returns), sum(returns) / len(returns))


@dataclass
class DemoSet:
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def stats(self) -> DemoStats:
        return demo_stats(self)

    def __len__(self):
        return len(self.trajectories)

    def __eq__(self, other):
        if not isinstance(other, DemoSet):
            return NotImplemented
        return dumps_demos(self) == dumps_demos(other)

    def arrays(self) -> tuple[TransitionBatch, np.ndarray]:
        """All transitions stacked, plus each trajectory's start offset.

        Cached: a DemoSet is not mutated after creation.
        """
        cache = self.__dict__.get("_arrays")
        if cache is None or len(cache[1]) != len(self.trajectories) + 1:
            flat = stack_transitions(self.transitions())
            starts = np.cumsum([0] + [len(t) for t in self.trajectories])
            cache = (flat, starts)
            self.__dict__["_arrays"] = cache
        return cache

    def transitions(self) -> list[Transition]:
        return [tr for traj in self.trajectories for tr in traj.transitions]

    def tier_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for traj in self.trajectories:
            counts[traj.tier] = counts.get(traj.tier, 0) + 1
        return counts


def parse_mix(text) -> dict[str, int]:
    """``"expert:60,suboptimal:30,failing:10"`` -> dict."""
    if isinstance(text, dict):
        return {k: int(v) for k, v in text.items()}
    mix = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        tier, _, count = part.partition(":")
        mix[tier.strip()] = int(count)
    return mix


def format_mix(mix) -> str:
    return ",".join(f"{tier}:{count}" for tier, count in mix.items())


def _trajectory_seed(seed, tier_index, i) -> int:
    return int(np.random.SeedSequence([int(seed), tier_index, i]).generate_state(1)[0])


def generate_demo_set(spec: EnvSpec, mix=None, seed=0) -> DemoSet:
    """Roll out the scripted demonstrators, ``mix[tier]`` episodes per tier."""
    mix = parse_mix(DEFAULT_MIX if mix is None else mix)
    unknown = set(mix) - set(TIERS)
    if unknown:
        raise InvalidConfigError(f"unknown demo tiers {sorted(unknown)}")
    if any(c < 0 for c in mix.values()) or sum(mix.values()) == 0:
        raise InvalidConfigError(f"demo mix must have a positive total count, got {mix}")
    demos = DemoSet()
    for tier_index, tier in enumerate(TIERS):
        for i in range(mix.get(tier, 0)):
            traj_seed = _trajectory_seed(seed, tier_index, i)
            policy = ScriptedExpert(tier, np.random.default_rng(traj_seed))
            demos.trajectories.append(rollout(spec, policy, traj_seed, tier=tier, origin="demo"))
    return demos


def sample_transitions(demos: DemoSet, n_traj, n_trans, rng) -> TransitionBatch:
    """Pick ``n_traj`` trajectories without replacement, then ``n_trans``
    transitions uniformly with replacement from their union."""
    if not demos.trajectories:
        raise EmptyDemosError("demo set is empty")
    if n_traj < 1 or n_traj > len(demos.trajectories):
        raise InvalidSampleError(f"cannot pick {n_traj} of {len(demos.trajectories)} trajectories")
    if n_trans < 1:
        raise InvalidSampleError("n_trans must be positive")
    chosen = rng.choice(len(demos.trajectories), size=n_traj, replace=False)
    flat, starts = demos.arrays()
    lengths = starts[chosen + 1] - starts[chosen]
    ends = np.cumsum(lengths)
    idx = rng.integers(0, ends[-1], size=n_trans)
    which = np.searchsorted(ends, idx, side="right")
    rows = starts[chosen[which]] + idx - (ends[which] - lengths[which])
    return TransitionBatch(*(a[rows] for a in flat[:5]))


# behavior cloning


def bc_objective(net: MlpNet, obs, actions) -> tuple[float, np.ndarray]:
    """``mean_i ||a_i - net(s_i)||^2`` and its parameter gradient."""
    out, cache = forward_cached(net, obs)
    diff = out - actions
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    return loss, backward(net, obs, 2.0 * diff, cache)


@dataclass
class NetConfig:
    hidden: tuple = (32, 64, 32)
    hidden_activation: str = "tanh"
    output_activation: str = "tanh"
    lr: float = 1e-4
    l2_coef: float = 1e-4

    def layer_sizes(self, in_dim, out_dim) -> list[int]:
        return [in_dim, *self.hidden, out_dim]


@dataclass
class BatchConfig:
    n_traj: int = 10
    n_trans: int = 64


def pretrain_generator(demos: DemoSet, iters, batch_cfg=None, net_cfg=None, seed=0) -> tuple[MlpNet, list[float]]:
    """Regress demonstrated actions on demonstrated states with Adam.

    Every iteration draws a fresh batch with :func:`sample_transitions`.
    Returns the trained net and the per-iteration loss history.
    """
    if not demos.trajectories:
        raise EmptyDemosError("demo set is empty")
    if iters < 0:
        raise InvalidConfigError("iters must be non-negative")
    batch_cfg = batch_cfg or BatchConfig()
    net_cfg = net_cfg or NetConfig()
    first = demos.trajectories[0].transitions[0]
    sizes = net_cfg.layer_sizes(len(first.s), len(first.a))
    net = mlp_init(sizes, net_cfg.hidden_activation, net_cfg.output_activation, seed=seed)
    opt = AdamState.for_net(net, lr=net_cfg.lr, l2_coef=net_cfg.l2_coef)
    rng = np.random.default_rng([int(seed), 1])
    n_traj = min(batch_cfg.n_traj, len(demos.trajectories))
    history = []
    for _ in range(iters):
        batch = sample_transitions(demos, n_traj, batch_cfg.n_trans, rng)
        loss, grad = bc_objective(net, batch.obs, batch.actions)
        adam_step(net, grad, opt)
        history.append(loss)
    return net, history


def bc_finetune_init(generator: MlpNet, actor: MlpNet | None = None) -> MlpNet:
    """Actor initialized as an exact parameter copy of ``generator``."""
    if actor is None:
        return generator.copy()
    if actor.architecture() != generator.architecture():
        raise ShapeError(f"generator {generator!r} and actor {actor!r} differ in architecture")
    actor.load_params_from(generator)
    return actor


def windowed_mean(values, window=100) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.size < window:
        return np.array([values.mean()]) if values.size else values
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


# file I/O


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps_demos(demos: DemoSet) -> str:
    if not demos.trajectories or not demos.trajectories[0].transitions:
        obs_dim = act_dim = 0
    else:
        first = demos.trajectories[0].transitions[0]
        obs_dim, act_dim = len(first.s), len(first.a)
    lines = [f"#td3fg-demos v1 obs_dim={obs_dim} act_dim={act_dim} count={len(demos.trajectories)}"]
    for traj in demos.trajectories:
        lines.append(f"trajectory {traj.tier} {traj.seed} {traj.total_return!r} {len(traj.transitions)}")
        for tr in traj.transitions:
            lines.append(
                " ".join(
                    [_fmt(tr.s), _fmt(tr.a), repr(float(tr.r)), _fmt(tr.s_next), "1" if tr.done else "0", _fmt(tr.components)]
                )
            )
    return "\n".join(lines) + "\n"


def loads_demos(text: str) -> DemoSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#td3fg-demos"):
        raise InvalidConfigError("not a td3fg demo file")
    meta = dict(tok.split("=") for tok in lines[0].split()[2:])
    obs_dim, act_dim = int(meta["obs_dim"]), int(meta["act_dim"])
    demos = DemoSet()
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] != "trajectory":
            raise InvalidConfigError(f"line {i + 1}: expected a trajectory header")
        tier, seed, total, n = head[1], int(head[2]), float(head[3]), int(head[4])
        traj = Trajectory(tier=tier, seed=seed, total_return=total)
        for line in lines[i + 1 : i + 1 + n]:
            v = [float(x) for x in line.split()]
            o = 0
            s = np.array(v[o : o + obs_dim]); o += obs_dim
            a = np.array(v[o : o + act_dim]); o += act_dim
            r = v[o]; o += 1
            s_next = np.array(v[o : o + obs_dim]); o += obs_dim
            done = v[o] == 1.0; o += 1
            comps = Components(*v[o : o + 4])
            traj.transitions.append(Transition(s, a, r, s_next, done, comps, "demo"))
        demos.trajectories.append(traj)
        i += 1 + n
    return demos


def save_demos(demos: DemoSet, path) -> Path:
    path = Path(path)
    path.write_text(dumps_demos(demos))
    return path


def load_demos(path) -> DemoSet:
    return loads_demos(Path(path).read_text())
