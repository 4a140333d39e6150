"""Replay buffer and TD3-style updates with generator-guided actor losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demos import DemoSet, TransitionBatch, stack_transitions
from .env import Transition
from .errors import EmptyBufferError, InvalidConfigError, ShapeError
from .explore import OUState, exploration_action, gaussian_action
from .nn import AdamState, MlpNet, adam_step, backprop, forward, forward_cached, input_gradient, mlp_init
from .schedules import ScheduleSet


class ReplayBuffer:
    """FIFO ring of agent transitions plus a demonstration region that is
    never evicted. Sampling is uniform over the union of both regions."""

    def __init__(self, capacity, obs_dim, act_dim):
        if capacity < 1:
            raise InvalidConfigError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._obs = np.zeros((capacity, obs_dim))
        self._act = np.zeros((capacity, act_dim))
        self._rew = np.zeros(capacity)
        self._next = np.zeros((capacity, obs_dim))
        self._done = np.zeros(capacity)
        self._ptr = 0
        self._size = 0
        self.demo = TransitionBatch(np.zeros((0, obs_dim)), np.zeros((0, act_dim)), np.zeros(0), np.zeros((0, obs_dim)), np.zeros(0))

    @property
    def n_demo(self) -> int:
        return self.demo.size

    @property
    def n_live(self) -> int:
        return self._size

    def __len__(self):
        return self.n_demo + self._size

    def push(self, transition: Transition) -> None:
        if transition.origin != "agent":
            raise InvalidConfigError("only agent transitions may be pushed; use preload_demos for demonstrations")
        i = self._ptr
        self._obs[i] = transition.s
        self._act[i] = transition.a
        self._rew[i] = transition.r
        self._next[i] = transition.s_next
        self._done[i] = float(transition.done)
        self._ptr = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def set_demo_region(self, batch: TransitionBatch) -> None:
        self.demo = TransitionBatch(*(np.array(a, dtype=np.float64) for a in batch[:5]))

    def live_transitions(self) -> TransitionBatch:
        """Stored agent transitions ordered oldest to newest."""
        if self._size < self.capacity:
            order = np.arange(self._size)
        else:
            order = (np.arange(self.capacity) + self._ptr) % self.capacity
        return TransitionBatch(self._obs[order], self._act[order], self._rew[order], self._next[order], self._done[order])

    def sample_indices(self, n, rng) -> np.ndarray:
        if len(self) == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if n < 1:
            raise InvalidConfigError("sample size must be positive")
        return rng.integers(0, len(self), size=n)

    def gather(self, idx) -> TransitionBatch:
        nd = self.n_demo
        if nd == 0:
            j = idx
            return TransitionBatch(self._obs[j], self._act[j], self._rew[j], self._next[j], self._done[j], np.zeros(len(j), bool))
        from_demo = idx < nd
        live = np.where(from_demo, 0, idx - nd)
        dj = np.where(from_demo, idx, 0)
        fd = from_demo[:, None]
        d = self.demo
        return TransitionBatch(
            np.where(fd, d.obs[dj], self._obs[live]),
            np.where(fd, d.actions[dj], self._act[live]),
            np.where(from_demo, d.rewards[dj], self._rew[live]),
            np.where(fd, d.next_obs[dj], self._next[live]),
            np.where(from_demo, d.dones[dj], self._done[live]),
            from_demo,
        )

    def sample(self, n, rng) -> TransitionBatch:
        return self.gather(self.sample_indices(n, rng))


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> ReplayBuffer:
    buffer.push(transition)
    return buffer


def buffer_sample(buffer: ReplayBuffer, n, rng) -> TransitionBatch:
    return buffer.sample(n, rng)


def preload_demos(buffer: ReplayBuffer, demos: DemoSet, best_k, n_transitions, rng=None) -> ReplayBuffer:
    """Fill the protected region with ``n_transitions`` from the ``best_k``
    highest-return trajectories.

    When their union holds exactly ``n_transitions`` it is used as-is;
    otherwise transitions are drawn uniformly from it (with replacement when
    the union is smaller than the request).
    """
    if best_k < 1 or best_k > len(demos.trajectories):
        raise InvalidConfigError(f"best_k={best_k} but only {len(demos.trajectories)} trajectories")
    if n_transitions < 1:
        raise InvalidConfigError("n_transitions must be positive")
    order = sorted(range(len(demos.trajectories)), key=lambda i: -demos.trajectories[i].total_return)
    pool = [tr for i in order[:best_k] for tr in demos.trajectories[i].transitions]
    if len(pool) == n_transitions:
        chosen = pool
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = rng.choice(len(pool), size=n_transitions, replace=len(pool) < n_transitions)
        chosen = [pool[i] for i in idx]
    buffer.set_demo_region(stack_transitions(chosen))
    return buffer


@dataclass(frozen=True)
class VariantSpec:
    actor_loss: str  # "rl" | "blend" | "qfilter"
    exploration: str  # "gaussian" | "ou"
    generator_noise: bool = False
    needs_generator: bool = False
    bc_init: bool = False
    preload: bool = False


VARIANTS = {
    "td3": VariantSpec("rl", "gaussian"),
    "td3fg": VariantSpec("blend", "ou", needs_generator=True),
    "td3fg_qfilter": VariantSpec("qfilter", "ou", needs_generator=True),
    "bcft": VariantSpec("rl", "gaussian", needs_generator=True, bc_init=True),
    "preload_buffer": VariantSpec("rl", "gaussian", preload=True),
    "td3fg_noise": VariantSpec("blend", "ou", generator_noise=True, needs_generator=True),
    "td3fg_noise_only": VariantSpec("rl", "ou", generator_noise=True, needs_generator=True),
}


def variant_spec(name) -> VariantSpec:
    try:
        return VARIANTS[name]
    except KeyError:
        raise InvalidConfigError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}") from None


@dataclass
class TrainCfg:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    smoothing_sigma: float = 0.2
    smoothing_clip: float = 0.5
    batch_size: int = 64
    variant: str = "td3fg"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidConfigError("gamma must lie in [0, 1)")
        if self.policy_delay < 1:
            raise InvalidConfigError("policy_delay must be at least 1")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be positive")
        variant_spec(self.variant)


@dataclass
class AgentNets:
    actor: MlpNet
    critic1: MlpNet
    critic2: MlpNet
    target_actor: MlpNet
    target_critic1: MlpNet
    target_critic2: MlpNet
    actor_opt: AdamState
    critic1_opt: AdamState
    critic2_opt: AdamState
    generator: MlpNet | None = None
    n_updates: int = 0

    @property
    def obs_dim(self) -> int:
        return self.actor.in_dim

    @property
    def act_dim(self) -> int:
        return self.actor.out_dim

    def copy(self) -> AgentNets:
        return AgentNets(
            self.actor.copy(), self.critic1.copy(), self.critic2.copy(),
            self.target_actor.copy(), self.target_critic1.copy(), self.target_critic2.copy(),
            self.actor_opt.copy(), self.critic1_opt.copy(), self.critic2_opt.copy(),
            None if self.generator is None else self.generator,
            self.n_updates,
        )


def make_agent_nets(
    obs_dim,
    act_dim,
    hidden=(32, 64, 32),
    seed=0,
    lr_actor=1e-4,
    lr_critic=1e-4,
    l2_coef=1e-4,
    actor_hidden_activation="tanh",
    generator: MlpNet | None = None,
) -> AgentNets:
    """Actor (tanh head), twin ReLU critics on ``[s, a]`` and their targets."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a_seed, c1_seed, c2_seed = seq.spawn(3)
    actor = mlp_init([obs_dim, *hidden, act_dim], actor_hidden_activation, "tanh", seed=a_seed)
    critic1 = mlp_init([obs_dim + act_dim, *hidden, 1], "relu", "identity", seed=c1_seed)
    critic2 = mlp_init([obs_dim + act_dim, *hidden, 1], "relu", "identity", seed=c2_seed)
    return AgentNets(
        actor, critic1, critic2, actor.copy(), critic1.copy(), critic2.copy(),
        AdamState.for_net(actor, lr=lr_actor, l2_coef=l2_coef),
        AdamState.for_net(critic1, lr=lr_critic, l2_coef=l2_coef),
        AdamState.for_net(critic2, lr=lr_critic, l2_coef=l2_coef),
        generator,
    )


def _sa(obs, actions):
    return np.concatenate([obs, actions], axis=1)


def critic_targets(batch: TransitionBatch, nets: AgentNets, cfg: TrainCfg, rng) -> np.ndarray:
    """Clipped double-Q targets with target-policy smoothing."""
    next_a = forward(nets.target_actor, batch.next_obs)
    if cfg.smoothing_sigma > 0.0:
        noise = np.clip(cfg.smoothing_sigma * rng.standard_normal(next_a.shape), -cfg.smoothing_clip, cfg.smoothing_clip)
        next_a = next_a + noise
    next_a = np.clip(next_a, -1.0, 1.0)
    x = _sa(batch.next_obs, next_a)
    q = np.minimum(forward(nets.target_critic1, x), forward(nets.target_critic2, x))[:, 0]
    terminal = batch.dones > 0.5
    return np.where(terminal, batch.rewards, batch.rewards + cfg.gamma * np.where(terminal, 0.0, q))


def critic_objective(critic: MlpNet, x, y) -> tuple[float, np.ndarray]:
    """Mean squared Bellman error and its parameter gradient."""
    q, cache = forward_cached(critic, x)
    diff = q[:, 0] - y
    return float(np.mean(diff * diff)), backprop(critic, x, 2.0 * diff[:, None], cache)[0]


def critic_update(nets: AgentNets, batch: TransitionBatch, y, cfg: TrainCfg | None = None) -> tuple[float, float]:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (batch.size,):
        raise ShapeError(f"targets shape {y.shape} does not match batch of {batch.size}")
    x = _sa(batch.obs, batch.actions)
    losses = []
    for critic, opt in ((nets.critic1, nets.critic1_opt), (nets.critic2, nets.critic2_opt)):
        loss, grad = critic_objective(critic, x, y)
        adam_step(critic, grad, opt)
        losses.append(loss)
    return losses[0], losses[1]


def actor_objective(nets: AgentNets, obs, bc_weight, rl_weight, bc_mask=None) -> tuple[float, np.ndarray]:
    """``bc_weight * mean(mask * ||g(s) - pi(s)||^2) - rl_weight * mean Q1(s, pi(s))``.

    Only the actor receives a gradient; critic and generator are read-only.
    """
    pi, cache = forward_cached(nets.actor, obs)
    x = _sa(obs, pi)
    q, qcache = forward_cached(nets.critic1, x)
    dq_da = input_gradient(nets.critic1, x, np.ones_like(q), qcache)[:, nets.obs_dim :]
    loss = -rl_weight * float(np.mean(q))
    upstream = -rl_weight * dq_da
    if bc_weight > 0.0:
        if nets.generator is None:
            raise InvalidConfigError("imitation loss needs a generator")
        diff = pi - forward(nets.generator, obs)
        if bc_mask is not None:
            diff = diff * np.asarray(bc_mask, dtype=np.float64)[:, None]
        loss += bc_weight * float(np.mean(np.sum(diff * diff, axis=1)))
        upstream = upstream + (2.0 * bc_weight) * diff
    grad = backprop(nets.actor, obs, upstream, cache)[0]
    return loss, grad


def actor_loss_td3(nets: AgentNets, batch: TransitionBatch) -> tuple[float, np.ndarray]:
    return actor_objective(nets, batch.obs, 0.0, 1.0)


def actor_loss_td3fg(nets: AgentNets, batch: TransitionBatch, t, schedules: ScheduleSet) -> tuple[float, np.ndarray]:
    return actor_objective(nets, batch.obs, schedules.bc_weight(t), schedules.delta(t))


def qfilter_mask(nets: AgentNets, obs) -> np.ndarray:
    """``Q1(s, g(s)) > Q1(s, pi(s))`` per sample; ties exclude the sample."""
    q_ref = forward(nets.critic1, _sa(obs, forward(nets.generator, obs)))[:, 0]
    q_pi = forward(nets.critic1, _sa(obs, forward(nets.actor, obs)))[:, 0]
    return q_ref > q_pi


def actor_loss_qfilter(nets: AgentNets, batch: TransitionBatch) -> tuple[float, np.ndarray]:
    return actor_objective(nets, batch.obs, 1.0, 1.0, qfilter_mask(nets, batch.obs))


def soft_update(source: MlpNet, target: MlpNet, tau) -> MlpNet:
    """Polyak averaging ``target <- tau * source + (1 - tau) * target``."""
    if source.architecture() != target.architecture():
        raise ShapeError(f"soft_update between {source!r} and {target!r}")
    target.params[:] = tau * source.params + (1.0 - tau) * target.params
    return target


def logged_weights(variant, schedules: ScheduleSet, t) -> dict[str, float]:
    """Schedule weights a variant actually applies at step ``t``."""
    spec = variant_spec(variant)
    w = {"alpha": 0.0, "beta": 0.0, "gamma": 0.0, "delta": 1.0}
    if spec.exploration == "ou":
        w["alpha"] = schedules.alpha(t)
    if spec.generator_noise:
        w["beta"] = schedules.beta(t)
    if spec.actor_loss == "blend":
        w["gamma"] = schedules.gamma(t)
        w["delta"] = schedules.delta(t)
    return w


def actor_update(nets: AgentNets, batch: TransitionBatch, t, cfg: TrainCfg, schedules: ScheduleSet) -> float:
    kind = variant_spec(cfg.variant).actor_loss
    if kind == "blend":
        loss, grad = actor_loss_td3fg(nets, batch, t, schedules)
    elif kind == "qfilter":
        loss, grad = actor_loss_qfilter(nets, batch)
    else:
        loss, grad = actor_loss_td3(nets, batch)
    adam_step(nets.actor, grad, nets.actor_opt)
    return loss


def train_step(nets: AgentNets, buffer: ReplayBuffer, t, cfg: TrainCfg, schedules: ScheduleSet, rng) -> dict:
    """Critic update every call; actor and target update every ``policy_delay`` calls."""
    batch = buffer.sample(cfg.batch_size, rng)
    y = critic_targets(batch, nets, cfg, rng)
    l1, l2 = critic_update(nets, batch, y, cfg)
    nets.n_updates += 1
    actor_loss = float("nan")
    updated = nets.n_updates % cfg.policy_delay == 0
    if updated:
        actor_loss = actor_update(nets, batch, t, cfg, schedules)
        soft_update(nets.actor, nets.target_actor, cfg.tau)
        soft_update(nets.critic1, nets.target_critic1, cfg.tau)
        soft_update(nets.critic2, nets.target_critic2, cfg.tau)
    metrics = {"critic_loss": 0.5 * (l1 + l2), "actor_loss": actor_loss, "actor_updated": updated}
    metrics.update(logged_weights(cfg.variant, schedules, t))
    return metrics


def select_action(nets: AgentNets, obs, t, variant, schedules: ScheduleSet, ou_state: OUState, expl_noise, rng) -> np.ndarray:
    """Behavior action for ``variant`` at global step ``t``."""
    spec = variant_spec(variant)
    if spec.exploration == "ou":
        generator = nets.generator if spec.generator_noise else None
        return exploration_action(nets.actor, generator, obs, t, schedules, ou_state, rng)
    return gaussian_action(nets.actor, obs, expl_noise, rng)
