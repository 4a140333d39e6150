"""Corridor-walker: a point mass pushed along a walled corridor.

The reward mirrors locomotion benchmarks: forward progress, an alive bonus
while inside the corridor, a quadratic control cost and a contact cost when
the body scrapes the wall zone. Observations are
``(v_x, v_y, p_y, remaining_fraction)``; ``p_x`` is hidden because it grows
without bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import EpisodeFinishedError, InvalidConfigError

TIERS = ("expert", "suboptimal", "failing")


@dataclass(frozen=True)
class EnvSpec:
    name: str = "corridor-walker"
    obs_dim: int = 4
    act_dim: int = 2
    horizon: int = 200
    dt: float = 0.05
    mass: float = 1.0
    drag: float = 0.05
    force_scale: float = 2.0
    y_max: float = 1.0
    healthy_bonus: float = 1.0
    c_ctrl: float = 0.05
    c_contact: float = 0.5
    # |p_y| beyond contact_zone * y_max counts as touching the wall
    contact_zone: float = 0.8
    reset_noise: float = 0.05
    forward_scale: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidConfigError("horizon must be at least 1")
        if self.obs_dim < 1 or self.act_dim < 1:
            raise InvalidConfigError("obs_dim and act_dim must be positive")
        if not 0.0 <= self.drag < 1.0:
            raise InvalidConfigError("drag must lie in [0, 1)")


class Components(NamedTuple):
    fr: float
    hr: float
    cc: float
    tc: float

    def total(self) -> float:
        return self.fr + self.hr - self.cc - self.tc


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    components: Components
    origin: str = "agent"


class CorridorWalker:
    """Gym-style wrapper around the corridor dynamics.

    >>> env = CorridorWalker()
    >>> obs = env.reset(seed=0)
    >>> obs, reward, done, info = env.step([1.0, 0.0])
    """

    def __init__(self, spec: EnvSpec | None = None):
        self.spec = spec or EnvSpec()
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.t = 0
        self.done = True

    def observe(self) -> np.ndarray:
        remaining = 1.0 - self.t / self.spec.horizon
        return np.array([self.vel[0], self.vel[1], self.pos[1], remaining])

    def reset(self, seed=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        eps = self.spec.reset_noise
        self.pos = np.array([0.0, rng.uniform(-eps, eps)])
        self.vel = rng.uniform(-eps, eps, size=2)
        self.t = 0
        self.done = False
        return self.observe()

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self.done:
            raise EpisodeFinishedError("step() called on a finished episode; call reset()")
        spec = self.spec
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (spec.act_dim,):
            raise InvalidConfigError(f"action must have shape ({spec.act_dim},), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidConfigError("action contains non-finite entries")
        a = np.clip(a, -1.0, 1.0)

        x_before = self.pos[0]
        self.vel = (1.0 - spec.drag) * self.vel + spec.force_scale * a * spec.dt / spec.mass
        self.pos = self.pos + self.vel * spec.dt
        self.t += 1

        fr = spec.forward_scale * (self.pos[0] - x_before) / spec.dt
        healthy = abs(self.pos[1]) <= spec.y_max
        hr = spec.healthy_bonus if healthy else 0.0
        cc = spec.c_ctrl * float(a @ a)
        tc = spec.c_contact if abs(self.pos[1]) > spec.contact_zone * spec.y_max else 0.0
        comps = Components(float(fr), hr, cc, tc)
        self.done = (not healthy) or self.t >= spec.horizon
        info = {"components": comps, "healthy": healthy, "action": a}
        return self.observe(), comps.total(), self.done, info


ENV_REGISTRY: dict[str, Callable[..., CorridorWalker]] = {"corridor-walker": CorridorWalker}
_DEFAULT_SPECS: dict[str, EnvSpec] = {"corridor-walker": EnvSpec()}


def register_env(name: str, factory, spec: EnvSpec) -> None:
    ENV_REGISTRY[name] = factory
    _DEFAULT_SPECS[name] = spec


def make_spec(name="corridor-walker", **overrides) -> EnvSpec:
    if name not in _DEFAULT_SPECS:
        raise InvalidConfigError(f"unknown environment {name!r}; known: {sorted(_DEFAULT_SPECS)}")
    try:
        return replace(_DEFAULT_SPECS[name], **overrides)
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from None


def make_env(spec: EnvSpec) -> CorridorWalker:
    return ENV_REGISTRY[spec.name](spec)


def reset(spec: EnvSpec, seed) -> tuple[np.ndarray, CorridorWalker]:
    env = make_env(spec)
    return env.reset(seed), env


def step(env: CorridorWalker, action):
    """``(obs, reward, done, components)`` for one environment step."""
    obs, reward, done, info = env.step(action)
    return obs, reward, done, info["components"]


# scripted demonstrators

EXPERT_GAINS = {"v_target": 1.2, "k_v": 2.0, "k_p": 2.0, "k_d": 1.5}
SUBOPTIMAL_GAINS = {"v_target": 0.6, "k_v": 1.0, "k_p": 0.5, "k_d": 0.3}
SUBOPTIMAL_NOISE = 0.3


def _controller(obs, gains) -> np.ndarray:
    v_x, v_y, p_y = obs[0], obs[1], obs[2]
    a_x = gains["k_v"] * (gains["v_target"] - v_x)
    a_y = -gains["k_p"] * p_y - gains["k_d"] * v_y
    return np.clip(np.array([a_x, a_y]), -1.0, 1.0)


def scripted_expert(tier, obs, rng, fail_after=None, fail_sign=None) -> np.ndarray:
    """Action of a hand-written corridor controller degraded by ``tier``.

    ``expert`` cruises at a moderate target speed while centering ``p_y``;
    ``suboptimal`` uses detuned gains plus Gaussian noise; ``failing``
    behaves like the expert until the elapsed episode fraction passes
    ``fail_after`` and then saturates sideways into the wall.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if tier == "expert":
        return _controller(obs, EXPERT_GAINS)
    if tier == "suboptimal":
        a = _controller(obs, SUBOPTIMAL_GAINS) + SUBOPTIMAL_NOISE * rng.standard_normal(2)
        return np.clip(a, -1.0, 1.0)
    if tier == "failing":
        if fail_after is None:
            fail_after = rng.uniform(0.1, 0.6)
        if fail_sign is None:
            fail_sign = 1.0 if rng.random() < 0.5 else -1.0
        elapsed = 1.0 - obs[3]
        if elapsed < fail_after:
            return _controller(obs, EXPERT_GAINS)
        return np.array([0.3, fail_sign])
    raise InvalidConfigError(f"unknown demo tier {tier!r}; expected one of {TIERS}")


class ScriptedExpert:
    """Policy callable for one demo episode; failing-tier randomness is drawn once."""

    def __init__(self, tier, rng):
        if tier not in TIERS:
            raise InvalidConfigError(f"unknown demo tier {tier!r}; expected one of {TIERS}")
        self.tier = tier
        self.rng = rng
        self.fail_after = rng.uniform(0.1, 0.6) if tier == "failing" else None
        self.fail_sign = (1.0 if rng.random() < 0.5 else -1.0) if tier == "failing" else None

    def __call__(self, obs) -> np.ndarray:
        return scripted_expert(self.tier, obs, self.rng, self.fail_after, self.fail_sign)


@dataclass
class Trajectory:
    transitions: list[Transition] = field(default_factory=list)
    total_return: float = 0.0
    tier: str = "agent"
    seed: int = 0

    def __len__(self):
        return len(self.transitions)

    def component_sums(self) -> Components:
        if not self.transitions:
            return Components(0.0, 0.0, 0.0, 0.0)
        c = np.array([tr.components for tr in self.transitions]).sum(axis=0)
        return Components(*(float(v) for v in c))


def rollout(spec: EnvSpec, policy, seed, max_steps=None, tier="agent", origin="agent") -> Trajectory:
    """Run ``policy(obs) -> action`` from ``reset(spec, seed)`` until done or ``max_steps``."""
    max_steps = spec.horizon if max_steps is None else max_steps
    traj = Trajectory(tier=tier, seed=int(seed))
    if max_steps <= 0:
        return traj
    obs, env = reset(spec, seed)
    total = 0.0
    for _ in range(max_steps):
        action = policy(obs)
        obs_next, reward, done, info = env.step(action)
        traj.transitions.append(
            Transition(obs, info["action"], reward, obs_next, done, info["components"], origin)
        )
        total += reward
        obs = obs_next
        if done:
            break
    traj.total_return = total
    return traj
