"""Exploration noise: an Ornstein-Uhlenbeck process plus a generator bias."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import MlpNet, forward
from .schedules import ScheduleSet


@dataclass
class OUState:
    x: np.ndarray
    theta: float = 0.15
    mu: float = 0.0
    sigma: float = 0.2
    dt: float = 1.0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=np.float64)
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @classmethod
    def at_mean(cls, dim, theta=0.15, mu=0.0, sigma=0.2, dt=1.0) -> OUState:
        return cls(np.full(dim, mu, dtype=np.float64), theta, mu, sigma, dt)

    def reset(self) -> None:
        self.x = np.full_like(self.x, self.mu)

    def stationary_variance(self) -> float:
        """Variance of the discrete Euler recursion at stationarity."""
        rho = 1.0 - self.theta * self.dt
        return self.sigma**2 * self.dt / (1.0 - rho * rho)


def ou_step(state: OUState, rng) -> tuple[np.ndarray, OUState]:
    """Euler-Maruyama: ``x += theta (mu - x) dt + sigma sqrt(dt) z``."""
    x = state.x + state.theta * (state.mu - state.x) * state.dt
    if state.sigma:
        x = x + state.sigma * np.sqrt(state.dt) * rng.standard_normal(state.x.shape)
    state.x = x
    return x.copy(), state


def generator_noise(generator: MlpNet, obs) -> np.ndarray:
    return forward(generator, obs)


def exploration_action(actor, generator, obs, t, schedules: ScheduleSet, ou_state: OUState, rng) -> np.ndarray:
    """``clip(actor(s) + alpha(t) * ou + beta(t) * generator(s), -1, 1)``.

    The OU process only advances (and only consumes ``rng``) while its
    weight is nonzero; the generator term is skipped when ``generator`` is
    ``None`` or its weight is zero.
    """
    action = forward(actor, obs)
    alpha = schedules.alpha(t)
    if alpha > 0.0:
        noise, _ = ou_step(ou_state, rng)
        action = action + alpha * noise
    if generator is not None:
        beta = schedules.beta(t)
        if beta > 0.0:
            action = action + beta * generator_noise(generator, obs)
    return np.clip(action, -1.0, 1.0)


def gaussian_action(actor, obs, sigma, rng) -> np.ndarray:
    """Plain TD3 exploration: ``clip(actor(s) + N(0, sigma^2), -1, 1)``."""
    action = forward(actor, obs)
    if sigma > 0.0:
        action = action + sigma * rng.standard_normal(action.shape)
    return np.clip(action, -1.0, 1.0)
