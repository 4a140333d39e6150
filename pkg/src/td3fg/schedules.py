"""Linear weight schedules for exploration noise and actor-loss blending.

``alpha`` weights the OU noise, ``beta`` the generator bias, ``gamma`` the
imitation loss and ``delta`` the critic (RL) loss. All take the global
environment step as their argument.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidScheduleError


def linear_decay(t, horizon) -> float:
    """``max(1 - t / horizon, 0)``."""
    if horizon <= 0:
        raise InvalidScheduleError(f"horizon must be positive, got {horizon}")
    if t < 0:
        raise InvalidScheduleError(f"step must be non-negative, got {t}")
    return max(1.0 - t / horizon, 0.0)


@dataclass(frozen=True)
class ScheduleSet:
    T1: int = 10_000
    T2: int = 5_000
    T3: int = 5_000
    theta_offset: float = 0.2
    bc_scale: float = 1.0

    def __post_init__(self):
        for name in ("T1", "T2", "T3"):
            if getattr(self, name) <= 0:
                raise InvalidScheduleError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.theta_offset <= 1.0:
            raise InvalidScheduleError(f"theta_offset must lie in [0, 1], got {self.theta_offset}")
        if self.bc_scale < 0:
            raise InvalidScheduleError(f"bc_scale must be non-negative, got {self.bc_scale}")

    @classmethod
    def from_total(cls, t1, theta_offset=0.2, bc_scale=1.0) -> ScheduleSet:
        """Stock relation ``T3 = T2 = T1 / 2``."""
        half = max(int(t1) // 2, 1)
        return cls(int(t1), half, half, theta_offset, bc_scale)

    def alpha(self, t) -> float:
        return linear_decay(t, self.T1)

    def beta(self, t) -> float:
        return linear_decay(t, self.T2)

    def gamma(self, t) -> float:
        return linear_decay(t, self.T3)

    def delta(self, t) -> float:
        return rl_weight(t, self)

    def bc_weight(self, t) -> float:
        return self.bc_scale * self.gamma(t)

    def weights(self, t) -> dict[str, float]:
        return {"alpha": self.alpha(t), "beta": self.beta(t), "gamma": self.gamma(t), "delta": self.delta(t)}

    @property
    def max_horizon(self) -> int:
        return max(self.T1, self.T2, self.T3)


def rl_weight(t, schedules: ScheduleSet) -> float:
    """``min(theta_offset + 1 - gamma(t), 1)``."""
    # grouped so that delta(0) equals the offset exactly
    return min(schedules.theta_offset + (1.0 - linear_decay(t, schedules.T3)), 1.0)
