"""Stepsize (eta_t) and averaging-weight (alpha_t) schedules.

All kinds are pure functions of the agent count n, the iteration t, and at
most the horizon T or a tuning scale. None of them look at smoothness
constants, gradient noise, or the communication graph; that is the point of
the normalized methods these schedules drive.

Kinds:
    dnasa_fixed        eta = n^(1/4)/T^(3/4),  alpha = sqrt(n/T), for all t
    dnasa_diminishing  eta_t = n^(1/4)/t^(3/4), alpha_t = sqrt(n/t); zero at t=0
    sqrt_diminishing   eta_t = eta_scale * sqrt(n/t); no alpha (baselines)
    asagt_alpha        eta_t = eta_scale * sqrt(n/t), alpha_t = min(sqrt(n/t), 0.3)
    constant           eta_t = eta_scale, alpha_t = alpha_const

Alphas are clamped into [0, 1]: for t < n the raw sqrt(n/t) exceeds 1, and
alpha = 1 simply means the moving average is replaced by the fresh tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

__all__ = ["Schedule", "SCHEDULE_KINDS"]

SCHEDULE_KINDS = (
    "dnasa_fixed",
    "dnasa_diminishing",
    "sqrt_diminishing",
    "asagt_alpha",
    "constant",
)

# Schedules that emit an averaging weight and can drive dnasa / dasagt.
ALPHA_BEARING = ("dnasa_fixed", "dnasa_diminishing", "asagt_alpha", "constant")


@dataclass(frozen=True)
class Schedule:
    kind: str
    n: int
    horizon: int | None = None
    eta_scale: float = 1.0
    alpha_const: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(
                f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}"
            )
        if self.n < 1:
            raise ConfigError(f"schedule needs n >= 1, got {self.n}")
        if self.kind == "dnasa_fixed":
            if self.horizon is None or self.horizon < 1:
                raise ConfigError("schedule kind dnasa_fixed requires the horizon T")
        if self.kind.startswith("dnasa") and self.eta_scale != 1.0:
            raise ConfigError(
                "dnasa schedules are parameter-free; eta_scale must stay 1.0"
            )
        if self.eta_scale < 0:
            raise ConfigError(f"eta_scale must be >= 0, got {self.eta_scale}")
        if not 0.0 <= self.alpha_const <= 1.0:
            raise ConfigError(f"alpha_const must lie in [0, 1], got {self.alpha_const}")

    @property
    def has_alpha(self) -> bool:
        return self.kind in ALPHA_BEARING

    def eta(self, t: int) -> float:
        """Stepsize at iteration t (diminishing kinds emit 0 at t = 0)."""
        if t < 0:
            raise ConfigError(f"iteration index must be >= 0, got {t}")
        if self.kind == "dnasa_fixed":
            return self.n**0.25 / self.horizon**0.75
        if self.kind == "dnasa_diminishing":
            return 0.0 if t == 0 else self.n**0.25 / t**0.75
        if self.kind in ("sqrt_diminishing", "asagt_alpha"):
            return 0.0 if t == 0 else self.eta_scale * math.sqrt(self.n / t)
        return self.eta_scale  # constant

    def alpha(self, t: int) -> float:
        """Averaging weight at iteration t, clamped into [0, 1]."""
        if t < 0:
            raise ConfigError(f"iteration index must be >= 0, got {t}")
        if self.kind == "sqrt_diminishing":
            raise ConfigError(
                "schedule kind sqrt_diminishing carries no averaging weight; "
                "dnasa/dasagt need an alpha-bearing schedule"
            )
        if self.kind == "dnasa_fixed":
            return min(math.sqrt(self.n / self.horizon), 1.0)
        if self.kind == "dnasa_diminishing":
            return 0.0 if t == 0 else min(math.sqrt(self.n / t), 1.0)
        if self.kind == "asagt_alpha":
            return 0.0 if t == 0 else min(math.sqrt(self.n / t), 0.3)
        return self.alpha_const  # constant
