"""Epoch-indexed scalar schedules driving the attention fusion.

All schedules are pure functions of training progress tau = min(t/T, 1).
A ScheduleState snapshot bundles every scalar the fusion stage needs for
one epoch; blocks never see the clock directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LAMBDA_MODES = ("scheduled", "learnable")
PHASE_KINDS = ("linear", "sigmoid")

_SIG_STEEPNESS = 8.0


@dataclass(frozen=True)
class ScheduleState:
    """All time-dependent scalars for one training epoch."""

    t: int
    T: int
    tau: float
    alpha_t: float
    beta_t: float
    lambda_t: float
    scale_t: float
    mode: str = "scheduled"


def progress(t: int, T: int) -> float:
    """Training progress tau = t/T, clamped to 1 past the horizon."""
    if T < 1:
        raise ValueError(f"progress: total epochs must be >= 1, got {T}")
    if t < 0:
        raise ValueError(f"progress: epoch must be >= 0, got {t}")
    return min(t / T, 1.0)


def alpha_schedule(tau: float) -> float:
    """Channel-attention weight, 0.6 at tau=0 rising linearly to 0.66."""
    return 0.6 * (1.0 + 0.1 * tau)


def lambda_schedule(tau: float) -> float:
    """Residual weight, 0.5 at tau=0 rising linearly to 0.72."""
    return 0.5 + 0.22 * tau


def beta_schedule(tau: float, base: float = 0.4, ramp: float = 0.1) -> float:
    """Spatial-attention weight, base*(1 + ramp*tau); defaults rise 0.4 to 0.44."""
    return base * (1.0 + ramp * tau)


def phase_scale(tau: float, kind: str = "linear") -> float:
    """Intensity modulation from 0.5 to 1.0, linear or sigmoidal in tau."""
    if kind == "linear":
        return 0.5 + 0.5 * tau
    if kind == "sigmoid":
        # Centered at tau=0.5, steepness 8, rescaled so the endpoints
        # land on exactly 0.5 and 1.0.
        raw = 1.0 / (1.0 + math.exp(-_SIG_STEEPNESS * (tau - 0.5)))
        lo = 1.0 / (1.0 + math.exp(_SIG_STEEPNESS * 0.5))
        hi = 1.0 / (1.0 + math.exp(-_SIG_STEEPNESS * 0.5))
        return 0.5 + 0.5 * (raw - lo) / (hi - lo)
    raise ValueError(f"phase_scale: unknown kind {kind!r}, expected one of {PHASE_KINDS}")


def schedule_state(
    t: int,
    T: int,
    beta_base: float = 0.4,
    beta_ramp: float = 0.1,
    phase: str = "linear",
    mode: str = "scheduled",
) -> ScheduleState:
    """Evaluate every schedule at epoch t of T and freeze the result."""
    if mode not in LAMBDA_MODES:
        raise ValueError(f"schedule_state: unknown mode {mode!r}, expected one of {LAMBDA_MODES}")
    tau = progress(t, T)
    return ScheduleState(
        t=t,
        T=T,
        tau=tau,
        alpha_t=alpha_schedule(tau),
        beta_t=beta_schedule(tau, beta_base, beta_ramp),
        lambda_t=lambda_schedule(tau),
        scale_t=phase_scale(tau, phase),
        mode=mode,
    )


def step(state: ScheduleState, t: int, T: int) -> ScheduleState:
    """Advance to epoch t of T under the default schedule forms."""
    return schedule_state(t, T, mode=state.mode)
