"""Leaky integrate-and-fire dynamics with hard reset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = 0.25
DEFAULT_THETA = 1.0
DEFAULT_SURROGATE_WIDTH = 0.5


@dataclass(frozen=True)
class LifConfig:
    tau: float = DEFAULT_TAU
    theta: float = DEFAULT_THETA
    surrogate_width: float = DEFAULT_SURROGATE_WIDTH

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.surrogate_width <= 0:
            raise ValueError(f"surrogate_width must be positive, got {self.surrogate_width}")


@dataclass
class LifState:
    """Membrane state of one layer.

    ``u`` is the post-reset potential carried to the next step, ``u_pre`` the
    potential before thresholding (what distillation taps).
    """

    u: np.ndarray
    u_pre: np.ndarray

    @classmethod
    def zeros(cls, shape) -> LifState:
        return cls(np.zeros(shape), np.zeros(shape))


def lif_step(state: LifState, input_current, cfg: LifConfig = LifConfig()):
    """Advance one timestep.

    Returns ``(spikes, new_state)`` with spikes as a uint8 array.
    """
    current = np.asarray(input_current, dtype=np.float64)
    if current.shape != state.u.shape:
        raise ValueError(f"input shape {current.shape} does not match state shape {state.u.shape}")
    u_pre = cfg.tau * state.u + current
    spikes = (u_pre >= cfg.theta).astype(np.uint8)
    u_new = u_pre * (1 - spikes)
    return spikes, LifState(u_new, u_pre)


def surrogate_grad(u_pre, cfg: LifConfig = LifConfig()) -> np.ndarray:
    """Rectangular surrogate for d(spike)/d(u_pre), boundary inclusive."""
    a = cfg.surrogate_width
    u_pre = np.asarray(u_pre, dtype=np.float64)
    return np.where(np.abs(u_pre - cfg.theta) <= a, 1.0 / (2.0 * a), 0.0)


def run_lif(currents, cfg: LifConfig = LifConfig()):
    """Run a full ``[T, ...]`` current sequence from rest.

    Returns ``(spikes, u_pre)`` stacked over time.
    """
    currents = np.asarray(currents, dtype=np.float64)
    state = LifState.zeros(currents.shape[1:])
    spikes = np.empty(currents.shape, dtype=np.uint8)
    u_pre = np.empty(currents.shape)
    for t in range(currents.shape[0]):
        spikes[t], state = lif_step(state, currents[t], cfg)
        u_pre[t] = state.u_pre
    return spikes, u_pre
