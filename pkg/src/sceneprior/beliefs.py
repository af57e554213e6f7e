"""Recursive beliefs over the sounding object's class and egocentric location."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXPONENTIAL = "exponential"
DYNAMIC = "dynamic"
CLASS_DELTA = 0.5

# exact rotation matrices for the grid turns, keyed by degrees
_ROT = {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}


class BeliefError(ValueError):
    pass


@dataclass(frozen=True)
class ClassBelief:
    scores: np.ndarray
    last_update_step: int = -1

    @classmethod
    def uniform(cls, n: int = 21):
        return cls(np.full(n, 1.0 / n))

    def argmax(self) -> int:
        return int(np.argmax(self.scores))


@dataclass(frozen=True)
class LocationBelief:
    offset: tuple = (0.0, 0.0)
    drr: float = 0.0

    def magnitude(self) -> float:
        return float(np.hypot(*self.offset))


@dataclass(frozen=True)
class PoseDelta:
    translation: tuple = (0, 0)  # meters, previous egocentric frame
    rotation: int = 0  # degrees counter-clockwise

    def __post_init__(self):
        if self.rotation % 360 not in _ROT:
            raise BeliefError(f"rotation must be a multiple of 90 degrees, got {self.rotation}")


def update_class_belief(prev: ClassBelief, obs, delta: float = CLASS_DELTA, step: int | None = None) -> ClassBelief:
    """``(1 - delta) * obs + delta * prev``; ``obs=None`` (silence) keeps ``prev``."""
    if obs is None:
        return prev
    obs = np.asarray(obs, dtype=float)
    if obs.shape != prev.scores.shape:
        raise BeliefError(f"observation shape {obs.shape} != belief shape {prev.scores.shape}")
    if np.any(obs < 0) or np.any(obs > 1):
        raise BeliefError("class observation entries must lie in [0, 1]")
    last = prev.last_update_step + 1 if step is None else step
    return ClassBelief((1.0 - delta) * obs + delta * prev.scores, last)


def pose_transform(offset, dp: PoseDelta) -> tuple:
    """Re-express a previous egocentric offset in the frame after ``dp``."""
    c, s = _ROT[dp.rotation % 360]
    x = offset[0] - dp.translation[0]
    y = offset[1] - dp.translation[1]
    # R(-theta) applied to (x, y)
    return (c * x + s * y, -s * x + c * y)


def update_location_belief(prev: LocationBelief, obs, dp: PoseDelta, mode: str = EXPONENTIAL) -> LocationBelief:
    """Blend a new ``(offset, drr)`` estimate with the transported prior; ``obs=None`` is silence."""
    if mode not in (EXPONENTIAL, DYNAMIC):
        raise BeliefError(f"unknown location belief mode {mode!r}")
    prior = pose_transform(prev.offset, dp)
    if obs is None:
        return LocationBelief(prior, 0.0)
    l_hat, drr_hat = obs
    if mode == DYNAMIC and not (0.0 <= drr_hat <= 1.0):
        raise BeliefError(f"estimated DRR {drr_hat} outside [0, 1]")
    w = 0.5 if mode == EXPONENTIAL else float(drr_hat)
    offset = (w * l_hat[0] + (1.0 - w) * prior[0], w * l_hat[1] + (1.0 - w) * prior[1])
    return LocationBelief(offset, float(drr_hat))
