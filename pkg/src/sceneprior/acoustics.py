"""Parametric acoustics and pre-trained-model stand-ins.

The room impulse response is a direct impulse of amplitude ``1 / (1 + d)``
at the propagation delay, followed by an exponentially decaying noise tail
whose energy grows with geodesic distance ``d``. The tail is rescaled in
two pieces (inside and outside the 10 ms direct window) so that its energy
split follows the envelope exactly; DRR is then a deterministic, strictly
decreasing function of distance while the waveform itself stays seeded noise.

Egocentric frame: +x along the heading, +y to the agent's left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .vocab import DEFAULT_VOCAB
from .worldgen import HouseMap, ObjectInstance, Pose, STEPS, WorldError, geodesic_distance

DIRECT_WINDOW_S = 0.010


class AcousticsError(ValueError):
    pass


@dataclass(frozen=True)
class AcousticParams:
    sound_speed: float = 343.0
    sample_rate: int = 16000
    tail_decay: float = 0.2  # seconds, amplitude time constant
    tail_energy_coeff: float = 0.5  # tail energy = coeff * d * direct energy
    noise_floor: float = 1e-3  # tail truncated once the envelope drops below this

    def validate(self):
        if self.sound_speed <= 0 or self.sample_rate <= 0 or self.tail_decay <= 0:
            raise AcousticsError("sound_speed, sample_rate and tail_decay must be positive")
        if self.tail_energy_coeff < 0 or not (0 < self.noise_floor < 1):
            raise AcousticsError("tail_energy_coeff must be >= 0 and noise_floor in (0, 1)")


@dataclass(frozen=True)
class Rir:
    samples: np.ndarray
    sample_rate: int = 16000


@dataclass(frozen=True)
class SoundEvent:
    source: ObjectInstance
    duration: float  # seconds


@dataclass(frozen=True)
class AudioFeatures:
    intensity: float
    bearing: float  # radians, egocentric, wrapped to (-pi, pi]
    offset: tuple  # egocentric (dx, dy) meters
    distance: float  # geodesic meters (simulator side, not for policies)
    silent: bool = False


SILENT = AudioFeatures(0.0, 0.0, (0.0, 0.0), 0.0, True)


@dataclass(frozen=True)
class OracleConfig:
    audio_accuracy: float = 0.973
    vision_object_emr: float = 0.48
    vision_region_emr: float = 0.68
    loc_noise_base: float = 0.1  # meters
    drr_noise: float = 0.05
    fov_depth: int = 3
    fov_width: int = 3

    def validate(self):
        for name in ("audio_accuracy", "vision_object_emr", "vision_region_emr"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise AcousticsError(f"{name} must lie in [0, 1], got {v}")
        if self.loc_noise_base < 0 or self.drr_noise < 0:
            raise AcousticsError("noise scales must be nonnegative")

    def flip_probabilities(self, n_objects: int = 21, n_regions: int = 24) -> tuple:
        """Per-class flip rates whose all-correct probability hits the EMR targets."""
        return (1.0 - self.vision_object_emr ** (1.0 / n_objects), 1.0 - self.vision_region_emr ** (1.0 / n_regions))


def tail_window_fraction(params: AcousticParams) -> float:
    """Share of tail energy inside the direct window for the exponential envelope."""
    sr = params.sample_rate
    n_window = int(round(DIRECT_WINDOW_S * sr))
    n_tail = _tail_length(params)
    k = np.arange(n_tail)
    env = np.exp(-2.0 * (k + 1) / (params.tail_decay * sr))
    return float(env[: max(n_window - 1, 0)].sum() / env.sum())


def _tail_length(params: AcousticParams) -> int:
    return int(math.ceil(params.tail_decay * params.sample_rate * math.log(1.0 / params.noise_floor)))


def synthesize_rir_at_distance(distance: float, params: AcousticParams, rng: np.random.Generator) -> Rir:
    params.validate()
    sr = params.sample_rate
    delay = int(round(distance / params.sound_speed * sr))
    amp = 1.0 / (1.0 + distance)
    tail_energy = params.tail_energy_coeff * distance * amp * amp
    if tail_energy <= 0:
        samples = np.zeros(delay + 1)
        samples[delay] = amp
        return Rir(samples, sr)
    n_tail = _tail_length(params)
    k = np.arange(n_tail)
    env = np.exp(-(k + 1) / (params.tail_decay * sr))
    tail = rng.standard_normal(n_tail) * env
    # Keep every tail sample strictly below the direct peak so argmax finds it.
    n_in = max(int(round(DIRECT_WINDOW_S * sr)) - 1, 0)
    frac = tail_window_fraction(params)
    for sl, energy in ((slice(0, n_in), tail_energy * frac), (slice(n_in, None), tail_energy * (1 - frac))):
        seg = tail[sl]
        e = float(seg @ seg)
        if e > 0:
            tail[sl] = seg * math.sqrt(energy / e)
    np.clip(tail, -0.999 * amp, 0.999 * amp, out=tail)
    samples = np.concatenate([np.zeros(delay), [amp], tail])
    return Rir(samples, sr)


def synthesize_rir(house: HouseMap, src, rcv, params: AcousticParams | None = None, seed: int = 0) -> Rir:
    params = params or AcousticParams()
    try:
        d = geodesic_distance(house, src, rcv)
    except WorldError as exc:
        raise AcousticsError(str(exc)) from None
    rng = make_rng(seed, "rir", *src, *rcv)
    return synthesize_rir_at_distance(d, params, rng)


def true_drr(rir: Rir) -> float:
    """Energy in the 10 ms after the peak over total energy; 0 for a silent response."""
    x = np.asarray(rir.samples, dtype=float)
    energy = x * x
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    peak = int(np.argmax(np.abs(x)))
    window = int(round(DIRECT_WINDOW_S * rir.sample_rate))
    return float(energy[peak: peak + window].sum() / total)


def egocentric(delta, heading: int) -> tuple:
    """Rotate a world-frame vector into the frame of an agent facing ``heading``."""
    c, s = STEPS[heading]  # exact cos/sin for cardinal headings
    dx, dy = delta
    return (c * dx + s * dy, -s * dx + c * dy)


def observe_audio(house: HouseMap, event: SoundEvent, pose: Pose, t: int, step_seconds: float = 1.0) -> AudioFeatures:
    if t * step_seconds >= event.duration:
        return SILENT
    goal = event.source.cell
    d = geodesic_distance(house, pose.cell, goal)
    offset = egocentric((goal[0] - pose.cell[0], goal[1] - pose.cell[1]), pose.heading)
    bearing = math.atan2(offset[1], offset[0])
    return AudioFeatures(1.0 / (1.0 + d) ** 2, bearing, (float(offset[0]), float(offset[1])), d, False)


def audio_class_oracle(features: AudioFeatures, goal_class: int, cfg: OracleConfig, rng: np.random.Generator,
                       n_classes: int = DEFAULT_VOCAB.n_objects) -> np.ndarray:
    """Softmax-like class scores whose argmax is the goal with probability ``audio_accuracy``."""
    if features.silent:
        raise AcousticsError("audio class oracle called on a silent observation")
    if rng.random() < cfg.audio_accuracy:
        top = goal_class
    else:
        top = int(rng.integers(n_classes - 1))
        top += top >= goal_class
    logits = rng.normal(0.0, 1.0, n_classes)
    logits[top] = logits.max() + 1.0 + 2.0 * rng.random()
    e = np.exp(logits - logits.max())
    return e / e.sum()


def visible_cells(house: HouseMap, pose: Pose, depth: int = 3, width: int = 3) -> list:
    """Forward window cells; each lateral column is cut at its first wall."""
    fx, fy = STEPS[pose.heading]
    lx, ly = -fy, fx  # left of heading
    half = width // 2
    out = []
    for lat in range(-half, half + 1):
        for k in range(1, depth + 1):
            c = (pose.cell[0] + k * fx + lat * lx, pose.cell[1] + k * fy + lat * ly)
            if not house.is_free(c):
                break
            out.append(c)
    return out


def vision_ground_truth(house: HouseMap, pose: Pose, cfg: OracleConfig | None = None) -> np.ndarray:
    cfg = cfg or OracleConfig()
    vocab = DEFAULT_VOCAB
    truth = np.zeros(vocab.size)
    seen = set(visible_cells(house, pose, cfg.fov_depth, cfg.fov_width))
    for obj in house.objects:
        if obj.cell in seen:
            truth[vocab.object_index(obj.name)] = 1.0
    truth[vocab.n_objects + vocab.region_index(house.region_name_at(pose.cell))] = 1.0
    return truth


def vision_oracle(house: HouseMap, pose: Pose, cfg: OracleConfig, rng: np.random.Generator) -> np.ndarray:
    """45 binary scores: ground truth with independent per-class flips."""
    truth = vision_ground_truth(house, pose, cfg)
    n_obj = DEFAULT_VOCAB.n_objects
    p_obj, p_reg = cfg.flip_probabilities(n_obj, DEFAULT_VOCAB.n_regions)
    rates = np.concatenate([np.full(n_obj, p_obj), np.full(truth.size - n_obj, p_reg)])
    flips = rng.random(truth.size) < rates
    return np.where(flips, 1.0 - truth, truth)


def location_oracle(features: AudioFeatures, drr: float, cfg: OracleConfig, rng: np.random.Generator):
    """Noisy egocentric goal offset and DRR estimate."""
    if features.silent:
        raise AcousticsError("location oracle called on a silent observation")
    sigma = cfg.loc_noise_base * (1.0 + features.distance) * (1.0 - drr)
    noise = rng.normal(0.0, 1.0, 2) * sigma
    offset = (features.offset[0] + float(noise[0]), features.offset[1] + float(noise[1]))
    drr_hat = min(1.0, max(0.0, drr + float(rng.normal(0.0, 1.0)) * cfg.drr_noise))
    return offset, drr_hat


def write_raw_rir(rir: Rir, path) -> None:
    """Debug dump: little-endian float32 samples."""
    np.asarray(rir.samples, dtype="<f4").tofile(path)
