"""REINFORCE training of the region-selection head on a contextual bandit world.

Each bandit episode plays one sound from a small set of classes. The state
s_t is produced by the full GEN^b + memory-decoder path from the (noisy)
audio class scores, and the policy picks one of a few regions, earning 1 when
it matches the class's home region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import acoustics as ac
from .agents import RegionPolicy, reinforce_update
from .gen import GraphEncoder, audio_scores45
from .knowledge import KnowledgeGraph
from .memory import AttentionParams, Encoders, SceneMemory, belief_query, build_entry, decode, encode
from .rng import derive_seed, make_rng
from .vocab import DEFAULT_VOCAB

DEFAULT_CLASSES = ("bathtub", "bed", "sink")
DEFAULT_REGIONS = ("bathroom", "bedroom", "kitchen")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 5000
    batch_size: int = 10
    lr: float = 2.0
    seed: int = 0
    classes: tuple = DEFAULT_CLASSES
    regions: tuple = DEFAULT_REGIONS
    audio_accuracy: float = 0.973
    memory_entries: int = 8

    def validate(self):
        if self.episodes < 1 or self.batch_size < 1:
            raise TrainingError("episodes and batch_size must be >= 1")
        if len(self.classes) != len(self.regions) or len(self.classes) < 2:
            raise TrainingError("classes and regions must pair up, at least two of each")
        if not np.isfinite(self.lr) or self.lr <= 0:
            raise TrainingError("lr must be positive")


class BanditWorld:
    """Maps a sounding class to the state vector seen by the region head."""

    def __init__(self, kg: KnowledgeGraph, cfg: TrainConfig):
        cfg.validate()
        self.cfg = cfg
        self.class_ids = [DEFAULT_VOCAB.object_index(c) for c in cfg.classes]
        self.gen_b = GraphEncoder.create(kg.Ahat, seed=derive_seed(cfg.seed, "gen-b"))
        self.attn = AttentionParams.create(cfg.seed)
        enc = Encoders.create(cfg.seed)
        gen_v = GraphEncoder.create(kg.Ahat, seed=derive_seed(cfg.seed, "gen-v"))
        rng = make_rng(cfg.seed, "bandit-memory")
        mem = SceneMemory()
        for i in range(cfg.memory_entries):
            vision = (rng.random(45) < 0.1).astype(float)
            entry = build_entry(enc.vision_stub(vision, rng.random(3)), gen_v.encode(vision),
                                (float(i), 0.0), 90 * (i % 4), enc.action_embedding(i % 4))
            mem = mem.push(entry)
        self.Me = encode(mem, self.attn)
        self.oracle = ac.OracleConfig(audio_accuracy=cfg.audio_accuracy)
        # feature standardization from a seeded calibration sample
        cal = make_rng(cfg.seed, "bandit-calibration")
        raw = np.array([self._raw_state(i % self.n_actions, cal) for i in range(30 * self.n_actions)])
        self.mu = raw.mean(axis=0)
        self.sigma = raw.std(axis=0) + 1e-12

    @property
    def n_actions(self) -> int:
        return len(self.class_ids)

    def _raw_state(self, context: int, rng: np.random.Generator) -> np.ndarray:
        scores = ac.audio_class_oracle(ac.AudioFeatures(1.0, 0.0, (1.0, 0.0), 1.0), self.class_ids[context],
                                       self.oracle, rng)
        e_bgen = self.gen_b.encode(audio_scores45(scores))
        return decode(self.Me, belief_query(e_bgen, scores, (0.0, 0.0)), self.attn)

    def state(self, context: int, rng: np.random.Generator) -> np.ndarray:
        return (self._raw_state(context, rng) - self.mu) / self.sigma / np.sqrt(self.mu.size)

    def sample(self, rng: np.random.Generator):
        context = int(rng.integers(self.n_actions))
        return context, self.state(context, rng)


@dataclass
class TrainResult:
    policy: RegionPolicy
    curve: list = field(default_factory=list)  # (batch, mean return, greedy accuracy)
    final_accuracy: float = 0.0
    batches_done: int = 0


def run_batch(world: BanditWorld, policy: RegionPolicy, b: int):
    rng = make_rng(world.cfg.seed, "batch", b)
    batch, hits = [], []
    for _ in range(world.cfg.batch_size):
        ctx, s = world.sample(rng)
        a = policy.sample(s, rng)
        batch.append((s[None, :], [a], 1.0 if a == ctx else 0.0))
        hits.append(policy.greedy(s) == ctx)
    return batch, hits


def train(kg: KnowledgeGraph, cfg: TrainConfig, policy: RegionPolicy | None = None, start_batch: int = 0,
          n_batches: int | None = None) -> TrainResult:
    """Train from ``start_batch``; every batch draws from its own seeded stream, so resuming is exact."""
    world = BanditWorld(kg, cfg)
    dim = world.Me.shape[1]
    policy = policy or RegionPolicy.zeros(world.n_actions, dim)
    total = -(-cfg.episodes // cfg.batch_size)
    end = total if n_batches is None else min(total, start_batch + n_batches)
    curve, recent = [], []
    for b in range(start_batch, end):
        batch, hits = run_batch(world, policy, b)
        policy = reinforce_update(policy, batch, cfg.lr)
        curve.append((b, float(np.mean([G for _, _, G in batch])), float(np.mean(hits))))
        recent.extend(hits)
    tail = recent[-500:]
    return TrainResult(policy, curve, float(np.mean(tail)) if tail else 0.0, end)


def save_checkpoint(result: TrainResult, path) -> None:
    from .gen import save_weights

    save_weights([result.policy.W], path)
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump({"batches_done": result.batches_done}, fh)


def load_checkpoint(path):
    from .gen import load_weights

    (W,) = load_weights(path)
    with open(str(path) + ".json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return RegionPolicy(W), int(meta["batches_done"])
