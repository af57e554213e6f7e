"""Scene memory: a bounded buffer of observation embeddings read by attention.

Entry layout (default width 274)::

    [ vision stub 128 | GEN^v 64 | x, y 2 | sin, cos heading 2 | action 16 | zero pad ]

The encoder is one single-head self-attention layer over the buffer; the
decoder cross-attends from an 87-wide belief query ``[GEN^b 64, c^b 21, l 2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .worldgen import HouseMap, Pose, STEPS

VISION_WIDTH = 128
GEN_WIDTH = 64
ACTION_WIDTH = 16
ENTRY_WIDTH = 274
QUERY_WIDTH = 87
D_MODEL = 64
CAPACITY = 150
N_ACTIONS = 4
RAY_CAP = 10


class SceneMemoryError(ValueError):
    pass


def _projection(seed: int, tag: str, fan_in: int, fan_out: int) -> np.ndarray:
    rng = make_rng(seed, tag)
    return rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)


def wall_rays(house: HouseMap, pose: Pose, cap: int = RAY_CAP) -> np.ndarray:
    """Free-cell run length ahead, to the left and to the right, scaled to [0, 1]."""
    fx, fy = STEPS[pose.heading]
    out = []
    for dx, dy in ((fx, fy), (-fy, fx), (fy, -fx)):
        n = 0
        c = pose.cell
        while n < cap:
            c = (c[0] + dx, c[1] + dy)
            if not house.is_free(c):
                break
            n += 1
        out.append(n / cap)
    return np.array(out)


@dataclass(frozen=True)
class Encoders:
    """Fixed seeded projections standing in for the learned visual and action encoders."""

    vision: np.ndarray  # (45 + 3, 128)
    action: np.ndarray  # (N_ACTIONS + 1, 16); last row = no previous action

    @classmethod
    def create(cls, seed: int = 0, n_scores: int = 45):
        return cls(_projection(seed, "vision-stub", n_scores + 3, VISION_WIDTH),
                   _projection(seed, "action-embed", N_ACTIONS + 1, ACTION_WIDTH))

    def vision_stub(self, scores45, rays) -> np.ndarray:
        return np.concatenate([np.asarray(scores45, dtype=float), np.asarray(rays, dtype=float)]) @ self.vision

    def action_embedding(self, action) -> np.ndarray:
        row = N_ACTIONS if action is None else int(action)
        return self.action[row]


def build_entry(vision_stub, e_vgen, pose_xy, heading: int, action_embedding, width: int = ENTRY_WIDTH) -> np.ndarray:
    theta = math.radians(heading)
    parts = [np.asarray(vision_stub, dtype=float), np.asarray(e_vgen, dtype=float),
             np.asarray(pose_xy, dtype=float), np.array([math.sin(theta), math.cos(theta)]),
             np.asarray(action_embedding, dtype=float)]
    core = np.concatenate(parts)
    if core.size > width:
        raise SceneMemoryError(f"entry payload {core.size} exceeds configured width {width}")
    return np.concatenate([core, np.zeros(width - core.size)])


@dataclass(frozen=True)
class SceneMemory:
    entries: tuple = ()
    capacity: int = CAPACITY
    width: int = ENTRY_WIDTH

    def __post_init__(self):
        if self.capacity < 1:
            raise SceneMemoryError("memory capacity must be >= 1")

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, entry) -> "SceneMemory":
        entry = np.asarray(entry, dtype=float)
        if entry.shape != (self.width,):
            raise SceneMemoryError(f"entry width {entry.shape} != configured {self.width}")
        kept = self.entries[-(self.capacity - 1):] if self.capacity > 1 else ()
        return SceneMemory(kept + (entry,), self.capacity, self.width)

    def matrix(self) -> np.ndarray:
        if not self.entries:
            raise SceneMemoryError("memory is empty")
        return np.vstack(self.entries)


def push(mem: SceneMemory, entry) -> SceneMemory:
    return mem.push(entry)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class AttentionParams:
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    dWq: np.ndarray  # decoder projections
    dWk: np.ndarray
    dWv: np.ndarray

    @property
    def d_model(self) -> int:
        return self.Wq.shape[1]

    @classmethod
    def create(cls, seed: int = 0, entry_width: int = ENTRY_WIDTH, d_model: int = D_MODEL,
               query_width: int = QUERY_WIDTH):
        p = lambda tag, a, b: _projection(seed, tag, a, b)  # noqa: E731
        return cls(p("enc-q", entry_width, d_model), p("enc-k", entry_width, d_model), p("enc-v", entry_width, d_model),
                   p("dec-q", query_width, d_model), p("dec-k", d_model, d_model), p("dec-v", d_model, d_model))


def self_attention(E, Wq, Wk, Wv):
    """Return ``(output, weights)`` of single-head scaled dot-product self-attention."""
    Q, K, V = E @ Wq, E @ Wk, E @ Wv
    weights = softmax_rows(Q @ K.T / math.sqrt(Wq.shape[1]))
    return weights @ V, weights


def encode(mem: SceneMemory, params: AttentionParams) -> np.ndarray:
    E = mem.matrix()
    if E.shape[1] != params.Wq.shape[0]:
        raise SceneMemoryError(f"entry width {E.shape[1]} != encoder input {params.Wq.shape[0]}")
    return self_attention(E, params.Wq, params.Wk, params.Wv)[0]


def decode_weights(Me, query, params: AttentionParams):
    Me = np.asarray(Me, dtype=float)
    query = np.asarray(query, dtype=float)
    if Me.ndim != 2 or Me.shape[0] == 0:
        raise SceneMemoryError("encoded memory must be a nonempty matrix")
    if query.shape != (params.dWq.shape[0],):
        raise SceneMemoryError(f"query width {query.shape} != decoder input {params.dWq.shape[0]}")
    if Me.shape[1] != params.dWk.shape[0]:
        raise SceneMemoryError(f"encoded width {Me.shape[1]} != decoder key input {params.dWk.shape[0]}")
    q = query @ params.dWq
    K = Me @ params.dWk
    V = Me @ params.dWv
    w = softmax_rows((K @ q / math.sqrt(q.size))[None, :])[0]
    return w, V


def decode(Me, query, params: AttentionParams) -> np.ndarray:
    w, V = decode_weights(Me, query, params)
    return w @ V


def belief_query(e_bgen, class_scores, offset) -> np.ndarray:
    return np.concatenate([np.asarray(e_bgen, dtype=float), np.asarray(class_scores, dtype=float),
                           np.asarray(offset, dtype=float)])
