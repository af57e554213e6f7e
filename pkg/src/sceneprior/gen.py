"""Graph encoder network over the 45-vertex object/region graph.

Each layer computes ``H' = relu(Ahat @ H @ W)``; there are no biases and the
last layer is rectified too. Node features are the vertex word embedding
followed by a 45-slot score vector holding that vertex's own score.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import make_rng
from .vocab import DEFAULT_VOCAB, Vocabulary, normalize_name

EMBED_DIM = 300
HIDDEN = 128
OUT_DIM = 64
N_LAYERS = 3


class GenError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    vectors: np.ndarray  # (n_vertices, D), unit rows

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def pseudo_embeddings(seed: int = 0, dim: int = EMBED_DIM, vocab: Vocabulary = DEFAULT_VOCAB) -> EmbeddingTable:
    rng = make_rng(seed, "embeddings")
    v = rng.standard_normal((vocab.size, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return EmbeddingTable(v)


def load_embeddings(path, vocab: Vocabulary = DEFAULT_VOCAB) -> EmbeddingTable:
    """Read ``name v1 ... vD`` rows (e.g. GloVe); every vocabulary vertex must be present."""
    found = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                found[normalize_name(parts[0]) if ":" not in parts[0] else parts[0]] = np.array(parts[1:], dtype=float)
            except ValueError:
                raise GenError(f"{path}:{lineno}: non-numeric embedding entry") from None
    rows = []
    for vid in range(vocab.size):
        key = vocab.key(vid)
        vec = found.get(key, found.get(vocab.name(vid)))
        if vec is None:
            raise GenError(f"embedding file {path} has no row for {key!r}")
        rows.append(vec)
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise GenError(f"embedding rows have mixed widths {sorted(dims)}")
    v = np.vstack(rows)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return EmbeddingTable(v)


def init_node_features(scores: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    n = table.vectors.shape[0]
    if scores.shape != (n,):
        raise GenError(f"expected {n} scores, got shape {scores.shape}")
    if np.any(scores < 0) or np.any(scores > 1) or not np.all(np.isfinite(scores)):
        raise GenError("scores must lie in [0, 1]")
    return np.hstack([table.vectors, np.diag(scores)])


def audio_scores45(object_scores: np.ndarray, vocab: Vocabulary = DEFAULT_VOCAB) -> np.ndarray:
    """Pad 21 object scores with zeros for the region slots."""
    out = np.zeros(vocab.size)
    out[: vocab.n_objects] = object_scores
    return out


def layer_dims(embed_dim: int = EMBED_DIM, hidden: int = HIDDEN, out_dim: int = OUT_DIM,
               n_layers: int = N_LAYERS, n_vertices: int = 45) -> list[int]:
    return [embed_dim + n_vertices] + [hidden] * (n_layers - 1) + [out_dim]


def init_weights(seed: int, dims) -> list[np.ndarray]:
    """Glorot-uniform matrices for consecutive ``dims``."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise GenError(f"layer dims must be >= 2 positive integers, got {dims}")
    rng = make_rng(seed, "gen-weights")
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
    return weights


def _check_shapes(X, Ahat, weights):
    n = Ahat.shape[0]
    if Ahat.shape != (n, n) or X.shape[0] != n:
        raise GenError(f"X has {X.shape[0]} rows but Ahat is {Ahat.shape}")
    width = X.shape[1]
    for l, W in enumerate(weights):
        if W.shape[0] != width:
            raise GenError(f"layer {l}: weight expects width {W.shape[0]}, input has {width}")
        width = W.shape[1]


def forward(X, Ahat, weights):
    """Return the list of activations ``[H0, H1, ..., HL]``."""
    X = np.asarray(X, dtype=float)
    Ahat = np.asarray(Ahat, dtype=float)
    _check_shapes(X, Ahat, weights)
    hs = [X]
    for W in weights:
        hs.append(np.maximum(Ahat @ hs[-1] @ W, 0.0))
    return hs


def propagate(X, Ahat, weights) -> np.ndarray:
    return forward(X, Ahat, weights)[-1]


def readout(Z: np.ndarray, scores: np.ndarray, mode: str = "score_weighted") -> np.ndarray:
    n = Z.shape[0]
    if mode == "mean":
        return Z.mean(axis=0)
    if mode != "score_weighted":
        raise GenError(f"unknown readout mode {mode!r}")
    s = np.asarray(scores, dtype=float)
    total = s.sum()
    w = s / total if total > 0 else np.full(n, 1.0 / n)
    return w @ Z


def backward(X, Ahat, weights, grad_Z, activations=None):
    """Reverse-mode gradients ``(dW list, dX)`` of a scalar with ``dL/dZ = grad_Z``."""
    hs = activations if activations is not None else forward(X, Ahat, weights)
    Ahat = np.asarray(Ahat, dtype=float)
    grad = np.asarray(grad_Z, dtype=float)
    if grad.shape != hs[-1].shape:
        raise GenError(f"upstream gradient shape {grad.shape} != output shape {hs[-1].shape}")
    dWs = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        dpre = grad * (hs[l + 1] > 0)
        propagated = Ahat.T @ dpre
        dWs[l] = hs[l].T @ propagated
        grad = propagated @ weights[l].T
    return dWs, grad


@dataclass
class GraphEncoder:
    """Bundles embeddings, the normalized graph and weights for repeated encoding."""

    table: EmbeddingTable
    Ahat: np.ndarray
    weights: list
    mode: str = "score_weighted"

    @classmethod
    def create(cls, Ahat, seed: int = 0, embed_dim: int = EMBED_DIM, hidden: int = HIDDEN,
               out_dim: int = OUT_DIM, n_layers: int = N_LAYERS, mode: str = "score_weighted", table=None):
        n = Ahat.shape[0]
        table = table or pseudo_embeddings(seed, embed_dim)
        dims = layer_dims(table.dim, hidden, out_dim, n_layers, n)
        return cls(table, np.asarray(Ahat, dtype=float), init_weights(seed, dims), mode)

    def encode(self, scores45) -> np.ndarray:
        X = init_node_features(scores45, self.table)
        return readout(propagate(X, self.Ahat, self.weights), scores45, self.mode)


def save_weights(weights, path) -> None:
    """Length-prefixed JSON header with shapes, then little-endian float64 data."""
    header = json.dumps({"dtype": "<f8", "shapes": [list(np.shape(w)) for w in weights]}).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for w in weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_weights(path) -> list[np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise GenError(f"{path}: truncated weight file")
    (hlen,) = struct.unpack("<I", blob[:4])
    header = json.loads(blob[4: 4 + hlen])
    offset = 4 + hlen
    out = []
    for shape in header["shapes"]:
        count = int(np.prod(shape))
        chunk = blob[offset: offset + 8 * count]
        if len(chunk) != 8 * count:
            raise GenError(f"{path}: truncated weight data")
        out.append(np.frombuffer(chunk, dtype="<f8").reshape(shape).copy())
        offset += 8 * count
    return out
