"""Object/region knowledge graph built from labeled houses.

Edges come from three frequency heuristics over a corpus:

* object-object: two objects share an edge when some region holds both with
  relative frequency >= the threshold (frequency is relative to the most
  frequent object of that region). The threshold is the largest value that
  still leaves every connectable object with a neighbour.
* object-region: an object links to every region holding one of its
  object neighbours.
* region-region: pairs of regions weighted by how many object-object edges
  they both contain, thresholded the same way as objects.

All edge sets are stored as vertex-id pairs ``(i, j)`` with ``i < j``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .vocab import DEFAULT_VOCAB, OBJECT, REGION, UnknownNameError, Vocabulary

LOCATED_NEAR = "LocatedNear"
AT_LOCATION = "AtLocation"
RELATIONS = (LOCATED_NEAR, AT_LOCATION)

SHIPPED_TRIPLES = "kg_mp3d.triples"


class KnowledgeError(ValueError):
    pass


class TripleFormatError(KnowledgeError):
    pass


@dataclass(frozen=True)
class LabeledHouse:
    """Minimal corpus entry: a list of ``(region_name, [object names])`` rooms."""

    rooms: tuple
    name: str = "house"

    def labeled_rooms(self):
        return self.rooms


@dataclass(frozen=True)
class CooccurrenceStats:
    count: np.ndarray  # (n_objects, n_regions) instance tallies
    rel_freq: np.ndarray
    region_present: np.ndarray  # region label occurs somewhere in the corpus
    vocab: Vocabulary = DEFAULT_VOCAB

    @property
    def object_present(self) -> np.ndarray:
        return self.count.sum(axis=1) > 0


@dataclass(frozen=True)
class EdgeResult:
    edges: frozenset
    threshold: float
    warnings: tuple = ()
    weights: np.ndarray | None = field(default=None, compare=False, repr=False)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.flags.writeable = False
    return arr


def count_cooccurrence(corpus: Iterable, vocab: Vocabulary = DEFAULT_VOCAB) -> CooccurrenceStats:
    """Tally object instances per region label across ``corpus``.

    Each house must expose ``labeled_rooms()`` yielding ``(region, objects)``.
    """
    count = np.zeros((vocab.n_objects, vocab.n_regions), dtype=np.int64)
    region_present = np.zeros(vocab.n_regions, dtype=bool)
    for h, house in enumerate(corpus):
        house_name = getattr(house, "name", None) or f"#{h}"
        for region_name, objects in house.labeled_rooms():
            try:
                r = vocab.region_index(region_name)
            except UnknownNameError:
                raise KnowledgeError(f"unknown region label {region_name!r} in house {house_name}") from None
            region_present[r] = True
            for obj in objects:
                try:
                    o = vocab.object_index(obj)
                except UnknownNameError:
                    raise KnowledgeError(f"unknown object label {obj!r} in house {house_name}") from None
                count[o, r] += 1
    peak = count.max(axis=0)
    rel_freq = np.zeros(count.shape, dtype=float)
    nz = peak > 0
    rel_freq[:, nz] = count[:, nz] / peak[nz]
    return CooccurrenceStats(_freeze(count), _freeze(rel_freq), _freeze(region_present), vocab)


def _pairs(mask: np.ndarray, offset_i: int = 0, offset_j: int = 0) -> frozenset:
    ii, jj = np.nonzero(mask)
    return frozenset((int(i) + offset_i, int(j) + offset_j) for i, j in zip(ii, jj))


def _max_connecting_threshold(candidates, adjacency_at, constrained):
    """Largest candidate threshold under which every constrained vertex keeps degree >= 1."""
    for t in sorted(candidates, reverse=True):
        adj = adjacency_at(t)
        if np.all(adj[constrained].any(axis=1)):
            return t, adj
    t = min(candidates)
    return t, adjacency_at(t)


def object_adjacency_at(stats: CooccurrenceStats, t: float) -> np.ndarray:
    """Boolean object-object candidate matrix at threshold ``t``."""
    ok = ((stats.count > 0) & (stats.rel_freq >= t)).astype(np.int64)
    adj = (ok @ ok.T) > 0
    np.fill_diagonal(adj, False)
    return adj


def build_object_object_edges(stats: CooccurrenceStats) -> EdgeResult:
    present = stats.object_present
    connectable = object_adjacency_at(stats, 0.0).any(axis=1)
    values = stats.rel_freq[stats.count > 0]
    candidates = set(np.unique(values).tolist()) | {0.0}
    theta, adj = _max_connecting_threshold(
        candidates, lambda t: object_adjacency_at(stats, t), connectable
    )
    warnings = []
    vocab = stats.vocab
    for o in range(vocab.n_objects):
        if not present[o]:
            warnings.append(f"object {vocab.objects[o]!r} absent from corpus; left isolated")
        elif not connectable[o]:
            warnings.append(f"object {vocab.objects[o]!r} never shares a region; left isolated")
    if not adj.any():
        theta = 0.0
    return EdgeResult(_pairs(np.triu(adj, 1)), float(theta), tuple(warnings))


def _object_matrix(oo_edges, n_objects: int) -> np.ndarray:
    m = np.zeros((n_objects, n_objects), dtype=bool)
    for i, j in oo_edges:
        m[i, j] = m[j, i] = True
    return m


def build_object_region_edges(oo: EdgeResult | Iterable, stats: CooccurrenceStats) -> EdgeResult:
    edges = oo.edges if isinstance(oo, EdgeResult) else oo
    n_obj = stats.vocab.n_objects
    m = _object_matrix(edges, n_obj).astype(np.int64)
    occupied = (stats.count > 0).astype(np.int64)
    links = (m @ occupied) > 0
    return EdgeResult(_pairs(links, 0, n_obj), 0.0)


def shared_edge_fraction(oo_edges, stats: CooccurrenceStats) -> np.ndarray:
    """Fraction of object-object edges whose two endpoints both occur in each of two regions."""
    occupied = stats.count > 0
    n_reg = stats.vocab.n_regions
    w = np.zeros((n_reg, n_reg), dtype=float)
    edges = sorted(oo_edges)
    if not edges:
        return w
    for i, j in edges:
        both = (occupied[i] & occupied[j]).astype(float)
        w += np.outer(both, both)
    w /= len(edges)
    np.fill_diagonal(w, 0.0)
    return w


RegionWeightFn = Callable[[Iterable, CooccurrenceStats], np.ndarray]


def build_region_region_edges(
    oo: EdgeResult | Iterable,
    stats: CooccurrenceStats,
    weight_fn: RegionWeightFn = shared_edge_fraction,
) -> EdgeResult:
    edges = oo.edges if isinstance(oo, EdgeResult) else frozenset(oo)
    n_obj = stats.vocab.n_objects
    if not edges:
        return EdgeResult(frozenset(), 0.0, ("no object-object edges; region graph left empty",))
    w = np.asarray(weight_fn(edges, stats), dtype=float)
    positive = w > 0
    connectable = positive.any(axis=1)
    candidates = set(np.unique(w[positive]).tolist())
    warnings = []
    for r in range(stats.vocab.n_regions):
        if stats.region_present[r] and not connectable[r]:
            warnings.append(f"region {stats.vocab.regions[r]!r} shares no connected objects; left isolated")
    if not candidates:
        return EdgeResult(frozenset(), 0.0, tuple(warnings), weights=w)
    theta, adj = _max_connecting_threshold(candidates, lambda t: positive & (w >= t), connectable)
    return EdgeResult(_pairs(np.triu(adj, 1), n_obj, n_obj), float(theta), tuple(warnings), weights=w)


def normalize_adjacency(A: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self loops: D^-1/2 (A + I) D^-1/2."""
    A = np.asarray(A, dtype=float)
    m = A + np.eye(A.shape[0])
    inv_sqrt = 1.0 / np.sqrt(m.sum(axis=1))
    return np.outer(inv_sqrt, inv_sqrt) * m


@dataclass(frozen=True)
class KnowledgeGraph:
    vocab: Vocabulary
    A: np.ndarray
    Ahat: np.ndarray
    theta_oo: float = 0.0
    theta_rr: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.vocab == other.vocab
            and np.array_equal(self.A, other.A)
            and self.theta_oo == other.theta_oo
            and self.theta_rr == other.theta_rr
        )

    __hash__ = None

    def neighbors(self, name: str) -> set[str]:
        return neighbors(self, name)

    def edges(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(np.triu(self.A, 1))
        return [(int(i), int(j)) for i, j in zip(ii, jj)]

    def object_region_block(self, normalized: bool = True) -> np.ndarray:
        """Rows = objects, columns = regions of Ahat (or A)."""
        m = self.Ahat if normalized else self.A
        n = self.vocab.n_objects
        return m[:n, n:]


def assemble_graph(oo, or_, rr, vocab: Vocabulary = DEFAULT_VOCAB, theta_oo=None, theta_rr=None) -> KnowledgeGraph:
    n = vocab.size
    A = np.zeros((n, n), dtype=np.uint8)
    for part in (oo, or_, rr):
        edges = part.edges if isinstance(part, EdgeResult) else part
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise KnowledgeError(f"edge ({i}, {j}) outside vocabulary of size {n}")
            if i != j:
                A[i, j] = A[j, i] = 1
    if theta_oo is None:
        theta_oo = oo.threshold if isinstance(oo, EdgeResult) else 0.0
    if theta_rr is None:
        theta_rr = rr.threshold if isinstance(rr, EdgeResult) else 0.0
    return KnowledgeGraph(vocab, _freeze(A), _freeze(normalize_adjacency(A)), float(theta_oo), float(theta_rr))


def build_knowledge_graph(corpus, vocab: Vocabulary = DEFAULT_VOCAB, weight_fn: RegionWeightFn = shared_edge_fraction):
    """Full construction pipeline; returns ``(graph, warnings)``."""
    stats = count_cooccurrence(corpus, vocab)
    oo = build_object_object_edges(stats)
    or_ = build_object_region_edges(oo, stats)
    rr = build_region_region_edges(oo, stats, weight_fn)
    return assemble_graph(oo, or_, rr, vocab), list(oo.warnings + rr.warnings)


def neighbors(kg: KnowledgeGraph, name: str) -> set[str]:
    try:
        v = kg.vocab.index(name)
    except UnknownNameError as exc:
        raise KnowledgeError(str(exc)) from None
    return {kg.vocab.key(int(u)) for u in np.nonzero(kg.A[v])[0]}


# --- triple files -----------------------------------------------------------

_TRIPLE_RE = re.compile(r"^\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")
_META_RE = re.compile(r"^#\s*(theta_oo|theta_rr)\s*[:=]\s*(\S+)\s*$")


def _resolve(vocab: Vocabulary, head: str, rel: str, tail: str):
    def candidates(name):
        out = []
        for kind in (OBJECT, REGION):
            try:
                out.append(vocab.index(name, kind))
            except UnknownNameError:
                pass
        if not out:
            raise UnknownNameError(f"unknown name {name!r}")
        return out

    hs, ts = candidates(head), candidates(tail)
    n_obj = vocab.n_objects
    if rel == AT_LOCATION:
        good = [(h, t) for h in hs for t in ts if h < n_obj <= t]
    else:
        good = [(h, t) for h in hs for t in ts if (h < n_obj) == (t < n_obj)]
    if not good:
        raise KnowledgeError(f"{rel} cannot relate {head!r} and {tail!r}")
    return good[0]


def parse_triples(lines: Iterable[str], vocab: Vocabulary = DEFAULT_VOCAB) -> KnowledgeGraph:
    edges = set()
    meta = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _META_RE.match(line)
            if m:
                meta[m.group(1)] = float(m.group(2))
            continue
        m = _TRIPLE_RE.match(line)
        if not m:
            raise TripleFormatError(f"line {lineno}: malformed triple {line!r}")
        head, rel, tail = m.groups()
        if rel not in RELATIONS:
            raise TripleFormatError(f"line {lineno}: unknown relation {rel!r}")
        try:
            h, t = _resolve(vocab, head, rel, tail)
        except (UnknownNameError, KnowledgeError) as exc:
            raise TripleFormatError(f"line {lineno}: {exc.args[0]}") from None
        if h == t:
            raise TripleFormatError(f"line {lineno}: self relation on {head!r}")
        edges.add((min(h, t), max(h, t)))
    return assemble_graph(edges, (), (), vocab, meta.get("theta_oo", 0.0), meta.get("theta_rr", 0.0))


def load_triples(path, vocab: Vocabulary = DEFAULT_VOCAB) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_triples(fh, vocab)


def format_triples(kg: KnowledgeGraph) -> str:
    vocab = kg.vocab
    n_obj = vocab.n_objects
    out = [f"# theta_oo: {kg.theta_oo!r}", f"# theta_rr: {kg.theta_rr!r}"]
    for i, j in kg.edges():
        rel = AT_LOCATION if (i < n_obj) != (j < n_obj) else LOCATED_NEAR
        out.append(f"({vocab.key(i)}, {rel}, {vocab.key(j)})")
    return "\n".join(out) + "\n"


def save_triples(kg: KnowledgeGraph, path) -> None:
    Path(path).write_text(format_triples(kg), encoding="utf-8")


def load_shipped_graph() -> KnowledgeGraph:
    text = resources.files("sceneprior.data").joinpath(SHIPPED_TRIPLES).read_text(encoding="utf-8")
    return parse_triples(text.splitlines())


def graph_to_json(kg: KnowledgeGraph) -> dict:
    vocab = kg.vocab
    return {
        "vertices": [vocab.key(v) for v in range(vocab.size)],
        "objects": list(vocab.objects),
        "regions": list(vocab.regions),
        "theta_oo": kg.theta_oo,
        "theta_rr": kg.theta_rr,
        "A": kg.A.astype(int).tolist(),
        "Ahat": kg.Ahat.tolist(),
    }


def save_json(kg: KnowledgeGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_json(kg), indent=1), encoding="utf-8")


def load_json(path) -> KnowledgeGraph:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    vocab = Vocabulary(tuple(data["objects"]), tuple(data["regions"]))
    A = np.asarray(data["A"], dtype=np.uint8)
    return KnowledgeGraph(vocab, _freeze(A), _freeze(normalize_adjacency(A)), data["theta_oo"], data["theta_rr"])
