"""Synthetic grid houses: 1 m cells, rectangular rooms, labeled regions, placed objects.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row of
``HouseMap.grid`` (indexed ``grid[y, x]``). Headings are degrees
counter-clockwise from +x, so heading 90 points toward +y.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .rng import derive_seed, make_rng
from .vocab import DEFAULT_VOCAB, Vocabulary

WALL = -1
HEADINGS = (0, 90, 180, 270)
STEPS = {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}
INF = float("inf")


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    name: str
    cells: tuple


@dataclass(frozen=True)
class ObjectInstance:
    name: str
    cell: tuple
    viewpoints: tuple = ()
    instance_id: int = 0


@dataclass(frozen=True)
class Pose:
    cell: tuple
    heading: int = 0

    def __post_init__(self):
        if self.heading not in STEPS:
            raise WorldError(f"heading must be one of {HEADINGS}, got {self.heading}")

    def forward_cell(self):
        dx, dy = STEPS[self.heading]
        return (self.cell[0] + dx, self.cell[1] + dy)


@dataclass(frozen=True, eq=False)
class HouseMap:
    width: int
    height: int
    grid: np.ndarray  # (height, width) int, WALL or region id
    regions: tuple
    objects: tuple
    seed: int = 0
    name: str = "house"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.grid.flags.writeable = False

    def __eq__(self, other):
        if not isinstance(other, HouseMap):
            return NotImplemented
        return self.content_hash() == other.content_hash()

    def __hash__(self):
        return hash(self.content_hash())

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and self.grid[cell[1], cell[0]] != WALL

    def region_id_at(self, cell) -> int:
        if not self.is_free(cell):
            raise WorldError(f"cell {cell} is not free in {self.name}")
        return int(self.grid[cell[1], cell[0]])

    def region_name_at(self, cell) -> str:
        return self.regions[self.region_id_at(cell)].name

    def free_cells(self) -> list:
        ys, xs = np.nonzero(self.grid != WALL)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def free_neighbors(self, cell):
        x, y = cell
        for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            c = (x + dx, y + dy)
            if self.is_free(c):
                yield c

    def labeled_rooms(self):
        rooms = [[] for _ in self.regions]
        for obj in self.objects:
            rooms[self.region_id_at(obj.cell)].append(obj.name)
        return [(r.name, names) for r, names in zip(self.regions, rooms)]

    def objects_in_region(self, region_id: int) -> list:
        return [o for o in self.objects if self.region_id_at(o.cell) == region_id]

    def region_centroid(self, region_id: int) -> tuple:
        cells = np.asarray(self.regions[region_id].cells, dtype=float)
        return tuple(cells.mean(axis=0))

    def distance_field(self, src) -> np.ndarray:
        """BFS geodesic distance (meters) from ``src`` to every cell; inf for walls."""
        key = ("dist", tuple(src))
        cached = self._cache.get(key)
        if cached is None:
            cached = _bfs(self, tuple(src))
            cached.flags.writeable = False
            self._cache[key] = cached
        return cached

    def to_json(self) -> dict:
        return house_to_json(self)

    def content_hash(self) -> str:
        h = self._cache.get("hash")
        if h is None:
            blob = json.dumps(house_to_json(self), sort_keys=True, separators=(",", ":")).encode()
            h = hashlib.sha256(blob).hexdigest()
            self._cache["hash"] = h
        return h


def _bfs(house: HouseMap, src) -> np.ndarray:
    dist = np.full((house.height, house.width), INF)
    if not house.is_free(src):
        raise WorldError(f"cell {src} is not free in {house.name}")
    dist[src[1], src[0]] = 0.0
    queue = deque([src])
    while queue:
        c = queue.popleft()
        d = dist[c[1], c[0]] + 1.0
        for n in house.free_neighbors(c):
            if dist[n[1], n[0]] == INF:
                dist[n[1], n[0]] = d
                queue.append(n)
    return dist


def geodesic_distance(house: HouseMap, a, b) -> float:
    for c in (a, b):
        if not house.is_free(c):
            raise WorldError(f"cell {tuple(c)} is not free in {house.name}")
    return float(house.distance_field(tuple(a))[b[1], b[0]])


def euclidean_distance(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def shortest_path(house: HouseMap, a, b) -> list:
    """Cells from ``a`` to ``b`` inclusive along a shortest 4-connected path."""
    a, b = tuple(a), tuple(b)
    dist = house.distance_field(b)
    for c in (a, b):
        if not house.is_free(c):
            raise WorldError(f"cell {c} is not free in {house.name}")
    if dist[a[1], a[0]] == INF:
        raise WorldError(f"no path between {a} and {b} in {house.name}")
    path = [a]
    cur = a
    while cur != b:
        d = dist[cur[1], cur[0]]
        cur = next(n for n in house.free_neighbors(cur) if dist[n[1], n[0]] == d - 1)
        path.append(cur)
    return path


def compute_viewpoints(house: HouseMap, obj: ObjectInstance) -> tuple:
    return tuple(sorted(house.free_neighbors(obj.cell)))


# --- generation ---------------------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    size_range: tuple = (14, 22)
    region_count: tuple = (4, 7)
    objects_per_region: tuple = (2, 4)
    min_room: int = 3
    region_weights: np.ndarray | None = None  # (n_regions,) label frequency
    region_adjacency: np.ndarray | None = None  # (n_regions, n_regions) >= 0
    placement: np.ndarray | None = None  # (n_objects, n_regions) in [0, 1]
    duplicate_penalty: float = 0.3
    extra_door_prob: float = 0.15
    max_retries: int = 50
    vocab: Vocabulary = DEFAULT_VOCAB

    def validate(self):
        lo, hi = self.size_range
        if not (5 <= lo <= hi):
            raise WorldError(f"invalid size range {self.size_range}")
        if not (1 <= self.region_count[0] <= self.region_count[1]):
            raise WorldError(f"invalid region count {self.region_count}")
        if not (0 <= self.objects_per_region[0] <= self.objects_per_region[1]):
            raise WorldError(f"invalid objects_per_region {self.objects_per_region}")
        v = self.vocab
        for name, arr, shape in (
            ("region_weights", self.region_weights, (v.n_regions,)),
            ("region_adjacency", self.region_adjacency, (v.n_regions, v.n_regions)),
            ("placement", self.placement, (v.n_objects, v.n_regions)),
        ):
            if arr is None:
                raise WorldError(f"{name} prior missing")
            arr = np.asarray(arr)
            if arr.shape != shape:
                raise WorldError(f"{name} has shape {arr.shape}, expected {shape}")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise WorldError(f"{name} must be finite and nonnegative")
        if np.any(np.asarray(self.placement) > 1):
            raise WorldError("placement probabilities must lie in [0, 1]")
        if not np.any(np.asarray(self.region_weights) > 0):
            raise WorldError("region_weights must have positive mass")


# Label frequencies for the synthetic corpus; domestic rooms dominate.
_REGION_FREQUENCY = {
    "bedroom": 3.0, "bathroom": 2.5, "kitchen": 1.5, "living_room": 1.5, "hallway": 1.5,
    "dining_room": 1.0, "familyroom/lounge": 1.0, "office": 1.0, "closet": 0.8, "toilet": 0.8,
    "entryway/foyer/lobby": 0.8, "laundryroom/mudroom": 0.6, "lounge": 0.5,
    "utilityroom/toolroom": 0.4, "porch/terrace/deck": 0.4, "balcony": 0.4,
    "rec/game": 0.4, "workout/gym/exercise": 0.4, "spa/sauna": 0.3, "other_room": 0.3,
    "meetingroom/conferenceroom": 0.2, "junk": 0.2, "stairs": 0.2, "outdoor": 0.1,
}


def default_params(kg=None, **overrides) -> GenParams:
    """Priors derived from the shipped graph: objects go where the graph says they are found."""
    if kg is None:
        from .knowledge import load_shipped_graph

        kg = load_shipped_graph()
    v = kg.vocab
    n_obj = v.n_objects
    at = kg.A[:n_obj, n_obj:].astype(float)
    placement = np.empty_like(at)
    for r in range(v.n_regions):
        col = at[:, r]
        placement[:, r] = col / col.sum() if col.sum() > 0 else 1.0 / n_obj
    weights = np.array([_REGION_FREQUENCY.get(name, 0.3) for name in v.regions])
    adjacency = kg.A[n_obj:, n_obj:].astype(float)
    params = dict(region_weights=weights, region_adjacency=adjacency, placement=placement, vocab=v)
    params.update(overrides)
    return GenParams(**params)


def _split_rooms(rng, width, height, target, min_room):
    rooms = [(1, 1, width - 2, height - 2)]  # inclusive x0, y0, x1, y1

    def splittable(r):
        w, h = r[2] - r[0] + 1, r[3] - r[1] + 1
        return w >= 2 * min_room + 1 or h >= 2 * min_room + 1

    while len(rooms) < target:
        options = [r for r in rooms if splittable(r)]
        if not options:
            return None
        areas = np.array([(r[2] - r[0] + 1) * (r[3] - r[1] + 1) for r in options], dtype=float)
        room = options[int(rng.choice(len(options), p=areas / areas.sum()))]
        x0, y0, x1, y1 = room
        w, h = x1 - x0 + 1, y1 - y0 + 1
        can_v = w >= 2 * min_room + 1
        can_h = h >= 2 * min_room + 1
        vertical = can_v and (not can_h or w > h or (w == h and rng.random() < 0.5))
        rooms.remove(room)
        if vertical:
            s = int(rng.integers(x0 + min_room, x1 - min_room + 1))
            rooms += [(x0, y0, s - 1, y1), (s + 1, y0, x1, y1)]
        else:
            s = int(rng.integers(y0 + min_room, y1 - min_room + 1))
            rooms += [(x0, y0, x1, s - 1), (x0, s + 1, x1, y1)]
    rooms.sort(key=lambda r: (r[1], r[0]))
    return rooms


def _door_candidates(grid):
    """Wall cells separating two different rooms, keyed by the unordered room pair."""
    h, w = grid.shape
    out = {}
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if grid[y, x] != WALL:
                continue
            for (ax, ay), (bx, by) in (((x - 1, y), (x + 1, y)), ((x, y - 1), (x, y + 1))):
                a, b = grid[ay, ax], grid[by, bx]
                if a != WALL and b != WALL and a != b:
                    out.setdefault((min(a, b), max(a, b)), []).append((x, y))
    return out


def _connect_rooms(rng, grid, n_rooms, extra_prob):
    candidates = _door_candidates(grid)
    pairs = sorted(candidates)
    order = rng.permutation(len(pairs))
    parent = list(range(n_rooms))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    adjacency = {i: set() for i in range(n_rooms)}
    for k in order:
        a, b = pairs[k]
        joined = find(a) != find(b)
        if joined or rng.random() < extra_prob:
            cells = candidates[(a, b)]
            x, y = cells[int(rng.integers(len(cells)))]
            grid[y, x] = a
            adjacency[a].add(b)
            adjacency[b].add(a)
            if joined:
                parent[find(a)] = find(b)
    roots = {find(i) for i in range(n_rooms)}
    return adjacency if len(roots) == 1 else None


def _assign_labels(rng, adjacency, params: GenParams):
    weights_base = np.asarray(params.region_weights, dtype=float)
    adj_prior = np.asarray(params.region_adjacency, dtype=float)
    n = len(adjacency)
    labels = [-1] * n
    counts = np.zeros(len(weights_base))
    start = int(rng.integers(n))
    seen = {start}
    queue = deque([start])
    while queue:
        room = queue.popleft()
        w = weights_base.copy()
        for nb in adjacency[room]:
            if labels[nb] >= 0:
                w = w * (1.0 + adj_prior[:, labels[nb]])
        w = w * params.duplicate_penalty ** counts
        label = int(rng.choice(len(w), p=w / w.sum()))
        labels[room] = label
        counts[label] += 1
        for nb in sorted(adjacency[room]):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return labels


def generate_house(seed: int, params: GenParams | None = None, name: str | None = None) -> HouseMap:
    params = params if params is not None else default_params()
    params.validate()
    vocab = params.vocab
    rng = make_rng(seed, "house")
    for _ in range(params.max_retries):
        width = int(rng.integers(params.size_range[0], params.size_range[1] + 1))
        height = int(rng.integers(params.size_range[0], params.size_range[1] + 1))
        target = int(rng.integers(params.region_count[0], params.region_count[1] + 1))
        rooms = _split_rooms(rng, width, height, target, params.min_room)
        if rooms is None:
            continue
        grid = np.full((height, width), WALL, dtype=np.int16)
        for i, (x0, y0, x1, y1) in enumerate(rooms):
            grid[y0:y1 + 1, x0:x1 + 1] = i
        adjacency = _connect_rooms(rng, grid, len(rooms), params.extra_door_prob)
        if adjacency is None:
            continue
        labels = _assign_labels(rng, adjacency, params)
        break
    else:
        raise WorldError(
            f"could not generate house for seed {seed}: region count {params.region_count} "
            f"infeasible within size range {params.size_range} after {params.max_retries} tries"
        )
    regions = []
    for i, label in enumerate(labels):
        ys, xs = np.nonzero(grid == i)
        cells = tuple(sorted((int(x), int(y)) for y, x in zip(ys, xs)))
        regions.append(Region(vocab.regions[label], cells))
    skeleton = HouseMap(width, height, grid, tuple(regions), (), seed, name or f"house_{seed}")
    placement = np.asarray(params.placement, dtype=float)
    objects = []
    for i, label in enumerate(labels):
        probs = placement[:, label]
        if probs.sum() <= 0:
            continue
        k = int(rng.integers(params.objects_per_region[0], params.objects_per_region[1] + 1))
        cells = [c for c in regions[i].cells]
        k = min(k, len(cells))
        picks = rng.choice(len(cells), size=k, replace=False)
        for c_idx in sorted(int(p) for p in picks):
            obj_name = vocab.objects[int(rng.choice(len(probs), p=probs / probs.sum()))]
            inst = ObjectInstance(obj_name, cells[c_idx], instance_id=len(objects))
            objects.append(ObjectInstance(obj_name, inst.cell, compute_viewpoints(skeleton, inst), inst.instance_id))
    return HouseMap(width, height, grid.copy(), tuple(regions), tuple(objects), seed, skeleton.name)


def check_invariants(house: HouseMap) -> list:
    """Human-readable invariant violations (empty when the house is well formed)."""
    problems = []
    free = house.free_cells()
    if not free:
        return ["no free cells"]
    covered = set()
    for rid, region in enumerate(house.regions):
        for c in region.cells:
            if house.grid[c[1], c[0]] != rid:
                problems.append(f"cell {c} listed in region {rid} but grid says otherwise")
            covered.add(c)
    if covered != set(free):
        problems.append("region cell lists do not partition the free cells")
    dist = house.distance_field(free[0])
    if any(dist[c[1], c[0]] == INF for c in free):
        problems.append("free cells are not connected")
    for obj in house.objects:
        if not house.is_free(obj.cell):
            problems.append(f"object {obj.name} sits on a wall")
        if not obj.viewpoints:
            problems.append(f"object {obj.name} at {obj.cell} has no viewpoint")
        if set(obj.viewpoints) != set(compute_viewpoints(house, obj)):
            problems.append(f"object {obj.name} at {obj.cell} has stale viewpoints")
    return problems


# --- corpus -------------------------------------------------------------------


@dataclass(frozen=True)
class Corpus:
    houses: tuple
    seen: tuple
    unseen: tuple
    master_seed: int = 0

    def split_of(self, index: int) -> str:
        return "seen" if index in self.seen else "unseen"


def _generate_indexed(args):
    master_seed, i, params = args
    try:
        return generate_house(derive_seed(master_seed, "house", i), params, name=f"house_{i:03d}")
    except WorldError as exc:
        raise WorldError(f"house {i}: {exc}") from None


def generate_corpus(master_seed: int, n_houses: int, params: GenParams | None = None, workers: int = 1) -> Corpus:
    if n_houses < 5:
        raise WorldError(f"corpus needs at least 5 houses, got {n_houses}")
    params = params if params is not None else default_params()
    jobs = [(master_seed, i, params) for i in range(n_houses)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            houses = list(pool.map(_generate_indexed, jobs))
    else:
        houses = [_generate_indexed(j) for j in jobs]
    order = make_rng(master_seed, "split").permutation(n_houses)
    n_unseen = int(round(0.2 * n_houses))
    unseen = tuple(sorted(int(i) for i in order[:n_unseen]))
    seen = tuple(sorted(int(i) for i in order[n_unseen:]))
    return Corpus(tuple(houses), seen, unseen, master_seed)


# --- serialization ------------------------------------------------------------


def _rle(values):
    out = []
    for v in values:
        if out and out[-1][0] == v:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def house_to_json(house: HouseMap) -> dict:
    return {
        "name": house.name,
        "seed": int(house.seed),
        "width": house.width,
        "height": house.height,
        "grid_rle": _rle([int(v) for v in house.grid.ravel()]),
        "regions": [r.name for r in house.regions],
        "objects": [
            {"name": o.name, "cell": list(o.cell), "viewpoints": [list(c) for c in o.viewpoints], "id": o.instance_id}
            for o in house.objects
        ],
    }


def house_from_json(data: dict) -> HouseMap:
    flat = []
    for value, run in data["grid_rle"]:
        flat.extend([value] * run)
    grid = np.asarray(flat, dtype=np.int16).reshape(data["height"], data["width"])
    regions = []
    for rid, name in enumerate(data["regions"]):
        ys, xs = np.nonzero(grid == rid)
        regions.append(Region(name, tuple(sorted((int(x), int(y)) for y, x in zip(ys, xs)))))
    objects = tuple(
        ObjectInstance(o["name"], tuple(o["cell"]), tuple(tuple(c) for c in o["viewpoints"]), o.get("id", i))
        for i, o in enumerate(data["objects"])
    )
    return HouseMap(data["width"], data["height"], grid, tuple(regions), objects, data["seed"], data["name"])


def corpus_to_json(corpus: Corpus) -> dict:
    return {
        "master_seed": corpus.master_seed,
        "seen": list(corpus.seen),
        "unseen": list(corpus.unseen),
        "houses": [house_to_json(h) for h in corpus.houses],
    }


def corpus_from_json(data: dict) -> Corpus:
    return Corpus(
        tuple(house_from_json(h) for h in data["houses"]),
        tuple(data["seen"]),
        tuple(data["unseen"]),
        data.get("master_seed", 0),
    )


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus_to_json(corpus), fh, separators=(",", ":"))


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return corpus_from_json(json.load(fh))


def house_from_ascii(rows, regions=None, objects=(), name="ascii") -> HouseMap:
    """Build a small house from strings; ``#`` is wall, any other char is a region key.

    ``regions`` maps each region key char to a region label (default: the char
    itself). ``objects`` lists ``(name, (x, y))``.
    """
    height, width = len(rows), len(rows[0])
    keys = []
    for row in rows:
        for ch in row:
            if ch != "#" and ch not in keys:
                keys.append(ch)
    grid = np.full((height, width), WALL, dtype=np.int16)
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch != "#":
                grid[y, x] = keys.index(ch)
    labels, regions = regions or {}, []
    for rid, ch in enumerate(keys):
        ys, xs = np.nonzero(grid == rid)
        label = labels.get(ch, ch)
        regions.append(Region(label, tuple(sorted((int(x), int(y)) for y, x in zip(ys, xs)))))
    skeleton = HouseMap(width, height, grid, tuple(regions), (), 0, name)
    objs = []
    for i, (obj_name, cell) in enumerate(objects):
        inst = ObjectInstance(obj_name, tuple(cell), instance_id=i)
        objs.append(ObjectInstance(obj_name, inst.cell, compute_viewpoints(skeleton, inst), i))
    return HouseMap(width, height, grid.copy(), tuple(regions), tuple(objs), 0, name)
