"""Object and region categories shared by every module.

Vertex ids put the 21 objects first (0..20) and the 24 regions after them
(21..44). ``toilet`` names both an object and a region; the bare name
resolves to the object and the region is reachable as ``region:toilet``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

OBJECTS: tuple[str, ...] = (
    "chair", "table", "picture", "cabinet", "cushion", "sofa", "bed",
    "chest_of_drawers", "plant", "sink", "toilet", "stool", "towel",
    "tv_monitor", "shower", "bathtub", "counter", "fireplace",
    "gym_equipment", "seating", "clothes",
)

REGIONS: tuple[str, ...] = (
    "balcony", "bathroom", "bedroom", "closet", "dining_room",
    "entryway/foyer/lobby", "familyroom/lounge", "hallway", "junk", "kitchen",
    "laundryroom/mudroom", "living_room", "lounge",
    "meetingroom/conferenceroom", "office", "other_room", "outdoor",
    "porch/terrace/deck", "rec/game", "spa/sauna", "stairs", "toilet",
    "utilityroom/toolroom", "workout/gym/exercise",
)

OBJECT = "object"
REGION = "region"


def normalize_name(name: str) -> str:
    """Lower-case and map spaces/hyphens to underscores (``tv monitor`` -> ``tv_monitor``)."""
    return "_".join(name.strip().lower().replace("-", " ").split())


class UnknownNameError(KeyError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    objects: tuple[str, ...] = OBJECTS
    regions: tuple[str, ...] = REGIONS
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.objects)) != len(self.objects) or len(set(self.regions)) != len(self.regions):
            raise ValueError("vocabulary names must be unique within each kind")
        index = {}
        for i, name in enumerate(self.objects):
            index[(OBJECT, name)] = i
        for j, name in enumerate(self.regions):
            index[(REGION, name)] = len(self.objects) + j
        object.__setattr__(self, "_index", index)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def size(self) -> int:
        return len(self.objects) + len(self.regions)

    def kind(self, vid: int) -> str:
        return OBJECT if vid < self.n_objects else REGION

    def name(self, vid: int) -> str:
        if vid < self.n_objects:
            return self.objects[vid]
        return self.regions[vid - self.n_objects]

    def is_ambiguous(self, name: str) -> bool:
        name = normalize_name(name)
        return (OBJECT, name) in self._index and (REGION, name) in self._index

    def key(self, vid: int) -> str:
        """Unique textual key for a vertex; qualified only when the bare name is shared."""
        name = self.name(vid)
        if self.kind(vid) == REGION and self.is_ambiguous(name):
            return f"{REGION}:{name}"
        return name

    def index(self, name: str, kind: str | None = None) -> int:
        """Vertex id of ``name``; ``kind`` or a ``object:``/``region:`` prefix disambiguates."""
        raw = name
        if ":" in name:
            prefix, rest = name.split(":", 1)
            if prefix in (OBJECT, REGION):
                if kind is not None and kind != prefix:
                    raise UnknownNameError(f"{raw!r} is not a {kind}")
                kind, name = prefix, rest
        name = normalize_name(name)
        kinds = (kind,) if kind is not None else (OBJECT, REGION)
        for k in kinds:
            vid = self._index.get((k, name))
            if vid is not None:
                return vid
        raise UnknownNameError(f"unknown {kind or 'vertex'} name {raw!r}")

    def object_index(self, name: str) -> int:
        return self.index(name, OBJECT)

    def region_index(self, name: str) -> int:
        """Index into ``regions`` (0..23), not the vertex id."""
        return self.index(name, REGION) - self.n_objects


DEFAULT_VOCAB = Vocabulary()
