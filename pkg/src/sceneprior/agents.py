"""Navigation policies over {MoveForward, TurnLeft, TurnRight, Stop}.

* ``random``: the uniform baseline (0.33 per move action, 0.01 Stop).
* ``greedy``: follows the location belief, turning when the bearing is off
  by more than 45 degrees.
* ``knowledge``: sound -> object -> region reasoning over the knowledge
  graph; visits regions in order of prior score and inspects instances of
  the most likely classes there.

A small REINFORCE trainer for a linear region-selection head sits at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .beliefs import ClassBelief, LocationBelief
from .knowledge import KnowledgeGraph
from .memory import SceneMemory
from .vocab import DEFAULT_VOCAB
from .worldgen import HouseMap, Pose, STEPS, INF


class Action(IntEnum):
    MOVE_FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    STOP = 3


RANDOM_PROBS = (0.33, 0.33, 0.33, 0.01)
POLICIES = ("random", "greedy", "knowledge")


class AgentError(ValueError):
    pass


@dataclass
class Observation:
    """What a policy sees after the harness has updated the beliefs."""

    pose: Pose  # odometry, episode frame
    vision: np.ndarray  # 45 oracle scores
    heard: bool
    t: int


@dataclass
class AgentState:
    class_belief: ClassBelief = field(default_factory=ClassBelief.uniform)
    loc_belief: LocationBelief = field(default_factory=LocationBelief)
    memory: SceneMemory = field(default_factory=SceneMemory)
    visited_regions: set = field(default_factory=set)
    plan: list = field(default_factory=list)
    face: tuple | None = None  # cell to turn toward once the plan is done
    pending: list = field(default_factory=list)  # (instance, viewpoint) still to inspect
    target_region: int | None = None
    inspected: set = field(default_factory=set)
    rng: np.random.Generator | None = None
    state_vector: np.ndarray | None = None


def random_policy_step(rng: np.random.Generator) -> Action:
    return Action(int(rng.choice(4, p=RANDOM_PROBS)))


# --- geometry helpers ---------------------------------------------------------


def world_offset(offset, heading: int) -> tuple:
    """Egocentric offset back into the world frame."""
    c, s = STEPS[heading]
    return (c * offset[0] - s * offset[1], s * offset[0] + c * offset[1])


def believed_goal_point(state: AgentState, pose: Pose) -> tuple:
    w = world_offset(state.loc_belief.offset, pose.heading)
    return (pose.cell[0] + w[0], pose.cell[1] + w[1])


def turn_toward_bearing(bearing: float) -> Action:
    # exactly behind (either sign of pi) resolves to a left turn
    if abs(bearing) >= math.pi - 1e-12:
        return Action.TURN_LEFT
    return Action.TURN_LEFT if bearing > 0 else Action.TURN_RIGHT


def step_toward_cell(pose: Pose, cell) -> Action:
    dx, dy = cell[0] - pose.cell[0], cell[1] - pose.cell[1]
    if (dx, dy) == STEPS[pose.heading]:
        return Action.MOVE_FORWARD
    c, s = STEPS[pose.heading]
    ex, ey = c * dx + s * dy, -s * dx + c * dy
    return turn_toward_bearing(math.atan2(ey, ex))


def _viewpoints_of_class(house: HouseMap, cls: int) -> set:
    name = DEFAULT_VOCAB.objects[cls]
    return {v for o in house.objects if o.name == name for v in o.viewpoints}


# --- greedy audio baseline ----------------------------------------------------


def greedy_audio_step(state: AgentState, obs: Observation, house: HouseMap) -> Action:
    lx, ly = state.loc_belief.offset
    if math.hypot(lx, ly) <= 1.0 and obs.pose.cell in _viewpoints_of_class(house, state.class_belief.argmax()):
        return Action.STOP
    bearing = math.atan2(ly, lx)
    if abs(bearing) > math.pi / 4:
        return turn_toward_bearing(bearing)
    return Action.MOVE_FORWARD


# --- knowledge-prior agent ----------------------------------------------------


def region_score(class_belief, kg: KnowledgeGraph) -> np.ndarray:
    """``sum_o belief[o] * Ahat[o, r]`` renormalized over the 24 regions."""
    b = np.asarray(getattr(class_belief, "scores", class_belief), dtype=float)
    raw = b @ kg.object_region_block(normalized=True)
    total = raw.sum()
    if total <= 0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / total


def _top_classes(belief: ClassBelief, k: int = 3) -> list:
    order = sorted(range(belief.scores.size), key=lambda i: (-belief.scores[i], i))
    return order[:k]


def _region_label_index(house: HouseMap, rid: int) -> int:
    return DEFAULT_VOCAB.region_index(house.regions[rid].name)


def _plan_to(house: HouseMap, start, cells) -> list:
    """Shortest path (excluding ``start``) to the nearest of ``cells``; [] if unreachable."""
    from .worldgen import shortest_path

    dist = house.distance_field(start)
    best = min(cells, key=lambda c: (dist[c[1], c[0]], c), default=None)
    if best is None or dist[best[1], best[0]] == INF:
        return []
    return shortest_path(house, start, best)[1:]


def _queue_region_targets(state: AgentState, house: HouseMap, rid: int, pose: Pose) -> None:
    top = _top_classes(state.class_belief)
    goal = believed_goal_point(state, pose)
    targets = []
    for obj in house.objects_in_region(rid):
        cls = DEFAULT_VOCAB.object_index(obj.name)
        if cls not in top or obj.instance_id in state.inspected or not obj.viewpoints:
            continue
        # viewpoint closest to the believed source point: the stop test compares
        # the belief magnitude against 1 m, so this one is most likely to pass
        vp = min(obj.viewpoints, key=lambda v: (math.hypot(v[0] - goal[0], v[1] - goal[1]), v))
        key = (top.index(cls), math.hypot(obj.cell[0] - goal[0], obj.cell[1] - goal[1]), obj.instance_id)
        targets.append((key, obj, vp))
    state.pending = [(o, vp) for _, o, vp in sorted(targets, key=lambda x: x[0])]


def _confirmed(obs: Observation, cls: int, threshold: float = 0.5) -> bool:
    return bool(obs.vision[cls] >= threshold)


def _choose_region(state: AgentState, house: HouseMap, kg: KnowledgeGraph, pose: Pose):
    scores = region_score(state.class_belief, kg)
    dist = house.distance_field(pose.cell)
    best = None
    for rid, region in enumerate(house.regions):
        if rid in state.visited_regions:
            continue
        if all(dist[c[1], c[0]] == INF for c in region.cells):
            continue
        cx, cy = house.region_centroid(rid)
        key = (-scores[_region_label_index(house, rid)], math.hypot(cx - pose.cell[0], cy - pose.cell[1]), rid)
        if best is None or key < best[0]:
            best = (key, rid)
    return None if best is None else best[1]


def _follow(state: AgentState, pose: Pose):
    while state.plan and state.plan[0] == pose.cell:
        state.plan.pop(0)
    if state.plan:
        return step_toward_cell(pose, state.plan[0])
    if state.face is not None and pose.forward_cell() != state.face:
        return step_toward_cell(pose, state.face)
    return None


def knowledge_prior_step(state: AgentState, obs: Observation, kg: KnowledgeGraph, house: HouseMap) -> Action:
    pose = obs.pose
    cls = state.class_belief.argmax()
    if state.loc_belief.magnitude() <= 1.0 and pose.cell in _viewpoints_of_class(house, cls) and _confirmed(obs, cls):
        return Action.STOP

    for _ in range(len(house.regions) + len(house.objects) + 2):
        action = _follow(state, pose)
        if action is not None:
            return action
        if state.face is not None:
            # arrived and facing an instance without a confirmed stop: move on
            state.face = None
            continue
        if state.target_region is not None and house.region_id_at(pose.cell) == state.target_region:
            state.visited_regions.add(state.target_region)
            _queue_region_targets(state, house, state.target_region, pose)
            state.target_region = None
        if state.pending:
            obj, vp = state.pending.pop(0)
            state.inspected.add(obj.instance_id)
            state.plan = _plan_to(house, pose.cell, [vp])
            state.face = obj.cell
            continue
        rid = _choose_region(state, house, kg, pose)
        if rid is None:
            return greedy_audio_step(state, obs, house)
        state.target_region = rid
        state.plan = _plan_to(house, pose.cell, house.regions[rid].cells)
    return greedy_audio_step(state, obs, house)


# --- REINFORCE region head ----------------------------------------------------


@dataclass
class RegionPolicy:
    W: np.ndarray  # (n_regions, d)

    @classmethod
    def zeros(cls, n_regions: int, d: int):
        return cls(np.zeros((n_regions, d)))

    def probs(self, s) -> np.ndarray:
        z = self.W @ np.asarray(s, dtype=float)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def sample(self, s, rng: np.random.Generator) -> int:
        return int(rng.choice(self.W.shape[0], p=self.probs(s)))

    def greedy(self, s) -> int:
        return int(np.argmax(self.W @ np.asarray(s, dtype=float)))


def _check_batch(episodes):
    if not episodes:
        raise AgentError("REINFORCE batch is empty")
    returns = np.array([float(G) for _, _, G in episodes])
    if not np.all(np.isfinite(returns)):
        raise AgentError("non-finite return in REINFORCE batch")
    return returns


def _as_sequences(states, choices):
    S = np.atleast_2d(np.asarray(states, dtype=float))
    a = np.atleast_1d(np.asarray(choices, dtype=int))
    if S.shape[0] != a.shape[0]:
        raise AgentError(f"{S.shape[0]} states but {a.shape[0]} choices")
    return S, a


def surrogate_objective(policy: RegionPolicy, episodes) -> float:
    """``sum_i (G_i - mean G) * sum_t log pi(a_t | s_t)``, whose gradient is the update direction."""
    returns = _check_batch(episodes)
    baseline = returns.mean()
    total = 0.0
    for (states, choices, _), G in zip(episodes, returns):
        S, a = _as_sequences(states, choices)
        for s, c in zip(S, a):
            z = policy.W @ s
            total += (G - baseline) * (z[c] - z.max() - math.log(np.exp(z - z.max()).sum()))
    return float(total)


def reinforce_gradient(policy: RegionPolicy, episodes) -> np.ndarray:
    returns = _check_batch(episodes)
    baseline = returns.mean()
    grad = np.zeros_like(policy.W)
    for (states, choices, _), G in zip(episodes, returns):
        S, a = _as_sequences(states, choices)
        for s, c in zip(S, a):
            g = -policy.probs(s)
            g[c] += 1.0
            grad += (G - baseline) * np.outer(g, s)
    return grad


def reinforce_update(policy: RegionPolicy, episodes, lr: float = 0.1) -> RegionPolicy:
    return RegionPolicy(policy.W + lr * reinforce_gradient(policy, episodes))
