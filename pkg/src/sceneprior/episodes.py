"""Episode sampling, environment stepping and rollout execution.

One action per second: a sound of duration ``d`` is audible at observation
times ``t < d`` and silent from ``ceil(d)`` on.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import acoustics as ac
from .agents import (
    Action,
    AgentState,
    Observation,
    greedy_audio_step,
    knowledge_prior_step,
    random_policy_step,
)
from .beliefs import (
    EXPONENTIAL,
    ClassBelief,
    LocationBelief,
    PoseDelta,
    update_class_belief,
    update_location_belief,
)
from .gen import GraphEncoder, audio_scores45
from .knowledge import KnowledgeGraph
from .memory import AttentionParams, Encoders, SceneMemory, belief_query, build_entry, decode, encode, wall_rays
from .rng import derive_seed, make_rng
from .vocab import DEFAULT_VOCAB, Vocabulary
from .worldgen import INF, HEADINGS, STEPS, HouseMap, ObjectInstance, Pose, WorldError

HOUSE_SPLITS = ("seen", "unseen")
SOUND_SPLITS = ("heard", "unheard")
SPLIT_LABELS = {("seen", "heard"): "SH/HS", ("seen", "unheard"): "SH/US",
                ("unseen", "heard"): "UH/HS", ("unseen", "unheard"): "UH/US"}
MAX_TRIES = 10_000


class EpisodeError(ValueError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    success_reward: float = 10.0
    geo_delta_scale: float = 1.0
    step_penalty: float = -0.01
    max_steps: int = 500


@dataclass(frozen=True)
class Episode:
    episode_id: int
    house_id: str
    start: Pose
    goal_id: int  # instance_id within the house
    duration: float
    house_split: str
    sound_split: str
    seed: int

    @property
    def split(self) -> str:
        return SPLIT_LABELS[(self.house_split, self.sound_split)]

    def goal(self, house: HouseMap) -> ObjectInstance:
        for obj in house.objects:
            if obj.instance_id == self.goal_id:
                return obj
        raise EpisodeError(f"house {house.name} has no instance {self.goal_id}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["start"] = {"cell": list(self.start.cell), "heading": self.start.heading}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Episode":
        d = dict(d)
        s = d.pop("start")
        return cls(start=Pose(tuple(s["cell"]), int(s["heading"])), **d)


def make_object_splits(vocab: Vocabulary = DEFAULT_VOCAB, seed: int = 0, n_unheard: int = 5):
    order = make_rng(seed, "object-split").permutation(vocab.n_objects)
    unheard = sorted(vocab.objects[i] for i in order[:n_unheard])
    heard = sorted(vocab.objects[i] for i in order[n_unheard:])
    return tuple(heard), tuple(unheard)


def sample_duration(rng: np.random.Generator) -> float:
    return float(np.clip(rng.normal(15.0, 9.0), 5.0, 500.0))


def sample_episode(house: HouseMap, seed: int, classes, split=("unseen", "unheard"), episode_id: int = 0,
                   max_tries: int = MAX_TRIES) -> Episode:
    """Rejection-sample a start and goal with geodesic > 4 m and geodesic/euclidean > 1.1."""
    classes = set(classes)
    goals = [o for o in house.objects if o.name in classes]
    if not goals:
        raise EpisodeError(f"house {house.name} has no object of classes {sorted(classes)}")
    free = house.free_cells()
    rng = make_rng(seed, "episode", house.name)
    for _ in range(max_tries):
        goal = goals[int(rng.integers(len(goals)))]
        start = free[int(rng.integers(len(free)))]
        geo = float(house.distance_field(goal.cell)[start[1], start[0]])
        euc = math.hypot(start[0] - goal.cell[0], start[1] - goal.cell[1])
        if geo == INF or geo <= 4.0 or geo / euc <= 1.1:
            continue
        heading = HEADINGS[int(rng.integers(4))]
        return Episode(episode_id, house.name, Pose(start, heading), goal.instance_id, sample_duration(rng),
                       split[0], split[1], int(derive_seed(seed, "episode-stream", episode_id)))
    raise EpisodeError(f"house {house.name}: no start/goal pair met the constraints after {max_tries} tries")


def check_success(house: HouseMap, episode: Episode, pose: Pose, action) -> bool:
    return Action(action) == Action.STOP and pose.cell in episode.goal(house).viewpoints


def apply_action(house: HouseMap, pose: Pose, action) -> tuple:
    """Next pose and the pose change expressed in the previous egocentric frame."""
    action = Action(action)
    if action == Action.MOVE_FORWARD:
        nxt = pose.forward_cell()
        if house.is_free(nxt):
            return Pose(nxt, pose.heading), PoseDelta((1, 0), 0)
        return pose, PoseDelta((0, 0), 0)
    if action == Action.TURN_LEFT:
        return Pose(pose.cell, (pose.heading + 90) % 360), PoseDelta((0, 0), 90)
    if action == Action.TURN_RIGHT:
        return Pose(pose.cell, (pose.heading - 90) % 360), PoseDelta((0, 0), -90)
    return pose, PoseDelta((0, 0), 0)


@dataclass
class EnvObservation:
    vision: np.ndarray
    audio: ac.AudioFeatures
    drr: float  # true DRR of this step's RIR, 0 when silent
    delta: PoseDelta


@dataclass
class EnvState:
    house: HouseMap
    episode: Episode
    rewards: RewardConfig = field(default_factory=RewardConfig)
    oracle: ac.OracleConfig = field(default_factory=ac.OracleConfig)
    acoustic: ac.AcousticParams = field(default_factory=ac.AcousticParams)
    pose: Pose | None = None
    t: int = 0
    done: bool = False
    success: bool = False

    def __post_init__(self):
        self.goal = self.episode.goal(self.house)
        self.pose = self.pose or self.episode.start
        self._goal_dist = self.house.distance_field(self.goal.cell)
        self.event = ac.SoundEvent(self.goal, self.episode.duration)

    def geodesic_to_goal(self, cell=None) -> float:
        c = cell or self.pose.cell
        return float(self._goal_dist[c[1], c[0]])

    def observe(self, delta: PoseDelta = PoseDelta()) -> EnvObservation:
        seed = self.episode.seed
        vision = ac.vision_oracle(self.house, self.pose, self.oracle, make_rng(seed, "vision", self.t))
        audio = ac.observe_audio(self.house, self.event, self.pose, self.t)
        drr = 0.0
        if not audio.silent:
            rir = ac.synthesize_rir(self.house, self.goal.cell, self.pose.cell, self.acoustic, seed)
            drr = ac.true_drr(rir)
        return EnvObservation(vision, audio, drr, delta)


def reset(env: EnvState) -> EnvObservation:
    return env.observe()


def step(env: EnvState, action) -> tuple:
    if env.done:
        raise EpisodeError(f"episode {env.episode.episode_id}: step after done")
    action = Action(action)
    before = env.geodesic_to_goal()
    env.pose, delta = apply_action(env.house, env.pose, action)
    env.t += 1
    after = env.geodesic_to_goal()
    success = action == Action.STOP and env.pose.cell in env.goal.viewpoints
    cfg = env.rewards
    reward = cfg.step_penalty + cfg.geo_delta_scale * (before - after) + (cfg.success_reward if success else 0.0)
    env.success = success
    env.done = action == Action.STOP or env.t >= cfg.max_steps
    obs = None if env.done else env.observe(delta)
    return obs, reward, env.done, {"success": success, "geo_delta": before - after}


@dataclass(frozen=True)
class RolloutResult:
    episode_id: int
    house_id: str
    actions: tuple
    poses: tuple  # ((x, y, heading), ...) including the start
    rewards: tuple
    success: bool
    path_length: float
    action_count: int
    final_geodesic: float  # to the nearest goal viewpoint
    sound_stopped_step: int
    stopped_after_silence: bool
    beliefs: tuple = ()  # ((bx, by, drr, argmax), ...) per decision, debug only

    def digest(self) -> str:
        blob = json.dumps(rollout_to_json(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def rollout_to_json(r: RolloutResult) -> dict:
    d = asdict(r)
    d["actions"] = [int(a) for a in r.actions]
    d["poses"] = [list(p) for p in r.poses]
    d["rewards"] = [float(x) for x in r.rewards]
    d["beliefs"] = [list(b) for b in r.beliefs]
    return d


@dataclass
class Pipeline:
    """Optional GEN + scene-memory path producing the state vector s_t."""

    kg: KnowledgeGraph
    seed: int = 0
    capacity: int = 150
    d_model: int = 64
    gen_v: GraphEncoder | None = None
    gen_b: GraphEncoder | None = None
    enc: Encoders | None = None
    attn: AttentionParams | None = None

    def __post_init__(self):
        self.gen_v = self.gen_v or GraphEncoder.create(self.kg.Ahat, seed=derive_seed(self.seed, "gen-v"))
        self.gen_b = self.gen_b or GraphEncoder.create(self.kg.Ahat, seed=derive_seed(self.seed, "gen-b"))
        self.enc = self.enc or Encoders.create(self.seed)
        self.attn = self.attn or AttentionParams.create(self.seed, d_model=self.d_model)

    def state(self, agent: AgentState, house: HouseMap, pose: Pose, start: Pose, vision, prev_action) -> np.ndarray:
        e_v = self.enc.vision_stub(vision, wall_rays(house, pose))
        e_vgen = self.gen_v.encode(vision)
        xy = (pose.cell[0] - start.cell[0], pose.cell[1] - start.cell[1])
        entry = build_entry(e_v, e_vgen, xy, pose.heading, self.enc.action_embedding(prev_action))
        agent.memory = agent.memory.push(entry)
        Me = encode(agent.memory, self.attn)
        e_bgen = self.gen_b.encode(audio_scores45(agent.class_belief.scores))
        return decode(Me, belief_query(e_bgen, agent.class_belief.scores, agent.loc_belief.offset), self.attn)


@dataclass(frozen=True)
class RolloutConfig:
    policy: str = "knowledge"
    location_mode: str = EXPONENTIAL
    class_delta: float = 0.5
    random_auto_stop: float = 1.0  # meters, random baseline only
    use_pipeline: bool = False
    record_beliefs: bool = False


def _perceive(agent: AgentState, env_obs: EnvObservation, episode: Episode, t: int, goal_cls: int,
              oracle: ac.OracleConfig, rc: RolloutConfig) -> None:
    audio = env_obs.audio
    if audio.silent:
        cls_obs, loc_obs = None, None
    else:
        cls_obs = ac.audio_class_oracle(audio, goal_cls, oracle, make_rng(episode.seed, "audio", t))
        loc_obs = ac.location_oracle(audio, env_obs.drr, oracle, make_rng(episode.seed, "loc", t))
    agent.class_belief = update_class_belief(agent.class_belief, cls_obs, rc.class_delta, t if cls_obs is not None else None)
    agent.loc_belief = update_location_belief(agent.loc_belief, loc_obs, env_obs.delta, rc.location_mode)


def rollout(episode: Episode, house: HouseMap, kg: KnowledgeGraph | None = None, rc: RolloutConfig = RolloutConfig(),
            rewards: RewardConfig = RewardConfig(), oracle: ac.OracleConfig = ac.OracleConfig(),
            acoustic: ac.AcousticParams = ac.AcousticParams(), pipeline: Pipeline | None = None) -> RolloutResult:
    if episode.house_id != house.name:
        raise EpisodeError(f"episode {episode.episode_id} belongs to {episode.house_id}, not {house.name}")
    if rc.policy not in ("random", "greedy", "knowledge"):
        raise EpisodeError(f"unknown policy {rc.policy!r}")
    if rc.policy == "knowledge" and kg is None:
        raise EpisodeError("knowledge policy needs a knowledge graph")
    if rc.use_pipeline and pipeline is None and kg is None:
        raise EpisodeError("the GEN/memory pipeline needs a knowledge graph")
    env = EnvState(house, episode, rewards, oracle, acoustic)
    goal_cls = DEFAULT_VOCAB.object_index(env.goal.name)
    agent = AgentState(rng=make_rng(episode.seed, "policy"))
    if pipeline is None and rc.use_pipeline:
        pipeline = Pipeline(kg, seed=episode.seed)

    env_obs = reset(env)
    actions, rewards_out, beliefs = [], [], []
    poses = [(*env.pose.cell, env.pose.heading)]
    path = 0.0
    prev_action = None
    stop_t = None
    while True:
        t = env.t
        try:
            _perceive(agent, env_obs, episode, t, goal_cls, oracle, rc)
            if pipeline is not None:
                agent.state_vector = pipeline.state(agent, house, env.pose, episode.start, env_obs.vision, prev_action)
            obs = Observation(env.pose, env_obs.vision, not env_obs.audio.silent, t)
            if rc.policy == "random":
                if math.hypot(env.pose.cell[0] - env.goal.cell[0], env.pose.cell[1] - env.goal.cell[1]) <= rc.random_auto_stop:
                    action = Action.STOP
                else:
                    action = random_policy_step(agent.rng)
            elif rc.policy == "greedy":
                action = greedy_audio_step(agent, obs, house)
            else:
                action = knowledge_prior_step(agent, obs, kg, house)
        except (ValueError, WorldError) as exc:
            raise EpisodeError(f"episode {episode.episode_id} step {t}: {exc}") from exc
        if rc.record_beliefs:
            bx, by = agent.loc_belief.offset
            beliefs.append((float(bx), float(by), agent.loc_belief.drr, agent.class_belief.argmax()))
        before = env.pose.cell
        env_obs, reward, done, info = step(env, action)
        path += math.hypot(env.pose.cell[0] - before[0], env.pose.cell[1] - before[1])
        actions.append(int(action))
        rewards_out.append(reward)
        poses.append((*env.pose.cell, env.pose.heading))
        prev_action = action
        if done:
            if action == Action.STOP:
                stop_t = t
            break

    vp_dist = min(float(house.distance_field(v)[env.pose.cell[1], env.pose.cell[0]]) for v in env.goal.viewpoints)
    sound_stop = int(math.ceil(episode.duration))
    return RolloutResult(episode.episode_id, house.name, tuple(actions), tuple(poses), tuple(rewards_out),
                         env.success, path, len(actions), vp_dist, sound_stop,
                         bool(stop_t is not None and stop_t >= sound_stop), tuple(beliefs))
