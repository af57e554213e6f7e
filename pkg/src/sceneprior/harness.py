"""Dataset sampling and (optionally parallel) evaluation over a corpus.

Workers receive contiguous chunks of episodes; results are reassembled in
episode-id order, so reports do not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .episodes import Episode, EpisodeError, RolloutConfig, make_object_splits, rollout, sample_episode
from .knowledge import KnowledgeGraph
from .rng import derive_seed, make_rng
from .worldgen import Corpus

LABEL_SPLITS = {"SH/HS": ("seen", "heard"), "SH/US": ("seen", "unheard"),
                "UH/HS": ("unseen", "heard"), "UH/US": ("unseen", "unheard")}


def sample_dataset(corpus: Corpus, master_seed: int, per_split: int, splits=tuple(LABEL_SPLITS)) -> list:
    """``per_split`` episodes per split label, cycling over a seeded house order."""
    heard, unheard = make_object_splits(seed=master_seed)
    episodes = []
    for label in splits:
        house_split, sound_split = LABEL_SPLITS[label]
        pool = corpus.seen if house_split == "seen" else corpus.unseen
        classes = heard if sound_split == "heard" else unheard
        order = [pool[int(i)] for i in make_rng(master_seed, "house-order", label).permutation(len(pool))]
        candidates = [i for i in order if any(o.name in classes for o in corpus.houses[i].objects)]
        if not candidates:
            raise EpisodeError(f"split {label}: no house contains a {sound_split} object")
        for k in range(per_split):
            house = corpus.houses[candidates[k % len(candidates)]]
            seed = derive_seed(master_seed, "episode", label, k)
            episodes.append(sample_episode(house, seed, classes, (house_split, sound_split), len(episodes)))
    return episodes


_WORKER: dict = {}


def _init_worker(houses, kg, kwargs):
    _WORKER["houses"] = houses
    _WORKER["kg"] = kg
    _WORKER["kwargs"] = kwargs


def _run_chunk(chunk):
    houses = _WORKER["houses"]
    return [rollout(ep, houses[ep.house_id], _WORKER["kg"], **_WORKER["kwargs"]) for ep in chunk]


def evaluate(episodes: list, corpus: Corpus, kg: KnowledgeGraph, workers: int = 1, **kwargs) -> list:
    """Roll out every episode; ``kwargs`` are forwarded to :func:`rollout`."""
    houses = {h.name: h for h in corpus.houses}
    for ep in episodes:
        if ep.house_id not in houses:
            raise EpisodeError(f"episode {ep.episode_id} references unknown house {ep.house_id}")
    kwargs.setdefault("rc", RolloutConfig())
    if workers <= 1 or len(episodes) < 2:
        _init_worker(houses, kg, kwargs)
        results = _run_chunk(episodes)
    else:
        n = min(workers, len(episodes))
        size = -(-len(episodes) // n)
        chunks = [episodes[i:i + size] for i in range(0, len(episodes), size)]
        with ProcessPoolExecutor(max_workers=n, initializer=_init_worker, initargs=(houses, kg, kwargs)) as pool:
            results = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return sorted(results, key=lambda r: r.episode_id)


def episodes_to_json(episodes) -> list:
    return [ep.to_json() for ep in episodes]


def episodes_from_json(data) -> list:
    return [Episode.from_json(d) for d in data]
