"""Navigation metrics (SR, SPL, SNA, DTG, SWS) and classifier calibration metrics."""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .worldgen import HEADINGS, INF, STEPS, HouseMap, Pose

COLUMNS = ("split", "n", "SR", "SPL", "SNA", "DTG", "SWS")
SPLIT_ORDER = ("SH/HS", "SH/US", "UH/HS", "UH/US")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricRow:
    split: str
    n: int
    sr: float
    spl: float
    sna: float
    dtg: float
    sws: float

    def values(self) -> tuple:
        return (self.split, self.n, self.sr, self.spl, self.sna, self.dtg, self.sws)


@dataclass(frozen=True)
class MetricReport:
    overall: MetricRow
    per_split: dict = field(default_factory=dict)  # label -> MetricRow

    @property
    def sr(self) -> float:
        return self.overall.sr

    def rows(self) -> list:
        ordered = sorted(self.per_split, key=lambda k: (SPLIT_ORDER.index(k) if k in SPLIT_ORDER else 99, k))
        return [self.per_split[k] for k in ordered] + [self.overall]


def shortest_to_viewpoints(house: HouseMap, cell, viewpoints) -> float:
    return min(float(house.distance_field(v)[cell[1], cell[0]]) for v in viewpoints)


def optimal_action_count(house: HouseMap, start: Pose, viewpoints) -> int:
    """Fewest MoveForward/TurnLeft/TurnRight actions to reach a viewpoint, plus one Stop."""
    targets = set(map(tuple, viewpoints))
    if not targets:
        raise MetricsError("goal has no viewpoints")
    s0 = (tuple(start.cell), start.heading)
    dist = {s0: 0}
    queue = deque([s0])
    while queue:
        cell, h = queue.popleft()
        d = dist[(cell, h)]
        if cell in targets:
            return d + 1
        dx, dy = STEPS[h]
        fwd = (cell[0] + dx, cell[1] + dy)
        succ = [((cell), (h + 90) % 360), (cell, (h - 90) % 360)]
        if house.is_free(fwd):
            succ.append((fwd, h))
        for s in succ:
            if s not in dist:
                dist[s] = d + 1
                queue.append(s)
    raise MetricsError(f"no viewpoint reachable from {start.cell} in {house.name}")


def _episode_terms(result, episode, house: HouseMap):
    if result.episode_id != episode.episode_id or result.house_id != episode.house_id or house.name != episode.house_id:
        raise MetricsError(f"inconsistent references for episode {episode.episode_id}: "
                           f"result {result.house_id}/{result.episode_id}, map {house.name}")
    vps = episode.goal(house).viewpoints
    s = 1.0 if result.success else 0.0
    ell = shortest_to_viewpoints(house, episode.start.cell, vps)
    n_opt = optimal_action_count(house, episode.start, vps)
    spl = s * ell / max(result.path_length, ell) if ell > 0 else s
    sna = s * n_opt / max(result.action_count, n_opt)
    sws = 1.0 if (result.success and result.stopped_after_silence) else 0.0
    silent_end = 1.0 if result.stopped_after_silence else 0.0
    return s, spl, sna, float(result.final_geodesic), sws, silent_end


def _aggregate(label: str, terms, sws_denominator: str) -> MetricRow:
    if not terms:
        return MetricRow(label, 0, 0.0, 0.0, 0.0, 0.0, 0.0)
    arr = np.array(terms, dtype=float)
    n = len(terms)
    # fixed-order sums keep the report independent of how episodes were scheduled
    sums = [float(sum(sorted(arr[:, j]))) for j in range(arr.shape[1])]
    if sws_denominator == "all":
        sws = sums[4] / n
    else:
        sws = sums[4] / sums[5] if sums[5] > 0 else 0.0
    return MetricRow(label, n, sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, sws)


def compute_metrics(results, sws_denominator: str = "all") -> MetricReport:
    """``results``: iterable of ``(RolloutResult, Episode, HouseMap)``."""
    if sws_denominator not in ("all", "silent"):
        raise MetricsError(f"unknown SWS denominator {sws_denominator!r}")
    items = list(results)
    if not items:
        raise MetricsError("cannot compute metrics of an empty batch")
    items.sort(key=lambda x: x[1].episode_id)
    by_split: dict = {}
    everything = []
    for r, ep, house in items:
        t = _episode_terms(r, ep, house)
        by_split.setdefault(ep.split, []).append(t)
        everything.append(t)
    per = {k: _aggregate(k, v, sws_denominator) for k, v in by_split.items()}
    return MetricReport(_aggregate("all", everything, sws_denominator), per)


def classifier_metrics(predictions, ground_truth, threshold: float = 0.5):
    """Top-1 accuracy, exact match ratio and Hamming loss of multi-label scores."""
    P = np.atleast_2d(np.asarray(predictions, dtype=float))
    Y = np.atleast_2d(np.asarray(ground_truth, dtype=float))
    if P.shape != Y.shape:
        raise MetricsError(f"predictions {P.shape} and ground truth {Y.shape} are not aligned")
    if P.shape[0] == 0:
        raise MetricsError("no examples")
    hard = P >= threshold
    truth = Y >= 0.5
    accuracy = float(np.mean(truth[np.arange(len(P)), np.argmax(P, axis=1)]))
    emr = float(np.mean(np.all(hard == truth, axis=1)))
    hamming = float(np.mean(np.sum(hard != truth, axis=1) / P.shape[1]))
    return accuracy, emr, hamming


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, str)) else f"{v:.6f}"


def write_report(report: MetricReport | None, path, fmt: str = "csv") -> None:
    rows = [] if report is None else report.rows()
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(COLUMNS)
                for r in rows:
                    w.writerow([_fmt(v) for v in r.values()])
        elif fmt == "json":
            data = [dict(zip(COLUMNS, r.values())) for r in rows]
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(data, fh, indent=2, sort_keys=False)
                fh.write("\n")
        else:
            raise MetricsError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise MetricsError(f"cannot write report {path}: {exc}") from None


def read_report_json(path) -> MetricReport | None:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not data:
        return None
    rows = [MetricRow(d["split"], d["n"], d["SR"], d["SPL"], d["SNA"], d["DTG"], d["SWS"]) for d in data]
    overall = rows[-1]
    return MetricReport(overall, {r.split: r for r in rows[:-1]})


def report_to_dict(report: MetricReport) -> dict:
    return {"overall": asdict(report.overall), "per_split": {k: asdict(v) for k, v in report.per_split.items()}}
