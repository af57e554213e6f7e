"""Command-line entry point: ``sceneprior <command> [options]``.

Errors print one line, ``error: <category>: <message>``, and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .episodes import EpisodeError, RolloutConfig
from .knowledge import KnowledgeError, build_knowledge_graph, load_shipped_graph, load_triples, save_triples
from .metrics import MetricsError, compute_metrics, read_report_json, write_report
from .worldgen import WorldError, default_params, generate_corpus, load_corpus, save_corpus

EXIT_CODES = {"config": 2, "io": 3, "input": 4, "world": 5, "knowledge": 6, "episode": 7, "metrics": 8}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    # the environment variable wins over both the flag and the config
    path = Path(os.environ.get("SCENEPRIOR_OUT") or override or cfg.paths.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _write_json(path: Path, data) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError("io", f"cannot write {path}: {exc.strerror}") from None


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError("input", f"missing input file {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError("input", f"{path}: invalid JSON at line {exc.lineno}") from None


def _corpus(cfg: ExperimentConfig, out: Path, workers: int = 1):
    path = Path(cfg.paths.corpus) if cfg.paths.corpus else out / "corpus.json"
    if path.exists():
        try:
            return load_corpus(path)
        except (KeyError, ValueError) as exc:
            raise CliError("input", f"corpus {path} is malformed: {exc}") from None
    if cfg.paths.corpus:
        raise CliError("input", f"missing corpus file {path}")
    return _generate(cfg, workers)


def _generate(cfg: ExperimentConfig, workers: int):
    c = cfg.corpus
    params = default_params(size_range=tuple(c.size_range), region_count=tuple(c.region_count),
                            objects_per_region=tuple(c.objects_per_region), duplicate_penalty=c.duplicate_penalty,
                            extra_door_prob=c.extra_door_prob)
    return generate_corpus(cfg.master_seed, c.n_houses, params, workers=workers)


def _kg(cfg: ExperimentConfig):
    return load_triples(cfg.paths.kg) if cfg.paths.kg else load_shipped_graph()


def cmd_gen_corpus(args) -> int:
    from .episodes import make_object_splits

    cfg = _config(args)
    out = _out_dir(cfg, args.out)
    corpus = _generate(cfg, args.workers)
    save_corpus(corpus, out / "corpus.json")
    heard, unheard = make_object_splits(seed=cfg.master_seed)
    _write_json(out / "splits.json", {
        "seen": [corpus.houses[i].name for i in corpus.seen],
        "unseen": [corpus.houses[i].name for i in corpus.unseen],
        "heard": list(heard), "unheard": list(unheard),
    })
    print(f"wrote {len(corpus.houses)} houses ({len(corpus.seen)} seen / {len(corpus.unseen)} unseen) to {out}")
    return 0


def cmd_build_kg(args) -> int:
    corpus = load_corpus(args.corpus) if Path(args.corpus).exists() else None
    if corpus is None:
        raise CliError("input", f"missing corpus file {args.corpus}")
    if not corpus.houses or not any(names for h in corpus.houses for _, names in h.labeled_rooms()):
        raise CliError("knowledge", f"corpus {args.corpus} contains no labeled objects")
    kg, warnings = build_knowledge_graph(corpus.houses)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.out or "kg.triples")
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    save_triples(kg, out)
    print(f"wrote {len(kg.edges())} edges to {out} (theta_oo={kg.theta_oo:g}, theta_rr={kg.theta_rr:g})")
    return 0


def _episodes(cfg: ExperimentConfig, corpus, out: Path):
    from .harness import episodes_from_json, sample_dataset

    if cfg.paths.episodes:
        return episodes_from_json(_read_json(cfg.paths.episodes))
    path = out / "episodes.json"
    if path.exists():
        return episodes_from_json(_read_json(path))
    return sample_dataset(corpus, cfg.master_seed, cfg.episodes.per_split, cfg.episodes.splits)


def cmd_sample_episodes(args) -> int:
    from .harness import episodes_to_json, sample_dataset

    cfg = _config(args)
    out = _out_dir(cfg, args.out)
    corpus = _corpus(cfg, out, args.workers)
    episodes = sample_dataset(corpus, cfg.master_seed, cfg.episodes.per_split, cfg.episodes.splits)
    _write_json(out / "episodes.json", episodes_to_json(episodes))
    print(f"wrote {len(episodes)} episodes to {out / 'episodes.json'}")
    return 0


def cmd_eval(args) -> int:
    from .harness import evaluate
    from .svg import render_trajectory, trajectory_record

    cfg = _config(args)
    out = _out_dir(cfg, args.out)
    corpus = _corpus(cfg, out, args.workers)
    kg = _kg(cfg)
    episodes = _episodes(cfg, corpus, out)
    rc = RolloutConfig(policy=cfg.policy.name, location_mode=cfg.policy.location_mode,
                       use_pipeline=cfg.policy.use_pipeline, record_beliefs=bool(args.svg))
    results = evaluate(episodes, corpus, kg, workers=args.workers, rc=rc, rewards=cfg.rewards,
                       oracle=cfg.oracle, acoustic=cfg.acoustics)
    houses = {h.name: h for h in corpus.houses}
    by_id = {ep.episode_id: ep for ep in episodes}
    triples = [(r, by_id[r.episode_id], houses[r.house_id]) for r in results]
    report = compute_metrics(triples)
    policy = cfg.policy.name
    for label, row in report.per_split.items():
        sub = compute_metrics([t for t in triples if t[1].split == label])
        write_report(sub, out / f"report_{policy}_{label.replace('/', '-')}.csv", "csv")
    write_report(report, out / f"report_{policy}.csv", "csv")
    write_report(report, out / f"report_{policy}.json", "json")
    if args.svg:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for r, ep, house in triples[: args.svg]:
            rec = trajectory_record(house, ep, r)
            _write_json(traj_dir / f"episode_{ep.episode_id:05d}.json", rec)
            (traj_dir / f"episode_{ep.episode_id:05d}.svg").write_text(render_trajectory(rec), encoding="utf-8")
    for row in report.rows():
        print(f"{row.split:6s} n={row.n:5d} SR={row.sr:.3f} SPL={row.spl:.3f} SNA={row.sna:.3f} "
              f"DTG={row.dtg:.3f} SWS={row.sws:.3f}")
    return 0


def cmd_train(args) -> int:
    from .training import load_checkpoint, save_checkpoint, train

    cfg = _config(args)
    out = _out_dir(cfg, args.out)
    from dataclasses import replace

    tcfg = replace(cfg.train, seed=cfg.master_seed if args.seed is not None else cfg.train.seed)
    policy, start = None, 0
    if args.resume:
        try:
            policy, start = load_checkpoint(args.resume)
        except (OSError, KeyError, ValueError) as exc:
            raise CliError("input", f"cannot resume from {args.resume}: {exc}") from None
    result = train(_kg(cfg), tcfg, policy=policy, start_batch=start, n_batches=args.batches)
    save_checkpoint(result, out / "region_policy.bin")
    with open(out / "learning_curve.csv", "a" if args.resume else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not args.resume:
            w.writerow(["batch", "mean_return", "greedy_accuracy"])
        for b, g, acc in result.curve:
            w.writerow([b, f"{g:.6f}", f"{acc:.6f}"])
    print(f"trained {result.batches_done} batches; greedy accuracy over last 500 episodes {result.final_accuracy:.3f}")
    return 0


def cmd_plot_traj(args) -> int:
    from .svg import render_trajectory

    record = _read_json(args.trajectory)
    svg = render_trajectory(record)
    out = Path(args.out or Path(args.trajectory).with_suffix(".svg"))
    try:
        out.write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise CliError("io", f"cannot write {out}: {exc.strerror}") from None
    print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        report = read_report_json(path)
        name = Path(path).stem
        for row in ([] if report is None else report.rows()):
            rows.append([name, *row.values()])
    header = ["source", "split", "n", "SR", "SPL", "SNA", "DTG", "SWS"]
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (int, str)) else f"{v:.6f}" for v in r])
    finally:
        if args.out:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sceneprior", description="Knowledge-driven scene priors for audio-visual navigation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--config", help="experiment JSON config")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--out", help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("gen-corpus", help="generate the house corpus and split manifest")
    common(sp)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("build-kg", help="build a knowledge graph from a corpus")
    sp.add_argument("corpus")
    sp.add_argument("--out", help="output .triples file")
    sp.set_defaults(func=cmd_build_kg)

    sp = sub.add_parser("sample-episodes", help="sample the evaluation episode set")
    common(sp)
    sp.set_defaults(func=cmd_sample_episodes)

    sp = sub.add_parser("eval", help="evaluate a policy and write metric reports")
    common(sp)
    sp.add_argument("--svg", type=int, nargs="?", const=5, default=0, metavar="N",
                    help="also write trajectory JSON+SVG for the first N episodes (default 5)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("train", help="REINFORCE training of the region head")
    common(sp)
    sp.add_argument("--resume", help="checkpoint to continue from")
    sp.add_argument("--batches", type=int, help="stop after this many batches")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("plot-traj", help="render a trajectory JSON as SVG")
    sp.add_argument("trajectory")
    sp.add_argument("--out", help="output .svg path")
    sp.set_defaults(func=cmd_plot_traj)

    sp = sub.add_parser("report", help="combine JSON reports into one CSV table")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--out", help="CSV path (stdout if omitted)")
    sp.set_defaults(func=cmd_report)
    return p


def _category(exc: Exception) -> str:
    for cls, name in ((ConfigError, "config"), (KnowledgeError, "knowledge"), (EpisodeError, "episode"),
                      (MetricsError, "metrics"), (WorldError, "world"), (OSError, "io")):
        if isinstance(exc, cls):
            return name
    return "input"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        category, msg = exc.category, str(exc)
    except (ValueError, KeyError, OSError) as exc:
        category, msg = _category(exc), str(exc)
    msg = " ".join(msg.split())
    print(f"error: {category}: {msg}", file=sys.stderr)
    return EXIT_CODES.get(category, 1)


if __name__ == "__main__":
    sys.exit(main())
