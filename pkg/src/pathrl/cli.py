"""Command-line entry points: synth, train, eval, sweep, paths, serve, report."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .drl import TrainConfig, evaluate_policy, select_checkpoint, train
from .env import EnvConfig
from .errors import ConfigError
from .harness import ExperimentPlan, run_plan
from .harness import report as harness_report
from .metrics import build_report
from .pathways import Pathway, aggregate, export_sankey_json, extract
from .qnet import load_policy, save_policy
from .schema import load_schema
from .synth import (DegradationSpec, degrade, load_penalty_table, make_anemia_dataset,
                    make_lupus_dataset, read_csv, split, write_csv)


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--use-case", required=True, choices=["anemia", "lupus"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=70_000, help="total record count")
    p.add_argument("--missing", type=float, default=0.0,
                   help="missingness level applied to the written dataset")
    p.add_argument("--noise", type=float, default=0.0,
                   help="noise level applied to the written dataset")
    p.set_defaults(func=cmd_synth)


def cmd_synth(args):
    if args.use_case == "anemia":
        data = make_anemia_dataset(max(1, round(args.n / 7)), seed=args.seed)
    else:
        n_pos = round(args.n * 5 / 7)
        data = make_lupus_dataset(n_pos, args.n - n_pos, seed=args.seed)
    if args.noise > 0:
        kind = "anemia-noise" if args.use_case == "anemia" else "lupus-label-noise"
        data = degrade(data, DegradationSpec(kind=kind, level=args.noise, seed=args.seed + 1))
    if args.missing > 0:
        data = degrade(data, DegradationSpec(kind="missingness", level=args.missing,
                                             seed=args.seed + 2))
    write_csv(args.out, data)
    print(f"wrote {len(data)} records to {args.out}")


def _add_train(sub):
    p = sub.add_parser("train", help="train one agent and save checkpoints")
    p.add_argument("--use-case", required=True, choices=["anemia", "lupus"])
    p.add_argument("--algo", required=True,
                   choices=["dqn", "ddqn", "dueling", "dueling-ddqn"])
    p.add_argument("--per", action="store_true", help="prioritized replay")
    p.add_argument("--lambda", dest="lam", type=float, default=9.0)
    p.add_argument("--timesteps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--select", choices=["accuracy", "wpahm"], default="accuracy")
    p.add_argument("--records", type=int, default=10_000,
                   help="synthetic dataset size when --data is not given")
    p.add_argument("--data", help="dataset CSV (default: generate synthetically)")
    p.add_argument("--data-seed", type=int, default=7)
    p.add_argument("--split-seed", type=int, default=11)
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_train)


def _load_or_generate(use_case, data, records, data_seed):
    schema = load_schema(use_case)
    if data:
        return read_csv(data, schema)
    if use_case == "anemia":
        return make_anemia_dataset(max(1, round(records / 7)), seed=data_seed)
    n_pos = round(records * 5 / 7)
    return make_lupus_dataset(n_pos, records - n_pos, seed=data_seed)


def cmd_train(args):
    dataset = _load_or_generate(args.use_case, args.data, args.records, args.data_seed)
    parts = split(dataset, seed=args.split_seed)
    cfg = TrainConfig.for_algorithm(args.algo, per=args.per, use_case=args.use_case,
                                    total_timesteps=args.timesteps, seed=args.seed,
                                    lam=args.lam)
    penalty = load_penalty_table() if args.use_case == "lupus" else None
    checkpoints = train(parts.train, parts.validation, cfg, penalty_table=penalty)
    run_dir = Path(args.out) / f"run_{args.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    for ckpt in checkpoints:
        save_policy(run_dir / f"ckpt_{ckpt.timestep}.policy", ckpt.artifact)
    best = select_checkpoint(checkpoints, args.select if args.use_case == "lupus" else "accuracy")
    save_policy(run_dir / "selected.policy", best.artifact)
    episodes = evaluate_policy(best.artifact, parts.test,
                               config=EnvConfig(use_case=args.use_case, lam=args.lam,
                                                penalty_table=penalty))
    report = build_report(episodes, dataset.schema, penalty_table=penalty,
                          metadata={"selected_timestep": best.timestep, "seed": args.seed})
    (run_dir / "metrics.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    _write_pathways(run_dir / "pathways.json", episodes, dataset.schema)
    print(f"accuracy {100 * report.accuracy:.2f}, mean episode length "
          f"{report.mean_episode_length:.2f}; artifacts in {run_dir}")


def _write_pathways(path, episodes, schema):
    doc = {
        "schema": "pathway-set/1",
        "pathways": [
            {"steps": list(p.steps), "diagnosis": p.diagnosis,
             "values": [None if np.isnan(v) else v for v in p.values],
             "truncated": p.truncated}
            for p in extract(episodes, schema)
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a policy artifact on a dataset")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--lambda", dest="lam", type=float, default=9.0)
    p.add_argument("--out", help="metrics JSON output path")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args):
    artifact = load_policy(args.artifact)
    schema = load_schema(artifact.use_case)
    dataset = read_csv(args.data, schema)
    penalty = load_penalty_table() if artifact.use_case == "lupus" else None
    episodes = evaluate_policy(artifact, dataset,
                               config=EnvConfig(use_case=artifact.use_case, lam=args.lam,
                                                penalty_table=penalty))
    report = build_report(episodes, schema, penalty_table=penalty)
    doc = json.dumps(report.to_dict(), indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(doc)
        _write_pathways(Path(args.out).with_name("pathways.json"), episodes, schema)
    print(doc)


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run an experiment plan")
    p.add_argument("--plan", required=True, help="plan JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)


def cmd_sweep(args):
    plan = ExperimentPlan.from_json(args.plan)
    run_plan(plan, args.out, workers=args.workers)
    print(f"plan complete; results in {args.out}")


def _add_paths(sub):
    p = sub.add_parser("paths", help="aggregate episode pathways into a Sankey graph")
    p.add_argument("--in", dest="in_dir", required=True,
                   help="run directory containing pathways.json (searched recursively)")
    p.add_argument("--classes", help="comma-separated diagnosis classes to keep")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_paths)


def cmd_paths(args):
    root = Path(args.in_dir)
    files = sorted(root.rglob("pathways.json")) if root.is_dir() else [root]
    if not files:
        raise ConfigError(f"no pathways.json under {root}")
    pathways = []
    for path in files:
        doc = json.loads(path.read_text())
        pathways += [
            Pathway(steps=tuple(p["steps"]), diagnosis=p["diagnosis"],
                    values=tuple(float("nan") if v is None else v for v in p["values"]),
                    truncated=p.get("truncated", False))
            for p in doc["pathways"]
        ]
    classes = args.classes.split(",") if args.classes else None
    graph = aggregate(pathways, classes=classes, top_k=args.top_k)
    Path(args.out).write_text(export_sankey_json(graph))
    print(f"wrote {args.out} ({len(graph.nodes)} nodes, {len(graph.links)} links)")


def _add_serve(sub):
    p = sub.add_parser("serve", help="HTTP session service over policy artifacts")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--graphs", help="directory of <policy>.pathways.json files")
    p.add_argument("--ui-dir", help="static frontend directory to mount at /")
    p.set_defaults(func=cmd_serve)


def cmd_serve(args):
    import uvicorn

    from .serve import create_app

    app = create_app(args.artifacts, graphs_dir=args.graphs, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)


def _add_report(sub):
    p = sub.add_parser("report", help="aggregate a results directory into tables")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", help="output directory (default: in place)")
    p.set_defaults(func=cmd_report)


def cmd_report(args):
    path = harness_report(args.in_dir, args.out)
    print(f"wrote {path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pathrl")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_synth, _add_train, _add_eval, _add_sweep, _add_paths,
                _add_serve, _add_report):
        add(sub)
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
