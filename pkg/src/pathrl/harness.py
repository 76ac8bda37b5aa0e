"""Experiment orchestration: plans, cells, sweeps, and aggregate tables.

A plan expands into cells (algorithm x seed x degradation x lambda x train
fraction). Every cell rebuilds its data deterministically from the plan seeds,
degrades only its training split, trains, selects a checkpoint on validation,
and evaluates on the one clean test split shared by the whole plan. Cell
results land in their own directory as metrics.json plus checkpoint artifacts;
`report` folds them into mean +/- sd tables and sweep CSVs.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (fit_ffnn_classifier, fit_tree_classifier, knn_impute,
                        run_random_agent, run_tree_agent)
from .drl import TrainConfig, evaluate_policy, select_checkpoint, train
from .env import EnvConfig
from .errors import ConfigError
from .metrics import EpisodeRecord, build_report, classification_report, macro_f1
from .pathways import extract
from .qnet import save_policy
from .schema import Dataset, load_schema
from .synth import (DegradationSpec, degrade, load_criteria, load_penalty_table,
                    make_anemia_dataset, make_lupus_dataset, split)

DQN_MODELS = ("dqn", "ddqn", "dueling", "dueling-ddqn",
              "dqn-per", "ddqn-per", "dueling-per", "dueling-ddqn-per")
CLASSIFIER_MODELS = ("decision-tree", "ffnn")
AGENT_MODELS = ("random", "tree-agent")


@dataclass
class ExperimentPlan:
    use_case: str
    models: list[str]
    seeds: list[int]
    timesteps: int = 300_000
    n_records: int = 10_000
    data_seed: int = 7
    split_seed: int = 11
    missingness_levels: list[float] = field(default_factory=list)
    noise_levels: list[float] = field(default_factory=list)
    combined_missingness_levels: list[float] = field(default_factory=list)
    combined_noise_level: float = 0.2
    lambdas: list[float] = field(default_factory=lambda: [9.0])
    train_fractions: list[float] = field(default_factory=lambda: [1.0])
    select: str = "accuracy"
    impute_lupus_missing: bool = True

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("plan seeds must be distinct")
        for level in (self.missingness_levels + self.noise_levels
                      + self.combined_missingness_levels):
            if not 0.0 <= level <= 1.0:
                raise ConfigError("degradation levels must lie in [0, 1]")
        if self.n_records <= 0 or self.timesteps < 0:
            raise ConfigError("plan scale must be positive")
        for model in self.models:
            if model not in DQN_MODELS + CLASSIFIER_MODELS + AGENT_MODELS:
                raise ConfigError(f"unknown model {model!r}")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentPlan":
        return cls(**json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Cell:
    model: str
    seed: int
    lam: float = 9.0
    missingness: float = 0.0
    noise: float = 0.0
    train_fraction: float = 1.0

    def name(self) -> str:
        return (f"{self.model}_lam{self.lam:g}_miss{self.missingness:g}"
                f"_noise{self.noise:g}_frac{self.train_fraction:g}")


def expand_cells(plan: ExperimentPlan) -> list[Cell]:
    cells = []
    degradations = [(0.0, 0.0)]
    degradations += [(m, 0.0) for m in plan.missingness_levels if m > 0]
    degradations += [(0.0, n) for n in plan.noise_levels if n > 0]
    degradations += [(m, plan.combined_noise_level)
                     for m in plan.combined_missingness_levels]
    for model in plan.models:
        lams = plan.lambdas if (plan.use_case == "lupus" and model in DQN_MODELS) else [9.0]
        for lam in lams:
            for miss, noise in degradations:
                for frac in plan.train_fractions:
                    for seed in plan.seeds:
                        cells.append(Cell(model=model, seed=seed, lam=lam,
                                          missingness=miss, noise=noise,
                                          train_fraction=frac))
    return cells


def base_dataset(plan: ExperimentPlan) -> Dataset:
    if plan.use_case == "anemia":
        return make_anemia_dataset(max(1, round(plan.n_records / 7)), seed=plan.data_seed)
    n_pos = round(plan.n_records * 5 / 7)
    return make_lupus_dataset(n_pos, plan.n_records - n_pos, seed=plan.data_seed)


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.x).tobytes())
    h.update(np.ascontiguousarray(ds.y).tobytes())
    return h.hexdigest()[:16]


def prepare_train_split(plan: ExperimentPlan, cell: Cell, train_set: Dataset) -> Dataset:
    """Apply the cell's train-fraction subsampling and degradations."""
    out = train_set
    if cell.train_fraction < 1.0:
        rng = np.random.default_rng(cell.seed * 7919 + 13)
        keep = max(1, int(round(cell.train_fraction * len(out))))
        idx = rng.permutation(len(out))[:keep]
        out = out.subset(idx)
    if cell.noise > 0:
        kind = "anemia-noise" if plan.use_case == "anemia" else "lupus-label-noise"
        out = degrade(out, DegradationSpec(kind=kind, level=cell.noise,
                                           seed=cell.seed * 31 + 1))
    if cell.missingness > 0:
        out = degrade(out, DegradationSpec(kind="missingness", level=cell.missingness,
                                           seed=cell.seed * 31 + 2))
        if plan.use_case == "lupus" and plan.impute_lupus_missing:
            out, _ = knn_impute(out, out)
    return out


def _algo_flags(model: str) -> tuple[str, bool]:
    per = model.endswith("-per")
    return (model[:-4] if per else model), per


DT_DEPTH_GRID = (8, 12, 16, None)
FFNN_GRID = ((64,), (64, 64), (128,), (128, 128))


def _grid_fit_tree(train_set: Dataset, validation: Dataset):
    best, best_acc = None, -1.0
    for depth in DT_DEPTH_GRID:
        clf = fit_tree_classifier(train_set, max_depth=depth)
        acc = float((clf.predict(validation.x) == validation.y).mean())
        if acc > best_acc:
            best, best_acc = clf, acc
    return best


def _grid_fit_ffnn(train_set: Dataset, validation: Dataset, seed: int):
    best, best_acc = None, -1.0
    for hidden in FFNN_GRID:
        clf = fit_ffnn_classifier(train_set, hidden=hidden, seed=seed)
        acc = float((clf.predict(validation.x) == validation.y).mean())
        if acc > best_acc:
            best, best_acc = clf, acc
    return best


def _classifier_episodes(proba: np.ndarray, y: np.ndarray) -> list[EpisodeRecord]:
    """Adapter so whole-vector classifiers flow through the same report code.

    Classifier 'episodes' have an empty pathway (a bare diagnostic decision);
    episode length and pathway scores are not meaningful for them.
    """
    episodes = []
    for i in range(len(y)):
        pred = int(np.argmax(proba[i]))
        episodes.append(EpisodeRecord(actions=[], true_class=int(y[i]),
                                      diagnosis=pred, diag_scores=proba[i]))
    return episodes


def run_cell(plan: ExperimentPlan, cell: Cell, out_dir: str | Path) -> dict:
    """Run one cell end to end and persist its artifacts; returns the metrics."""
    schema = load_schema(plan.use_case)
    data = base_dataset(plan)
    parts = split(data, seed=plan.split_seed)
    test_hash = dataset_hash(parts.test)
    train_set = prepare_train_split(plan, cell, parts.train)
    penalty = load_penalty_table() if plan.use_case == "lupus" else None

    run_dir = Path(out_dir) / cell.name() / f"run_{cell.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    if cell.model in DQN_MODELS:
        algo, per = _algo_flags(cell.model)
        cfg = TrainConfig.for_algorithm(
            algo, per=per, use_case=plan.use_case, total_timesteps=plan.timesteps,
            seed=cell.seed, lam=cell.lam)
        checkpoints = train(train_set, parts.validation, cfg, penalty_table=penalty)
        for ckpt in checkpoints:
            save_policy(run_dir / f"ckpt_{ckpt.timestep}.policy", ckpt.artifact)
        strategy = plan.select if plan.use_case == "lupus" else "accuracy"
        best = select_checkpoint(checkpoints, strategy)
        save_policy(run_dir / "selected.policy", best.artifact)
        episodes = evaluate_policy(
            best.artifact, parts.test,
            config=EnvConfig(use_case=plan.use_case, lam=cell.lam, penalty_table=penalty))
        report = build_report(episodes, schema, penalty_table=penalty,
                              metadata={"selected_timestep": best.timestep,
                                        "selection": strategy})
    elif cell.model in AGENT_MODELS:
        config = EnvConfig(use_case=plan.use_case, lam=cell.lam, penalty_table=penalty)
        if cell.model == "random":
            episodes = run_random_agent(parts.test, seed=cell.seed, config=config)
        else:
            episodes = run_tree_agent(parts.test, config=config)
        report = build_report(episodes, schema, penalty_table=penalty)
    else:
        if cell.model == "decision-tree":
            clf = _grid_fit_tree(train_set, parts.validation)
        else:
            clf = _grid_fit_ffnn(train_set, parts.validation, cell.seed)
        proba = clf.predict_proba(parts.test.x)
        episodes = _classifier_episodes(proba, parts.test.y)
        report = build_report(episodes, schema, penalty_table=penalty)
        report.mean_episode_length = float("nan")
        report.aps = None
        report.wpahm = None

    doc = report.to_dict()
    doc["metadata"].update({
        "model": cell.model,
        "seed": cell.seed,
        "lambda": cell.lam,
        "missingness": cell.missingness,
        "noise": cell.noise,
        "train_fraction": cell.train_fraction,
        "use_case": plan.use_case,
        "test_hash": test_hash,
        "n_train": len(train_set),
        "wall_seconds": round(time.time() - started, 3),
    })
    (run_dir / "metrics.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    pathway_set = {
        "schema": "pathway-set/1",
        "pathways": [
            {"steps": list(p.steps), "diagnosis": p.diagnosis,
             "values": [None if np.isnan(v) else v for v in p.values],
             "truncated": p.truncated}
            for p in extract(episodes, schema)
        ],
    }
    (run_dir / "pathways.json").write_text(json.dumps(pathway_set, sort_keys=True))
    return doc


def _run_cell_entry(args):
    plan_dict, cell, out_dir = args
    plan = ExperimentPlan(**plan_dict)
    try:
        return cell, run_cell(plan, cell, out_dir), None
    except Exception:
        return cell, None, traceback.format_exc()


def run_plan(plan: ExperimentPlan, out_dir: str | Path, workers: int | None = None) -> Path:
    """Execute every cell; failures are recorded per cell and do not stop the plan."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(plan)
    if workers is None:
        workers = int(os.environ.get("PATHRL_WORKERS", "1"))
    failures = {}
    if workers > 1:
        jobs = [(asdict(plan), cell, str(out_dir)) for cell in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell, _, err in pool.map(_run_cell_entry, jobs):
                if err:
                    failures[cell.name() + f"/run_{cell.seed}"] = err
    else:
        for cell in cells:
            try:
                run_cell(plan, cell, out_dir)
            except Exception:
                failures[cell.name() + f"/run_{cell.seed}"] = traceback.format_exc()
    (out_dir / "plan.json").write_text(json.dumps(asdict(plan), indent=1, sort_keys=True))
    if failures:
        (out_dir / "failures.json").write_text(json.dumps(failures, indent=1, sort_keys=True))
    report(out_dir)
    return out_dir


def collect_metrics(results_dir: str | Path) -> list[dict]:
    docs = []
    for path in sorted(Path(results_dir).glob("*/run_*/metrics.json")):
        docs.append(json.loads(path.read_text()))
    return docs


def report(results_dir: str | Path, out_dir: str | Path | None = None) -> Path:
    """Aggregate per-cell metrics into mean +/- sd tables and sweep CSVs."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir
    docs = collect_metrics(results_dir)
    if not docs:
        raise ConfigError(f"no metrics.json files under {results_dir}")

    test_hashes = {d["metadata"]["test_hash"] for d in docs}
    groups: dict[tuple, list[dict]] = {}
    for d in docs:
        md = d["metadata"]
        key = (md["model"], md["lambda"], md["missingness"], md["noise"],
               md["train_fraction"])
        groups.setdefault(key, []).append(d)

    def fmt(values):
        arr = np.array([v for v in values if v is not None], dtype=float)
        if len(arr) == 0 or np.all(np.isnan(arr)):
            return "n/a"
        return f"{100 * np.nanmean(arr):.2f} +/- {100 * np.nanstd(arr):.2f}"

    lines = ["| model | lambda | missing | noise | frac | n | accuracy | mean ep len | macro F1 | APS | wPAHM |",
             "|---|---|---|---|---|---|---|---|---|---|---|"]
    csv_rows = ["model,lambda,missingness,noise,train_fraction,n,accuracy_mean,accuracy_sd,"
                "mel_mean,mel_sd,wpahm_mean,wpahm_sd"]
    for key in sorted(groups):
        rows = groups[key]
        model, lam, miss, noise, frac = key
        acc = np.array([r["accuracy"] for r in rows], dtype=float)
        mel = np.array([r["mean_episode_length"] for r in rows], dtype=float)
        wp = np.array([r["wpahm"] if r["wpahm"] is not None else np.nan for r in rows],
                      dtype=float)
        mel_s = "n/a" if np.all(np.isnan(mel)) else f"{np.nanmean(mel):.2f} +/- {np.nanstd(mel):.2f}"
        lines.append(
            f"| {model} | {lam:g} | {miss:g} | {noise:g} | {frac:g} | {len(rows)} "
            f"| {fmt(acc)} | {mel_s} | {fmt([r['macro_f1'] for r in rows])} "
            f"| {fmt([r['aps'] for r in rows])} | {fmt([r['wpahm'] for r in rows])} |")
        csv_rows.append(
            f"{model},{lam:g},{miss:g},{noise:g},{frac:g},{len(rows)},"
            f"{np.nanmean(acc):.6f},{np.nanstd(acc):.6f},"
            f"{np.nanmean(mel) if not np.all(np.isnan(mel)) else float('nan'):.6f},"
            f"{np.nanstd(mel) if not np.all(np.isnan(mel)) else float('nan'):.6f},"
            f"{np.nanmean(wp):.6f},{np.nanstd(wp):.6f}")

    header = [f"# Results ({len(docs)} runs)", ""]
    if len(test_hashes) > 1:
        header.append(f"WARNING: runs evaluated on different test splits: {sorted(test_hashes)}")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.md").write_text("\n".join(header + lines) + "\n")
    (out_dir / "summary.csv").write_text("\n".join(csv_rows) + "\n")
    return out_dir / "summary.md"
