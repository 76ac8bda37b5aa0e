"""Pathway extraction and Sankey-ready aggregation.

Episodes become ordered label sequences ending in a diagnosis. Aggregation
merges them into a layered graph: the same action at two different depths is
two distinct nodes, links carry traversal support and a per-class breakdown,
and feature nodes keep summary statistics of the values observed at that step.
The export is canonical JSON (stable ordering), so export -> parse -> export
is byte-identical.
"""
from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .metrics import EpisodeRecord
from .schema import UseCaseSchema

SCHEMA_VERSION = "pathway-graph/1"


@dataclass(frozen=True)
class Pathway:
    steps: tuple[str, ...]          # feature labels then terminal diagnosis label
    diagnosis: str | None
    values: tuple[float, ...]       # observed value per step (nan for the diagnosis)
    truncated: bool = False


@dataclass
class PathwayNode:
    id: str
    kind: str        # feature | diagnosis
    depth: int
    label: str
    count: int = 0
    stats: dict | None = None


@dataclass
class PathwayLink:
    source: str
    target: str
    support: int = 0
    classes: dict = field(default_factory=dict)


@dataclass
class PathwayGraph:
    nodes: list[PathwayNode]
    links: list[PathwayLink]
    n_episodes: int


def extract(episodes: list[EpisodeRecord], schema: UseCaseSchema) -> list[Pathway]:
    """Ordered action labels per episode, terminal diagnosis last.

    Truncated and repeat-terminated episodes carry no diagnosis; they are
    flagged and skipped by class-conditional aggregation.
    """
    m = schema.n_features
    out = []
    for e in episodes:
        labels = []
        values = []
        for a, v in zip(e.actions, e.values or [math.nan] * len(e.actions)):
            labels.append(schema.feature_names[a] if a < m else schema.classes[a - m])
            values.append(v)
        diagnosis = schema.classes[e.diagnosis] if e.diagnosis is not None else None
        out.append(Pathway(steps=tuple(labels), diagnosis=diagnosis,
                           values=tuple(values), truncated=diagnosis is None))
    return out


def aggregate(pathways: list[Pathway], classes: list[str] | None = None,
              top_k: int | None = None) -> PathwayGraph:
    """Prefix-merge pathways into a depth-layered graph.

    Optionally keep only the given diagnosis classes and the top_k most
    frequent distinct pathways (ties broken lexicographically for
    determinism).
    """
    usable = [p for p in pathways if not p.truncated]
    if classes is not None:
        usable = [p for p in usable if p.diagnosis in classes]
    if top_k is not None:
        if top_k == 0:
            usable = []
        else:
            freq = Counter(p.steps for p in usable)
            keep = {steps for steps, _ in
                    sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]}
            usable = [p for p in usable if p.steps in keep]

    node_count: Counter = Counter()
    node_kind: dict[tuple[int, str], str] = {}
    node_values: defaultdict = defaultdict(list)
    link_support: Counter = Counter()
    link_classes: defaultdict = defaultdict(Counter)
    for p in usable:
        prev = None
        for depth, (label, value) in enumerate(zip(p.steps, p.values)):
            key = (depth, label)
            node_count[key] += 1
            is_diagnosis = depth == len(p.steps) - 1
            node_kind[key] = "diagnosis" if is_diagnosis else "feature"
            if not is_diagnosis and not math.isnan(value):
                node_values[key].append(value)
            if prev is not None:
                link_support[(prev, key)] += 1
                link_classes[(prev, key)][p.diagnosis] += 1
            prev = key

    def node_id(key: tuple[int, str]) -> str:
        return f"d{key[0]}:{key[1]}"

    nodes = []
    for key in sorted(node_count, key=lambda k: (k[0], -node_count[k], k[1])):
        values = node_values.get(key)
        stats = None
        if node_kind[key] == "feature":
            if values:
                arr = np.asarray(values)
                stats = {"count": node_count[key], "mean": float(arr.mean()),
                         "min": float(arr.min()), "max": float(arr.max())}
            else:
                stats = {"count": node_count[key], "mean": None, "min": None, "max": None}
        nodes.append(PathwayNode(id=node_id(key), kind=node_kind[key], depth=key[0],
                                 label=key[1], count=node_count[key], stats=stats))
    index = {n.id: i for i, n in enumerate(nodes)}
    links = []
    for (src, dst), support in link_support.items():
        links.append(PathwayLink(
            source=node_id(src), target=node_id(dst), support=support,
            classes={c: int(n) for c, n in sorted(link_classes[(src, dst)].items())},
        ))
    links.sort(key=lambda l: (index[l.source], index[l.target]))
    return PathwayGraph(nodes=nodes, links=links, n_episodes=len(usable))


def export_sankey_json(graph: PathwayGraph) -> str:
    """Canonical JSON document with `nodes` and `links` arrays."""
    index = {n.id: i for i, n in enumerate(graph.nodes)}
    doc = {
        "schema": SCHEMA_VERSION,
        "n_episodes": graph.n_episodes,
        "nodes": [
            {"id": n.id, "kind": n.kind, "depth": n.depth, "label": n.label,
             "count": n.count, "stats": n.stats}
            for n in graph.nodes
        ],
        "links": [
            {"source": index[l.source], "target": index[l.target],
             "value": l.support, "classes": l.classes}
            for l in graph.links
        ],
        "stats": {n.id: n.stats for n in graph.nodes if n.stats is not None},
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def parse_sankey_json(text: str) -> PathwayGraph:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported pathway graph schema {doc.get('schema')!r}")
    nodes = [
        PathwayNode(id=n["id"], kind=n["kind"], depth=n["depth"], label=n["label"],
                    count=n["count"], stats=n["stats"])
        for n in doc["nodes"]
    ]
    links = [
        PathwayLink(source=nodes[l["source"]].id, target=nodes[l["target"]].id,
                    support=l["value"], classes=l["classes"])
        for l in doc["links"]
    ]
    return PathwayGraph(nodes=nodes, links=links, n_episodes=doc["n_episodes"])


def flow_conservation_violations(graph: PathwayGraph) -> list[str]:
    """Internal nodes where inbound support differs from outbound support."""
    inbound: Counter = Counter()
    outbound: Counter = Counter()
    for l in graph.links:
        inbound[l.target] += l.support
        outbound[l.source] += l.support
    bad = []
    for n in graph.nodes:
        if n.kind == "diagnosis":
            continue
        incoming = inbound[n.id] if n.depth > 0 else n.count
        if incoming != outbound[n.id] or outbound[n.id] != n.count:
            bad.append(n.id)
    return bad
