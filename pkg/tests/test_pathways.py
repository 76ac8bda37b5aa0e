"""Pathway extraction, aggregation, flow conservation, canonical export."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrl.metrics import EpisodeRecord
from pathrl.pathways import (Pathway, aggregate, export_sankey_json,
                             flow_conservation_violations, parse_sankey_json)
from pathrl.pathways import extract
from pathrl.schema import load_schema

ANEMIA = load_schema("anemia")


def pw(steps, diagnosis, values=None):
    values = values if values is not None else tuple(float(i) for i in range(len(steps)))
    return Pathway(steps=tuple(steps), diagnosis=diagnosis, values=tuple(values))


def test_extract_orders_actions_and_flags_truncation():
    e1 = EpisodeRecord(actions=[0, 5, 17], true_class=0, diagnosis=0,
                       values=[13.5, 90.0, math.nan])
    e2 = EpisodeRecord(actions=[0, 1], true_class=1, truncated=True,
                       values=[13.5, 220.0])
    p1, p2 = extract([e1, e2], ANEMIA)
    assert p1.steps == ("hemoglobin", "mcv", "No anemia")
    assert p1.diagnosis == "No anemia" and not p1.truncated
    assert p2.truncated and p2.diagnosis is None
    assert len(p1.steps) == 3


def test_extract_multiset_keeps_duplicates():
    e = EpisodeRecord(actions=[0, 17], true_class=0, diagnosis=0, values=[1.0, math.nan])
    assert len(extract([e, e], ANEMIA)) == 2


def test_prefix_merge_example():
    # two pathways share the prefix [A, B] and then diverge
    paths = [pw(["A", "B", "dx1"], "dx1"), pw(["A", "B", "dx2"], "dx2")]
    graph = aggregate(paths)
    by_id = {n.id: n for n in graph.nodes}
    assert by_id["d0:A"].count == 2
    links = {(l.source, l.target): l.support for l in graph.links}
    assert links[("d0:A", "d1:B")] == 2
    assert links[("d1:B", "d2:dx1")] == 1
    assert links[("d1:B", "d2:dx2")] == 1
    assert flow_conservation_violations(graph) == []


def test_same_action_at_different_depths_is_distinct():
    graph = aggregate([pw(["A", "B", "A", "dx"], "dx")])
    ids = {n.id for n in graph.nodes}
    assert "d0:A" in ids and "d2:A" in ids


def test_top_k_filter():
    paths = [pw(["A", "dx"], "dx")] * 3 + [pw(["B", "dx"], "dx")]
    graph = aggregate(paths, top_k=1)
    assert {n.label for n in graph.nodes if n.depth == 0} == {"A"}
    assert graph.n_episodes == 3
    assert aggregate(paths, top_k=0).nodes == []


def test_class_filter_commutes_with_aggregation():
    rng = np.random.default_rng(5)
    paths = []
    for _ in range(200):
        k = int(rng.integers(1, 4))
        steps = [f"f{int(rng.integers(0, 3))}" for _ in range(k)]
        dx = f"c{int(rng.integers(0, 2))}"
        paths.append(pw(steps + [dx], dx))
    direct = export_sankey_json(aggregate(paths, classes=["c0"]))
    prefiltered = export_sankey_json(aggregate([p for p in paths if p.diagnosis == "c0"]))
    assert direct == prefiltered


def test_terminal_support_sums_to_episode_count():
    rng = np.random.default_rng(6)
    paths = []
    for _ in range(150):
        k = int(rng.integers(1, 5))
        steps = [f"f{int(rng.integers(0, 4))}" for _ in range(k)]
        paths.append(pw(steps + ["dx"], "dx"))
    graph = aggregate(paths)
    terminal_ids = {n.id for n in graph.nodes if n.kind == "diagnosis"}
    inbound = sum(l.support for l in graph.links if l.target in terminal_ids)
    assert inbound == graph.n_episodes == 150


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.lists(st.sampled_from("abcd"), min_size=0, max_size=5),
                          st.sampled_from(["x", "y"])), min_size=1, max_size=60))
def test_flow_conservation_on_random_pathway_sets(raw):
    paths = [pw(list(steps) + [dx], dx) for steps, dx in raw]
    graph = aggregate(paths)
    assert flow_conservation_violations(graph) == []


def test_node_stats_bounds_and_support():
    paths = [
        pw(["hb", "dx"], "dx", values=(12.0, math.nan)),
        pw(["hb", "dx"], "dx", values=(14.0, math.nan)),
        pw(["hb", "dx"], "dx", values=(float("nan"), math.nan)),
    ]
    graph = aggregate(paths)
    node = next(n for n in graph.nodes if n.id == "d0:hb")
    assert node.stats["count"] == 3
    assert node.stats["min"] <= node.stats["mean"] <= node.stats["max"]
    assert node.stats["min"] == 12.0 and node.stats["max"] == 14.0


def test_export_empty_graph():
    doc = json.loads(export_sankey_json(aggregate([])))
    assert doc["nodes"] == [] and doc["links"] == [] and doc["stats"] == {}


def test_export_round_trip_byte_identical():
    rng = np.random.default_rng(7)
    paths = []
    for _ in range(60):
        k = int(rng.integers(0, 4))
        steps = [f"f{int(rng.integers(0, 5))}" for _ in range(k)]
        dx = f"c{int(rng.integers(0, 3))}"
        paths.append(pw(steps + [dx], dx, values=tuple(rng.random(k + 1))))
    text = export_sankey_json(aggregate(paths))
    assert export_sankey_json(parse_sankey_json(text)) == text
    doc = json.loads(text)
    assert doc["schema"] == "pathway-graph/1"
    for link in doc["links"]:
        assert isinstance(link["source"], int) and isinstance(link["target"], int)
