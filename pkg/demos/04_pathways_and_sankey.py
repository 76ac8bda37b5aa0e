"""Aggregate evaluated episodes into a Sankey-ready pathway graph.

Uses the tree-replaying agent so the demo needs no training first.

Run:  python3 demos/04_pathways_and_sankey.py
"""
import json

from pathrl.baselines import run_tree_agent
from pathrl.pathways import aggregate, export_sankey_json, extract
from pathrl.schema import load_schema
from pathrl.synth import make_anemia_dataset, split

schema = load_schema("anemia")
parts = split(make_anemia_dataset(10_000, seed=7), seed=11)
episodes = run_tree_agent(parts.test)
pathways = extract(episodes, schema)

graph = aggregate(pathways, classes=["Hemolytic anemia", "Aplastic anemia"], top_k=3)
print(f"{graph.n_episodes} episodes in the 3 commonest pathways of two classes")
for node in graph.nodes:
    stats = ""
    if node.stats and node.stats["mean"] is not None:
        stats = (f"  values mean {node.stats['mean']:.1f} "
                 f"range [{node.stats['min']:.1f}, {node.stats['max']:.1f}]")
    print(f"  depth {node.depth} {node.label:<22} support {node.count}{stats}")
for link in graph.links:
    print(f"  {link.source} -> {link.target}  x{link.support}")

doc = export_sankey_json(graph)
with open("pathway_graph.json", "w") as fh:
    fh.write(doc)
print("\nwrote pathway_graph.json "
      f"({len(json.loads(doc)['nodes'])} nodes, {len(json.loads(doc)['links'])} links)")
