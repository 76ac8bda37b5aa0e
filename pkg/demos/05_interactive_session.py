"""Drive the session service in-process: the policy suggests, you answer.

Uses the tree policy artifact so the suggestions follow the labeling
guideline exactly. For the browser UI, see frontend/ and
`pathrl serve --artifacts <dir> --ui-dir frontend/dist`.

Run:  python3 demos/05_interactive_session.py
"""
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from pathrl.dtree import load_tree
from pathrl.qnet import save_policy, tree_artifact
from pathrl.schema import load_schema
from pathrl.serve import create_app

schema = load_schema("anemia")
store = Path(tempfile.mkdtemp())
save_policy(store / "anemia-tree.policy",
            tree_artifact(load_tree("anemia", schema=schema).raw, schema))

client = TestClient(create_app(store))
print("policies:", [p["id"] for p in client.get("/policies").json()])

answers = {"hemoglobin": 9.1, "gender": 0.0, "mcv": 88.0, "reticulocyte_count": 4.2}
doc = client.post("/sessions", json={"policy_id": "anemia-tree"}).json()
while doc["status"] == "active" and doc["suggestion"]:
    label = doc["suggestion"]["label"]
    value = answers.get(label, "missing")
    print(f"suggested test: {label:<20} entering: {value}")
    doc = client.post(f"/sessions/{doc['session_id']}/observe",
                      json={"value": value}).json()

print("\nstatus:", doc["status"])
print("diagnosis:", doc["diagnosis"])
print("pathway:", " -> ".join(h["label"] for h in doc["history"]))
