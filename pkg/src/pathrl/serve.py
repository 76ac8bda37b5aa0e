"""Session service: interactive diagnosis stepping over a trained policy.

Each session owns one environment whose record starts fully unknown; the
human supplies each queried value (or "missing") and the policy's greedy
action drives the next suggestion. The stepping code path is the same
environment used for offline evaluation, so replaying a dataset record's
values through the API reproduces the offline episode exactly.
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .baselines import TreeAgent
from .drl import _softmax
from .env import DiagnosisEnv, EnvConfig
from .pathways import Pathway, aggregate, export_sankey_json
from .qnet import PolicyArtifact, input_scaling_from_schema, load_policy
from .schema import UseCaseSchema, load_schema

API_SCHEMA = "serve/1"
DEFAULT_SESSION_TTL = 1800.0


@dataclass
class Session:
    id: str
    policy_id: str
    env: DiagnosisEnv
    status: str = "active"  # active | diagnosed | aborted
    history: list[dict] = field(default_factory=list)
    suggestion: int | None = None
    diagnosis: int | None = None
    q_scores: list[float] | None = None
    last_access: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


class _Policy:
    def __init__(self, policy_id: str, artifact: PolicyArtifact):
        self.id = policy_id
        self.artifact = artifact
        self.schema = load_schema(artifact.use_case)
        if artifact.meta.get("features") != self.schema.feature_names:
            raise ValueError(f"policy {policy_id}: feature schema mismatch")
        self.tree_agent = None
        if artifact.kind == "tree":
            self.tree_agent = TreeAgent.from_raw(self.schema, artifact.tree_raw)
        lo, scale = input_scaling_from_schema(self.schema)
        self.value_lo = lo
        self.value_hi = lo + scale

    def greedy(self, env: DiagnosisEnv) -> tuple[int, list[float]]:
        m = self.schema.n_features
        if self.tree_agent is not None:
            action = self.tree_agent.act(env.obs, env.queried)
            scores = [0.0] * self.schema.n_classes
            if action >= m:
                scores[action - m] = 1.0
            return action, scores
        q = self.artifact.network.forward(env.obs[None, :])[0]
        return int(np.argmax(q)), _softmax(q[m:]).tolist()


class ObserveBody(BaseModel):
    value: float | str


class SessionBody(BaseModel):
    policy_id: str


def create_app(artifact_dir: str | Path, graphs_dir: str | Path | None = None,
               ui_dir: str | Path | None = None,
               session_ttl: float = DEFAULT_SESSION_TTL) -> FastAPI:
    app = FastAPI(title="pathrl serve")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        # distinguish malformed requests (400) from out-of-range values (422,
        # raised explicitly by the handlers)
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    artifact_dir = Path(artifact_dir)
    graphs_dir = Path(graphs_dir) if graphs_dir else artifact_dir
    policies: dict[str, _Policy] = {}
    for path in sorted(artifact_dir.glob("*.policy")):
        policies[path.stem] = _Policy(path.stem, load_policy(path))
    sessions: dict[str, Session] = {}

    def get_policy(policy_id: str) -> _Policy:
        policy = policies.get(policy_id)
        if policy is None:
            raise HTTPException(status_code=404, detail=f"unknown policy {policy_id!r}")
        return policy

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if time.time() - session.last_access > session_ttl:
            del sessions[session_id]
            raise HTTPException(status_code=410, detail="session expired")
        session.last_access = time.time()
        return session

    def advance(session: Session, policy: _Policy) -> None:
        """Step through greedy actions until a value is needed or the episode ends."""
        schema = policy.schema
        m = schema.n_features
        while True:
            action, scores = policy.greedy(session.env)
            if action < m and action not in session.env.queried:
                session.suggestion = action
                session.q_scores = scores
                return
            outcome = session.env.step(action)
            session.history.append({"action": action,
                                    "label": _action_label(schema, action),
                                    "entered": None})
            session.q_scores = scores
            session.suggestion = None
            if outcome.diagnosis is not None:
                session.status = "diagnosed"
                session.diagnosis = outcome.diagnosis
                return
            if outcome.terminal:
                session.status = "aborted"
                return

    def session_doc(session: Session, policy: _Policy) -> dict:
        schema = policy.schema
        doc = {
            "schema": API_SCHEMA,
            "session_id": session.id,
            "policy_id": session.policy_id,
            "status": session.status,
            "history": [dict(h) for h in session.history],
            "q_scores": session.q_scores,
            "classes": schema.classes,
        }
        if session.suggestion is not None:
            doc["suggestion"] = {
                "action": session.suggestion,
                "kind": "feature",
                "label": schema.feature_names[session.suggestion],
            }
        else:
            doc["suggestion"] = None
        doc["diagnosis"] = (schema.classes[session.diagnosis]
                            if session.diagnosis is not None else None)
        return doc

    @app.get("/policies")
    def list_policies():
        return JSONResponse([
            {
                "schema": API_SCHEMA,
                "id": p.id,
                "kind": p.artifact.kind,
                "use_case": p.artifact.use_case,
                "features": p.schema.feature_names,
                "classes": p.schema.classes,
                "training": p.artifact.meta.get("training", {}),
            }
            for p in policies.values()
        ])

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionBody):
        policy = get_policy(body.policy_id)
        training = policy.artifact.meta.get("training", {})
        env = DiagnosisEnv(policy.schema, EnvConfig(
            use_case=policy.schema.use_case,
            lam=training.get("lam", 9.0),
            max_steps=training.get("max_steps")))
        env.reset(np.full(policy.schema.n_features, np.nan), label=None)
        session = Session(id=uuid.uuid4().hex, policy_id=policy.id, env=env)
        sessions[session.id] = session
        advance(session, policy)
        return session_doc(session, policy)

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, body: ObserveBody):
        session = get_session(session_id)
        policy = get_policy(session.policy_id)
        with session.lock:
            if session.status != "active" or session.suggestion is None:
                raise HTTPException(status_code=409, detail=f"session is {session.status}")
            j = session.suggestion
            if isinstance(body.value, str):
                if body.value != "missing":
                    raise HTTPException(status_code=422, detail="value must be a number or 'missing'")
                value = None
            else:
                value = float(body.value)
                if not policy.value_lo[j] <= value <= policy.value_hi[j]:
                    raise HTTPException(
                        status_code=422,
                        detail=f"value {value} outside declared range "
                               f"[{policy.value_lo[j]}, {policy.value_hi[j]}]")
            session.env.set_value(j, value)
            outcome = session.env.step(j)
            session.history.append({
                "action": j,
                "label": policy.schema.feature_names[j],
                "entered": "missing" if value is None else value,
            })
            session.suggestion = None
            if outcome.terminal:  # step cap
                session.status = "aborted"
            else:
                advance(session, policy)
            return session_doc(session, policy)

    @app.get("/sessions/{session_id}")
    def show_session(session_id: str):
        session = get_session(session_id)
        return session_doc(session, get_policy(session.policy_id))

    @app.get("/pathways/{policy_id}")
    def pathway_graph(policy_id: str, classes: str | None = None, top_k: int | None = None):
        get_policy(policy_id)
        path = graphs_dir / f"{policy_id}.pathways.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no pathway set for {policy_id!r}")
        doc = json.loads(path.read_text())
        pathways = [
            Pathway(steps=tuple(p["steps"]), diagnosis=p["diagnosis"],
                    values=tuple(float("nan") if v is None else v for v in p["values"]),
                    truncated=p.get("truncated", False))
            for p in doc["pathways"]
        ]
        wanted = classes.split(",") if classes else None
        graph = aggregate(pathways, classes=wanted, top_k=top_k)
        return JSONResponse(content=json.loads(export_sankey_json(graph)))

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def _action_label(schema: UseCaseSchema, action: int) -> str:
    m = schema.n_features
    return schema.feature_names[action] if action < m else schema.classes[action - m]
