"""Dense Q-network with manual backpropagation, plus the policy artifact format.

The network is a small fully connected stack with rectifier hidden layers and
either a plain action-value head or a dueling head that splits the final layer
into a state value and mean-centered advantages:

    Q(s, a) = V(s) + A(s, a) - mean_a A(s, a)

An optional fixed affine input map rescales raw feature ranges to unit scale
for conditioning; it is part of the network and travels with the artifact, so
observation semantics are untouched.

Artifacts are single files: an 8-byte magic, a little-endian uint32 header
length, a JSON header (architecture, feature schema, use case, training
provenance, payload layout), then the raw little-endian float64 parameter
payload in layout order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaMismatchError
from .schema import UseCaseSchema

MAGIC = b"PATHRL1\n"
ARTIFACT_SCHEMA = "policy-artifact/1"


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


class Network:
    """MLP mapping an observation vector to one value per action."""

    def __init__(self, n_inputs: int, n_actions: int, hidden: tuple[int, ...] = (64, 64),
                 dueling: bool = False, rng: np.random.Generator | None = None,
                 input_shift: np.ndarray | None = None,
                 input_scale: np.ndarray | None = None):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = tuple(hidden)
        self.dueling = dueling
        n_out = n_actions + 1 if dueling else n_actions
        sizes = [n_inputs, *hidden, n_out]
        rng = rng or np.random.default_rng(0)
        # all parameters live in one flat buffer; W/b are views into it, which
        # keeps the optimizer and target-network sync down to a few vector ops
        total = sum(fo * fi + fo for fi, fo in zip(sizes[:-1], sizes[1:]))
        self.theta = np.empty(total)
        self._grad = np.zeros(total)
        self.W: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        offset = 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            w = self.theta[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
            offset += fan_out * fan_in
            b = self.theta[offset:offset + fan_out]
            offset += fan_out
            w[...] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b[...] = rng.uniform(-bound, bound, size=fan_out)
            self.W.append(w)
            self.b.append(b)
        self._grad_views: list[tuple[np.ndarray, np.ndarray]] = []
        offset = 0
        for w in self.W:
            fan_out, fan_in = w.shape
            gw = self._grad[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
            offset += fan_out * fan_in
            gb = self._grad[offset:offset + fan_out]
            offset += fan_out
            self._grad_views.append((gw, gb))
        self.input_shift = np.zeros(n_inputs) if input_shift is None else np.asarray(input_shift, float)
        self.input_scale = np.ones(n_inputs) if input_scale is None else np.asarray(input_scale, float)
        if np.any(self.input_scale == 0):
            raise ConfigError("input scale must be nonzero")

    # -- forward / backward -------------------------------------------------

    def _scale(self, x: np.ndarray) -> np.ndarray:
        # observed values map to unit range; the negative sentinel codes
        # (unqueried / queried-but-missing) pass through unchanged so the
        # network can always tell them from low observed values
        scaled = (x - self.input_shift) / self.input_scale
        return np.where(x < 0.0, x, scaled)

    def forward(self, x: np.ndarray) -> np.ndarray:
        q, _ = self.forward_cache(x, keep=False)
        return q

    def q_row(self, x: np.ndarray) -> np.ndarray:
        """Action values for one observation; the hot path of greedy control."""
        h = self._scale(x)
        last = len(self.W) - 1
        for i in range(last):
            h = self.W[i] @ h
            h += self.b[i]
            np.maximum(h, 0.0, out=h)
        out = self.W[last] @ h
        out += self.b[last]
        if self.dueling:
            adv = out[1:]
            return out[0] + adv - adv.mean()
        return out

    def forward_cache(self, x: np.ndarray, keep: bool = True):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_inputs:
            raise SchemaMismatchError(f"input width {x.shape[1]} != {self.n_inputs}")
        h = self._scale(x)
        pre: list[np.ndarray] = []
        post: list[np.ndarray] = [h]
        for i, (W, b) in enumerate(zip(self.W, self.b)):
            z = h @ W.T + b
            if i < len(self.W) - 1:
                h = relu(z)
                if keep:
                    pre.append(z)
                    post.append(h)
            else:
                h = z
        if self.dueling:
            value = h[:, :1]
            adv = h[:, 1:]
            q = value + adv - adv.mean(axis=1, keepdims=True)
        else:
            q = h
        return q, (pre, post) if keep else None

    def backward(self, cache, dq: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of the loss w.r.t. parameters given dL/dQ for the batch.

        The returned (dW, db) pairs are views into one reused flat buffer
        (also exposed as `grad_flat`); copy them before the next call if they
        must outlive it.
        """
        pre, post = cache
        dq = np.atleast_2d(dq)
        if self.dueling:
            dout = np.empty((dq.shape[0], self.n_actions + 1))
            dout[:, 0] = dq.sum(axis=1)
            dout[:, 1:] = dq - dq.sum(axis=1, keepdims=True) / self.n_actions
        else:
            dout = dq
        delta = dout
        for i in range(len(self.W) - 1, -1, -1):
            gw, gb = self._grad_views[i]
            np.matmul(delta.T, post[i], out=gw)
            delta.sum(axis=0, out=gb)
            if i > 0:
                delta = (delta @ self.W[i]) * (pre[i - 1] > 0)
        return self._grad_views

    @property
    def grad_flat(self) -> np.ndarray:
        return self._grad

    # -- utilities ----------------------------------------------------------

    def parameters(self):
        for i in range(len(self.W)):
            yield self.W[i]
            yield self.b[i]

    def clone(self) -> "Network":
        other = Network(self.n_inputs, self.n_actions, self.hidden, self.dueling,
                        input_shift=self.input_shift, input_scale=self.input_scale)
        copy_weights(self, other)
        return other

    def architecture(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
            "dueling": self.dueling,
        }


def copy_weights(src: Network, dst: Network) -> None:
    if src.architecture() != dst.architecture():
        raise ConfigError("cannot copy weights between different architectures")
    dst.theta[...] = src.theta
    dst.input_shift[...] = src.input_shift
    dst.input_scale[...] = src.input_scale


class Adam:
    """Adaptive-moment gradient descent over a network's flat parameter buffer."""

    def __init__(self, net: Network, learning_rate: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = np.zeros_like(net.theta)
        self.v = np.zeros_like(net.theta)

    def step(self, grads: list[tuple[np.ndarray, np.ndarray]] | np.ndarray) -> None:
        if isinstance(grads, np.ndarray):
            flat = grads
        elif grads is self.net._grad_views:
            flat = self.net.grad_flat
        else:
            parts = []
            for (dW, db), w in zip(grads, self.net.W):
                if dW.shape != w.shape:
                    raise ConfigError("gradient shape mismatch")
                parts.extend((dW.ravel(), db))
            flat = np.concatenate(parts)
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        m, v = self.m, self.v
        m *= self.beta1
        m += (1 - self.beta1) * flat
        v *= self.beta2
        v += (1 - self.beta2) * np.square(flat)
        self.net.theta -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def input_scaling_from_schema(schema: UseCaseSchema,
                              spread: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Fixed per-feature affine map derived from the schema's value ranges.

    Derived features take their bounds from their formula applied to the
    bounds of their inputs, so every generatable value falls inside the map.
    `spread` widens the mapped range from [0, 1] to [0, spread]: decision
    margins between adjacent classes grow with it, which matters because the
    first layer must resolve them with weights it can only grow slowly at a
    small learning rate.
    """
    lo = np.zeros(schema.n_features)
    hi = np.ones(schema.n_features)
    raw = schema.raw
    for j, feat in enumerate(schema.features):
        if feat.kind == "binary":
            continue
        if feat.kind == "categorical":
            hi[j] = max(feat.values) if feat.values else 1.0
            continue
        if feat.derived:
            continue  # second pass below
        bounds = []
        if "base_ranges" in raw and feat.name in raw["base_ranges"]:
            bounds.append(raw["base_ranges"][feat.name])
        for overrides in raw.get("class_overrides", {}).values():
            spec = overrides.get(feat.name)
            if isinstance(spec, list):
                bounds.append(spec)
            elif isinstance(spec, dict) and "const" in spec:
                bounds.append([spec["const"], spec["const"]])
        if feat.name == "hemoglobin" and "hemoglobin_ranges" in raw:
            for group in raw["hemoglobin_ranges"].values():
                bounds.extend(group.values())
        if bounds:
            lo[j] = min(b[0] for b in bounds)
            hi[j] = max(b[1] for b in bounds)
    for name, rule in raw.get("derived", {}).items():
        j = schema.index(name)
        if rule["kind"] == "scale":
            k = schema.index(rule["of"])
            lo[j] = rule["factor"] * lo[k]
            hi[j] = rule["factor"] * hi[k]
        elif rule["kind"] == "ratio":
            num, den = schema.index(rule["num"]), schema.index(rule["den"])
            if lo[den] > 0:
                lo[j] = rule["factor"] * lo[num] / hi[den]
                hi[j] = rule["factor"] * hi[num] / lo[den]
    scale = (hi - lo) / spread
    scale[scale == 0] = 1.0
    return lo, scale


# -- policy artifacts --------------------------------------------------------


@dataclass
class PolicyArtifact:
    """Serialized policy: a Q-network, or a decision-tree policy wrapper."""

    meta: dict
    network: Network | None = None
    tree_raw: dict | None = None

    @property
    def kind(self) -> str:
        return self.meta["kind"]

    @property
    def use_case(self) -> str:
        return self.meta["use_case"]

    def matches(self, schema: UseCaseSchema) -> bool:
        return self.meta.get("schema_hash") == schema.fingerprint()


def qnet_artifact(net: Network, schema: UseCaseSchema, training: dict | None = None) -> PolicyArtifact:
    meta = {
        "schema": ARTIFACT_SCHEMA,
        "kind": "qnet",
        "use_case": schema.use_case,
        "features": schema.feature_names,
        "classes": schema.classes,
        "schema_hash": schema.fingerprint(),
        "architecture": net.architecture(),
        "training": training or {},
    }
    return PolicyArtifact(meta=meta, network=net)


def tree_artifact(tree_raw: dict, schema: UseCaseSchema) -> PolicyArtifact:
    meta = {
        "schema": ARTIFACT_SCHEMA,
        "kind": "tree",
        "use_case": schema.use_case,
        "features": schema.feature_names,
        "classes": schema.classes,
        "schema_hash": schema.fingerprint(),
        "tree": tree_raw,
        "training": {},
    }
    return PolicyArtifact(meta=meta, tree_raw=tree_raw)


def _payload_layout(net: Network) -> list[tuple[str, list[int]]]:
    layout: list[tuple[str, list[int]]] = []
    for i in range(len(net.W)):
        layout.append((f"W{i}", list(net.W[i].shape)))
        layout.append((f"b{i}", list(net.b[i].shape)))
    layout.append(("input_shift", [net.n_inputs]))
    layout.append(("input_scale", [net.n_inputs]))
    return layout


def save_policy(path: str | Path, artifact: PolicyArtifact) -> None:
    header = dict(artifact.meta)
    payload = b""
    if artifact.kind == "qnet":
        net = artifact.network
        layout = _payload_layout(net)
        header["layout"] = [[name, shape] for name, shape in layout]
        chunks = []
        arrays = dict(
            {f"W{i}": net.W[i] for i in range(len(net.W))},
            **{f"b{i}": net.b[i] for i in range(len(net.b))},
            input_shift=net.input_shift, input_scale=net.input_scale,
        )
        for name, _ in layout:
            chunks.append(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
        payload = b"".join(chunks)
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def load_policy(path: str | Path) -> PolicyArtifact:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ConfigError(f"{path}: not a policy artifact")
    n = struct.unpack("<I", data[len(MAGIC):len(MAGIC) + 4])[0]
    start = len(MAGIC) + 4
    header = json.loads(data[start:start + n].decode())
    payload = data[start + n:]
    if header["kind"] == "tree":
        return PolicyArtifact(meta=header, tree_raw=header["tree"])
    arch = header["architecture"]
    net = Network(arch["n_inputs"], arch["n_actions"], tuple(arch["hidden"]), arch["dueling"])
    offset = 0
    arrays = {}
    for name, shape in header["layout"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[name] = arr.astype(np.float64)
        offset += count * 8
    for i in range(len(net.W)):
        net.W[i][...] = arrays[f"W{i}"]
        net.b[i][...] = arrays[f"b{i}"]
    net.input_shift[...] = arrays["input_shift"]
    net.input_scale[...] = arrays["input_scale"]
    return PolicyArtifact(meta=header, network=net)
