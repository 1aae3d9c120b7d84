"""Adaptive fusion of semantic and dependency attention signals.

Signal matrices are positions-major (d_seq, d_v). For each position i the
network (1) pools the dependency signal into a refined vector using
scores conditioned on the semantic feature s_i, (2) pools the semantic
signal the same way conditioned on that refined vector, (3) blends tanh
transforms of the two refined vectors through a sigmoid fusion gate, and
(4) scales the projected blend by a filtration gate driven by s_i, so
unreliable dependency evidence can be suppressed.

One parameter set is shared across positions. The "stack" inside the
guided attentions places a tanh of the projected signal matrix
(d_seq, d_seq) on top of the query feature tiled across columns, giving
the 2*d_seq rows the score vectors contract against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .nnops import sigmoid, softmax

# (field, shape spec, fan_in spec) in seeded-draw order; shapes reference
# the (d_seq, d_v, d_hid) triple.
_PARAM_SPECS = [
    ("w_dep_proj", ("d_seq", "d_v"), "d_v"),
    ("w_sem_proj", ("d_seq", "d_v"), "d_v"),
    ("w_sem_query", ("d_seq", "d_v"), "d_v"),
    ("b_sem_query", ("d_seq",), "d_v"),
    ("w_dep_query", ("d_seq", "d_v"), "d_v"),
    ("b_dep_query", ("d_seq",), "d_v"),
    ("w_dep_score", ("two_seq",), "two_seq"),
    ("b_dep_score", (), "two_seq"),
    ("w_sem_score", ("two_seq",), "two_seq"),
    ("b_sem_score", (), "two_seq"),
    ("w_dep_hidden", ("d_hid", "d_v"), "d_v"),
    ("b_dep_hidden", ("d_hid",), "d_v"),
    ("w_sem_hidden", ("d_hid", "d_v"), "d_v"),
    ("b_sem_hidden", ("d_hid",), "d_v"),
    ("w_fusion_gate", ("two_hid",), "two_hid"),
    ("w_value", ("d_v", "d_hid"), "d_hid"),
    ("b_value", ("d_v",), "d_hid"),
    ("w_output", ("d_v", "d_hid"), "d_hid"),
    ("b_output", ("d_v",), "d_hid"),
    ("w_filter_gate", ("two_v",), "two_v"),
]

PARAM_FIELDS = [name for name, _, _ in _PARAM_SPECS]


def _dims_map(d_seq: int, d_v: int, d_hid: int) -> dict[str, int]:
    return {
        "d_seq": d_seq,
        "d_v": d_v,
        "d_hid": d_hid,
        "two_seq": 2 * d_seq,
        "two_hid": 2 * d_hid,
        "two_v": 2 * d_v,
    }


@dataclass(frozen=True, eq=False)
class FusionParams:
    """All fusion weights, shared across sequence positions.

    Guided attention: w_dep_proj / w_sem_proj project a signal matrix to
    (d_seq, d_seq); w_sem_query / w_dep_query project the conditioning
    feature; w_dep_score / w_sem_score contract the stacked tanh block
    into per-position scores. Gates: *_hidden transform the refined
    vectors to d_hid, w_fusion_gate blends them, w_value / w_output map
    the blend back to d_v, and w_filter_gate scales the final feature.
    """

    w_dep_proj: np.ndarray    # (d_seq, d_v)
    w_sem_proj: np.ndarray    # (d_seq, d_v)
    w_sem_query: np.ndarray   # (d_seq, d_v)
    b_sem_query: np.ndarray   # (d_seq,)
    w_dep_query: np.ndarray   # (d_seq, d_v)
    b_dep_query: np.ndarray   # (d_seq,)
    w_dep_score: np.ndarray   # (2 * d_seq,)
    b_dep_score: float
    w_sem_score: np.ndarray   # (2 * d_seq,)
    b_sem_score: float
    w_dep_hidden: np.ndarray  # (d_hid, d_v)
    b_dep_hidden: np.ndarray  # (d_hid,)
    w_sem_hidden: np.ndarray  # (d_hid, d_v)
    b_sem_hidden: np.ndarray  # (d_hid,)
    w_fusion_gate: np.ndarray # (2 * d_hid,)
    w_value: np.ndarray       # (d_v, d_hid)
    b_value: np.ndarray       # (d_v,)
    w_output: np.ndarray      # (d_v, d_hid)
    b_output: np.ndarray      # (d_v,)
    w_filter_gate: np.ndarray # (2 * d_v,)

    @property
    def d_seq(self) -> int:
        return self.w_dep_proj.shape[0]

    @property
    def d_v(self) -> int:
        return self.w_dep_proj.shape[1]

    @property
    def d_hid(self) -> int:
        return self.w_dep_hidden.shape[0]

    def __post_init__(self):
        dims = _dims_map(self.d_seq, self.d_v, self.d_hid)
        for name, shape_spec, _ in _PARAM_SPECS:
            value = getattr(self, name)
            expected = tuple(dims[s] for s in shape_spec)
            if expected == ():
                if np.ndim(value) != 0:
                    raise ValueError(f"{name} must be a scalar")
                continue
            value = np.asarray(value, dtype=np.float64)
            object.__setattr__(self, name, value)
            if value.shape != expected:
                raise ValueError(f"{name} has shape {value.shape}, expected {expected}")

    @classmethod
    def init(cls, d_seq: int, d_v: int, d_hid: int, seed) -> "FusionParams":
        """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn in field order."""
        if min(d_seq, d_v, d_hid) < 1:
            raise ValueError("d_seq, d_v, d_hid must all be >= 1")
        rng = np.random.default_rng(seed)
        dims = _dims_map(d_seq, d_v, d_hid)
        values = {}
        for name, shape_spec, fan_spec in _PARAM_SPECS:
            bound = 1.0 / math.sqrt(dims[fan_spec])
            shape = tuple(dims[s] for s in shape_spec)
            if shape == ():
                values[name] = float(rng.uniform(-bound, bound))
            else:
                values[name] = rng.uniform(-bound, bound, shape)
        return cls(**values)

    @classmethod
    def zeros(cls, d_seq: int, d_v: int, d_hid: int) -> "FusionParams":
        dims = _dims_map(d_seq, d_v, d_hid)
        values = {
            name: 0.0 if shape_spec == () else np.zeros(tuple(dims[s] for s in shape_spec))
            for name, shape_spec, _ in _PARAM_SPECS
        }
        return cls(**values)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    @classmethod
    def from_dict(cls, values: dict) -> "FusionParams":
        return cls(**{name: values[name] for name in PARAM_FIELDS})

    def to_json(self) -> str:
        payload = {
            name: (float(v) if np.ndim(v) == 0 else np.asarray(v).tolist())
            for name, v in self.to_dict().items()
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FusionParams":
        data = json.loads(text)
        values = {}
        for name, shape_spec, _ in _PARAM_SPECS:
            if name not in data:
                raise ValueError(f"fusion params JSON missing {name!r}")
            values[name] = float(data[name]) if shape_spec == () else np.asarray(data[name], dtype=np.float64)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class FusionOutput:
    """Final features plus gate values and intermediates kept for diagnostics."""

    fused: np.ndarray             # (d_seq, d_v), rows strictly inside (-1, 1)
    fusion_gate: np.ndarray       # (d_seq,), strictly inside (0, 1)
    filter_gate: np.ndarray       # (d_seq,), strictly inside (0, 1)
    dep_refined: np.ndarray       # (d_seq, d_v)
    sem_refined: np.ndarray       # (d_seq, d_v)
    hidden_blend: np.ndarray      # (d_seq, d_hid)
    dep_pool_weights: np.ndarray  # (d_seq, d_seq), row i pools the dep signal for position i
    sem_pool_weights: np.ndarray  # (d_seq, d_seq)


def _check_signal(name: str, signal, params: FusionParams) -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (params.d_seq, params.d_v):
        raise ValueError(
            f"{name} has shape {signal.shape}, expected {(params.d_seq, params.d_v)}"
        )
    return signal


def _guided_pool(signal, feature, w_proj, w_query, b_query, w_score, b_score):
    """Pool one signal matrix into a vector, scored against a conditioning feature.

    Returns (pooled vector of size d_v, softmax weights of size d_seq).
    """
    d_seq = signal.shape[0]
    t_sig = np.tanh(w_proj @ signal.T)            # (d_seq, d_seq)
    t_feat = np.tanh(w_query @ feature + b_query) # (d_seq,)
    scores = w_score[:d_seq] @ t_sig + (w_score[d_seq:] @ t_feat + b_score)
    weights = softmax(scores)
    return signal.T @ weights, weights


def semantic_guided(dep, s_i, params: FusionParams) -> np.ndarray:
    """Refined dependency feature for one position, conditioned on its semantic feature."""
    dep = _check_signal("dep", dep, params)
    s_i = np.asarray(s_i, dtype=np.float64)
    pooled, _ = _guided_pool(
        dep, s_i, params.w_dep_proj, params.w_sem_query, params.b_sem_query,
        params.w_dep_score, params.b_dep_score,
    )
    return pooled


def dependency_guided(sem, dstar_i, params: FusionParams) -> np.ndarray:
    """Refined semantic feature for one position, conditioned on its refined dependency feature."""
    sem = _check_signal("sem", sem, params)
    dstar_i = np.asarray(dstar_i, dtype=np.float64)
    pooled, _ = _guided_pool(
        sem, dstar_i, params.w_sem_proj, params.w_dep_query, params.b_dep_query,
        params.w_sem_score, params.b_sem_score,
    )
    return pooled


def gated_fuse(dstar_i, sstar_i, params: FusionParams) -> tuple[np.ndarray, float]:
    """Blend tanh transforms of the refined features; returns (blend, gate)."""
    dstar_i = np.asarray(dstar_i, dtype=np.float64)
    sstar_i = np.asarray(sstar_i, dtype=np.float64)
    hd = np.tanh(params.w_dep_hidden @ dstar_i + params.b_dep_hidden)
    hs = np.tanh(params.w_sem_hidden @ sstar_i + params.b_sem_hidden)
    gate = float(sigmoid(params.w_fusion_gate @ np.concatenate([hd, hs])))
    return gate * hs + (1.0 - gate) * hd, gate


def filtration(s_i, v_i, params: FusionParams) -> tuple[np.ndarray, float]:
    """Scale the projected blend by a gate conditioned on the original semantic feature."""
    s_i = np.asarray(s_i, dtype=np.float64)
    v_i = np.asarray(v_i, dtype=np.float64)
    projected = params.w_value @ v_i + params.b_value
    gate = float(sigmoid(params.w_filter_gate @ np.concatenate([s_i, projected])))
    return gate * np.tanh(params.w_output @ v_i + params.b_output), gate


def _forward_trace(sem, dep, params: FusionParams) -> dict:
    """Run the whole network for every position at once, keeping intermediates.

    The per-position loop of the public operations is batched here: row i
    of each cached matrix corresponds to position i. Shared with the
    analytic backward pass so both differentiate the same forward code.
    """
    d_seq = params.d_seq
    wd_top, wd_bot = params.w_dep_score[:d_seq], params.w_dep_score[d_seq:]
    ws_top, ws_bot = params.w_sem_score[:d_seq], params.w_sem_score[d_seq:]

    t_dep = np.tanh(params.w_dep_proj @ dep.T)   # (d_seq, d_seq)
    t_sem = np.tanh(params.w_sem_proj @ sem.T)   # (d_seq, d_seq)

    u_sem = sem @ params.w_sem_query.T + params.b_sem_query   # (d_seq, d_seq), row i = query(s_i)
    tu_sem = np.tanh(u_sem)
    dep_scores = (wd_top @ t_dep)[None, :] + (tu_sem @ wd_bot)[:, None] + params.b_dep_score
    dep_pool = softmax(dep_scores, axis=1)
    dep_refined = dep_pool @ dep                              # (d_seq, d_v)

    u_dep = dep_refined @ params.w_dep_query.T + params.b_dep_query
    tu_dep = np.tanh(u_dep)
    sem_scores = (ws_top @ t_sem)[None, :] + (tu_dep @ ws_bot)[:, None] + params.b_sem_score
    sem_pool = softmax(sem_scores, axis=1)
    sem_refined = sem_pool @ sem

    hd = np.tanh(dep_refined @ params.w_dep_hidden.T + params.b_dep_hidden)  # (d_seq, d_hid)
    hs = np.tanh(sem_refined @ params.w_sem_hidden.T + params.b_sem_hidden)
    fusion_gate = sigmoid(np.concatenate([hd, hs], axis=1) @ params.w_fusion_gate)
    blend = fusion_gate[:, None] * hs + (1.0 - fusion_gate)[:, None] * hd

    projected = blend @ params.w_value.T + params.b_value     # (d_seq, d_v)
    filter_gate = sigmoid(np.concatenate([sem, projected], axis=1) @ params.w_filter_gate)
    squashed = np.tanh(blend @ params.w_output.T + params.b_output)
    fused = filter_gate[:, None] * squashed

    return {
        "t_dep": t_dep, "t_sem": t_sem,
        "tu_sem": tu_sem, "tu_dep": tu_dep,
        "dep_pool": dep_pool, "sem_pool": sem_pool,
        "dep_refined": dep_refined, "sem_refined": sem_refined,
        "hd": hd, "hs": hs,
        "fusion_gate": fusion_gate, "blend": blend,
        "projected": projected, "filter_gate": filter_gate,
        "squashed": squashed, "fused": fused,
    }


def fuse(sem, dep, params: FusionParams) -> FusionOutput:
    """Fuse the two signal matrices position by position into final features."""
    sem = _check_signal("sem", sem, params)
    dep = _check_signal("dep", dep, params)
    trace = _forward_trace(sem, dep, params)
    return FusionOutput(
        fused=trace["fused"],
        fusion_gate=trace["fusion_gate"],
        filter_gate=trace["filter_gate"],
        dep_refined=trace["dep_refined"],
        sem_refined=trace["sem_refined"],
        hidden_blend=trace["blend"],
        dep_pool_weights=trace["dep_pool"],
        sem_pool_weights=trace["sem_pool"],
    )
