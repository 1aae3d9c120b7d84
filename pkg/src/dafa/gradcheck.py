"""Gradient verification: hand-derived reverse-mode passes against central differences.

Every differentiable operation is scalarized through a fixed probe loss
(half the squared sum of its output matrix). The analytic gradients walk
the same forward trace the operations use; the oracle re-estimates each
scalar parameter's gradient with central finite differences. A parameter
passes when its relative error is below the tolerance or its absolute
error is below a small floor (which absorbs parameters whose true
gradient is zero, where relative error is meaningless).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .attention import CalibratedSignals, dep_attention, sem_attention
from .fusion import FusionOutput, FusionParams, _forward_trace, fuse

DEFAULT_EPS = 1e-5
DEFAULT_TOL = 1e-5
ABS_FLOOR = 1e-8
_REL_DENOM_FLOOR = 1e-12

OP_NAMES = ("fuse", "sem_attention", "dep_attention")


def probe_loss(output) -> float:
    """Half the squared sum of the operation's primary output matrix."""
    if isinstance(output, FusionOutput):
        matrix = output.fused
    elif isinstance(output, CalibratedSignals):
        matrix = output.dep
    else:
        matrix = np.asarray(output, dtype=np.float64)
    return 0.5 * float(np.sum(matrix * matrix))


def fd_gradient(f, params: dict, eps: float = DEFAULT_EPS) -> dict:
    """Central-difference gradient of a scalar function over a dict of arrays/scalars."""
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    work = {
        name: (float(value) if np.ndim(value) == 0 else np.array(value, dtype=np.float64))
        for name, value in params.items()
    }

    def evaluate() -> float:
        value = f(work)
        if not np.isfinite(value):
            raise ValueError("function under test returned a non-finite value")
        return value

    grads: dict = {}
    for name, value in work.items():
        if np.ndim(value) == 0:
            work[name] = value + eps
            hi = evaluate()
            work[name] = value - eps
            lo = evaluate()
            work[name] = value
            grads[name] = (hi - lo) / (2.0 * eps)
            continue
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            hi = evaluate()
            value[idx] = orig - eps
            lo = evaluate()
            value[idx] = orig
            grad[idx] = (hi - lo) / (2.0 * eps)
        grads[name] = grad
    return grads


def _softmax_rows_backward(weights: np.ndarray, g_weights: np.ndarray) -> np.ndarray:
    return weights * (g_weights - np.sum(g_weights * weights, axis=-1, keepdims=True))


def _attention_gradients(q, k, v, calibration=None) -> dict:
    """Probe-loss gradients of one attention path with respect to q, k, v."""
    q, k, v = (np.asarray(x, dtype=np.float64) for x in (q, k, v))
    if calibration is None:
        weights, out = sem_attention(q, k, v)
    else:
        weights, out = dep_attention(q, k, v, calibration)
    scale = 1.0 / np.sqrt(q.shape[1])

    g_out = out
    g_weights = g_out @ v.T
    g_v = weights.T @ g_out
    g_logits = _softmax_rows_backward(weights, g_weights)
    g_raw = g_logits * calibration * scale if calibration is not None else g_logits * scale
    return {"q": g_raw @ k, "k": g_raw.T @ q, "v": g_v}


def sem_attention_gradients(q, k, v) -> dict:
    return _attention_gradients(q, k, v)


def dep_attention_gradients(q, k, v, calibration) -> dict:
    return _attention_gradients(q, k, v, np.asarray(calibration, dtype=np.float64))


def fuse_gradients(sem, dep, params: FusionParams) -> dict:
    """Probe-loss gradients for every fusion parameter and both input signals.

    Mirrors the batched forward trace step by step in reverse; row i of
    each cached matrix is position i, so per-position sums become matrix
    contractions.
    """
    sem = np.asarray(sem, dtype=np.float64)
    dep = np.asarray(dep, dtype=np.float64)
    t = _forward_trace(sem, dep, params)
    d_seq, d_v, d_hid = params.d_seq, params.d_v, params.d_hid
    wd_top, wd_bot = params.w_dep_score[:d_seq], params.w_dep_score[d_seq:]
    ws_top, ws_bot = params.w_sem_score[:d_seq], params.w_sem_score[d_seq:]
    g: dict = {}

    g_fused = t["fused"]
    g_filter = np.sum(g_fused * t["squashed"], axis=1)
    g_squashed = t["filter_gate"][:, None] * g_fused
    g_out_pre = g_squashed * (1.0 - t["squashed"] ** 2)
    g["w_output"] = g_out_pre.T @ t["blend"]
    g["b_output"] = g_out_pre.sum(axis=0)
    g_blend = g_out_pre @ params.w_output

    g_zf = g_filter * t["filter_gate"] * (1.0 - t["filter_gate"])
    g["w_filter_gate"] = np.concatenate([sem, t["projected"]], axis=1).T @ g_zf
    g_sem = g_zf[:, None] * params.w_filter_gate[None, :d_v]
    g_projected = g_zf[:, None] * params.w_filter_gate[None, d_v:]
    g["w_value"] = g_projected.T @ t["blend"]
    g["b_value"] = g_projected.sum(axis=0)
    g_blend += g_projected @ params.w_value

    g_gate = np.sum(g_blend * (t["hs"] - t["hd"]), axis=1)
    g_hs = t["fusion_gate"][:, None] * g_blend
    g_hd = (1.0 - t["fusion_gate"])[:, None] * g_blend
    g_zg = g_gate * t["fusion_gate"] * (1.0 - t["fusion_gate"])
    g["w_fusion_gate"] = np.concatenate([t["hd"], t["hs"]], axis=1).T @ g_zg
    g_hd += g_zg[:, None] * params.w_fusion_gate[None, :d_hid]
    g_hs += g_zg[:, None] * params.w_fusion_gate[None, d_hid:]

    g_hd_pre = g_hd * (1.0 - t["hd"] ** 2)
    g["w_dep_hidden"] = g_hd_pre.T @ t["dep_refined"]
    g["b_dep_hidden"] = g_hd_pre.sum(axis=0)
    g_dep_refined = g_hd_pre @ params.w_dep_hidden

    g_hs_pre = g_hs * (1.0 - t["hs"] ** 2)
    g["w_sem_hidden"] = g_hs_pre.T @ t["sem_refined"]
    g["b_sem_hidden"] = g_hs_pre.sum(axis=0)
    g_sem_refined = g_hs_pre @ params.w_sem_hidden

    # dependency-guided pooling of the semantic signal
    g_sem_pool = g_sem_refined @ sem.T
    g_sem += t["sem_pool"].T @ g_sem_refined
    g_sem_scores = _softmax_rows_backward(t["sem_pool"], g_sem_pool)
    g["b_sem_score"] = float(g_sem_scores.sum())
    g_base_s = g_sem_scores.sum(axis=0)
    g_shift_s = g_sem_scores.sum(axis=1)
    g["w_sem_score"] = np.concatenate([t["t_sem"] @ g_base_s, t["tu_dep"].T @ g_shift_s])
    g_t_sem = np.outer(ws_top, g_base_s)
    g_tu_dep = np.outer(g_shift_s, ws_bot)
    g_u_dep = g_tu_dep * (1.0 - t["tu_dep"] ** 2)
    g["w_dep_query"] = g_u_dep.T @ t["dep_refined"]
    g["b_dep_query"] = g_u_dep.sum(axis=0)
    g_dep_refined += g_u_dep @ params.w_dep_query

    # semantic-guided pooling of the dependency signal
    g_dep_pool = g_dep_refined @ dep.T
    g_dep = t["dep_pool"].T @ g_dep_refined
    g_dep_scores = _softmax_rows_backward(t["dep_pool"], g_dep_pool)
    g["b_dep_score"] = float(g_dep_scores.sum())
    g_base_d = g_dep_scores.sum(axis=0)
    g_shift_d = g_dep_scores.sum(axis=1)
    g["w_dep_score"] = np.concatenate([t["t_dep"] @ g_base_d, t["tu_sem"].T @ g_shift_d])
    g_t_dep = np.outer(wd_top, g_base_d)
    g_tu_sem = np.outer(g_shift_d, wd_bot)
    g_u_sem = g_tu_sem * (1.0 - t["tu_sem"] ** 2)
    g["w_sem_query"] = g_u_sem.T @ sem
    g["b_sem_query"] = g_u_sem.sum(axis=0)
    g_sem += g_u_sem @ params.w_sem_query

    # shared signal projections
    g_proj_dep = g_t_dep * (1.0 - t["t_dep"] ** 2)
    g["w_dep_proj"] = g_proj_dep @ dep
    g_dep += g_proj_dep.T @ params.w_dep_proj
    g_proj_sem = g_t_sem * (1.0 - t["t_sem"] ** 2)
    g["w_sem_proj"] = g_proj_sem @ sem
    g_sem += g_proj_sem.T @ params.w_sem_proj

    g["sem"] = g_sem
    g["dep"] = g_dep
    return g


def analytic_gradient(op_name: str, inputs: dict, params: FusionParams | None = None) -> dict:
    """Dispatch to the reverse-mode pass for one operation."""
    if op_name == "fuse":
        if params is None:
            raise ValueError("fuse gradients need FusionParams")
        return fuse_gradients(inputs["sem"], inputs["dep"], params)
    if op_name == "sem_attention":
        return sem_attention_gradients(inputs["q"], inputs["k"], inputs["v"])
    if op_name == "dep_attention":
        return dep_attention_gradients(inputs["q"], inputs["k"], inputs["v"], inputs["calibration"])
    raise ValueError(f"unknown op {op_name!r}; expected one of {OP_NAMES}")


@dataclass(frozen=True)
class GradCheckConfig:
    d_seq: int = 4
    d_k: int = 3
    d_v: int = 3
    d_hid: int = 3


@dataclass(frozen=True)
class GradReport:
    """Comparison of analytic and finite-difference gradients for one operation."""

    op_name: str
    seed: int
    tol: float
    eps: float
    rel_errors: dict = field(default_factory=dict)
    abs_errors: dict = field(default_factory=dict)
    passed: bool = False

    @property
    def max_rel_error(self) -> float:
        return max(self.rel_errors.values()) if self.rel_errors else 0.0

    @property
    def max_abs_error(self) -> float:
        return max(self.abs_errors.values()) if self.abs_errors else 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def compare_gradients(analytic: dict, fd: dict, tol: float, abs_floor: float = ABS_FLOOR):
    """Per-parameter max errors plus the overall pass flag.

    A scalar entry passes when |analytic - fd| / max(|analytic|, |fd|, 1e-12)
    is below tol, or when the absolute difference is below abs_floor.
    """
    rel_errors, abs_errors, passed = {}, {}, True
    for name in analytic:
        a = np.atleast_1d(np.asarray(analytic[name], dtype=np.float64))
        f = np.atleast_1d(np.asarray(fd[name], dtype=np.float64))
        diff = np.abs(a - f)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), _REL_DENOM_FLOOR)
        rel = diff / denom
        ok = np.all((rel < tol) | (diff < abs_floor))
        passed = passed and bool(ok)
        rel_errors[name] = float(rel.max())
        abs_errors[name] = float(diff.max())
    return rel_errors, abs_errors, passed


def check(
    op_name: str,
    config: GradCheckConfig | None = None,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    eps: float = DEFAULT_EPS,
) -> GradReport:
    """Run one seeded analytic-vs-finite-difference comparison."""
    cfg = config or GradCheckConfig()
    rng = np.random.default_rng(seed)
    if op_name == "fuse":
        params = FusionParams.init(cfg.d_seq, cfg.d_v, cfg.d_hid, rng)
        sem = rng.uniform(-1.0, 1.0, (cfg.d_seq, cfg.d_v))
        dep = rng.uniform(-1.0, 1.0, (cfg.d_seq, cfg.d_v))
        analytic = fuse_gradients(sem, dep, params)
        flat = {**params.to_dict(), "sem": sem, "dep": dep}

        def loss(values: dict) -> float:
            p = FusionParams.from_dict(values)
            return probe_loss(fuse(values["sem"], values["dep"], p))

        fd = fd_gradient(loss, flat, eps)
    elif op_name in ("sem_attention", "dep_attention"):
        q = rng.uniform(-1.0, 1.0, (cfg.d_seq, cfg.d_k))
        k = rng.uniform(-1.0, 1.0, (cfg.d_seq, cfg.d_k))
        v = rng.uniform(-1.0, 1.0, (cfg.d_seq, cfg.d_v))
        if op_name == "dep_attention":
            calibration = 1.0 + rng.uniform(0.0, 1.0, (cfg.d_seq, cfg.d_seq))
            analytic = dep_attention_gradients(q, k, v, calibration)
            fd = fd_gradient(
                lambda w: probe_loss(dep_attention(w["q"], w["k"], w["v"], calibration)[1]),
                {"q": q, "k": k, "v": v},
                eps,
            )
        else:
            analytic = sem_attention_gradients(q, k, v)
            fd = fd_gradient(
                lambda w: probe_loss(sem_attention(w["q"], w["k"], w["v"])[1]),
                {"q": q, "k": k, "v": v},
                eps,
            )
    else:
        raise ValueError(f"unknown op {op_name!r}; expected one of {OP_NAMES}")

    rel_errors, abs_errors, passed = compare_gradients(analytic, fd, tol)
    return GradReport(
        op_name=op_name, seed=seed, tol=tol, eps=eps,
        rel_errors=rel_errors, abs_errors=abs_errors, passed=passed,
    )
