"""Gradient machinery tests: probe loss, fd oracle, analytic-vs-fd agreement."""

import numpy as np
import pytest

from dafa.attention import dep_attention, sem_attention
from dafa.fusion import FusionParams, fuse
from dafa.gradcheck import (
    GradCheckConfig,
    analytic_gradient,
    check,
    compare_gradients,
    dep_attention_gradients,
    fd_gradient,
    fuse_gradients,
    probe_loss,
    sem_attention_gradients,
)


class TestProbeLoss:
    def test_zero_output(self):
        assert probe_loss(np.zeros((3, 2))) == 0.0

    def test_single_entry(self):
        assert probe_loss(np.array([[2.0]])) == 2.0

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 5))
        assert probe_loss(x) == pytest.approx(0.5 * float((x ** 2).sum()), rel=1e-15)

    def test_fusion_output_uses_final_features(self):
        params = FusionParams.init(2, 2, 2, seed=1)
        rng = np.random.default_rng(2)
        out = fuse(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)), params)
        assert probe_loss(out) == pytest.approx(0.5 * float((out.fused ** 2).sum()), rel=1e-15)


class TestFdGradient:
    def test_identity_scalar(self):
        g = fd_gradient(lambda p: p["x"], {"x": 0.7}, eps=1e-5)
        assert g["x"] == pytest.approx(1.0, abs=1e-9)

    def test_quadratic_at_three(self):
        g = fd_gradient(lambda p: 0.5 * p["x"] ** 2, {"x": 3.0}, eps=1e-5)
        assert g["x"] == pytest.approx(3.0, abs=1e-9)

    def test_array_entries_probed_independently(self):
        coeff = np.array([2.0, -1.0, 0.5])
        g = fd_gradient(lambda p: float(coeff @ p["w"]), {"w": np.zeros(3)}, eps=1e-5)
        assert np.allclose(g["w"], coeff, atol=1e-9)

    def test_fuse_probe_is_finite(self):
        params = FusionParams.init(3, 2, 2, seed=7)
        rng = np.random.default_rng(7)
        sem = rng.uniform(-1, 1, (3, 2))
        dep = rng.uniform(-1, 1, (3, 2))
        flat = {**params.to_dict(), "sem": sem, "dep": dep}

        def loss(values):
            return probe_loss(fuse(values["sem"], values["dep"], FusionParams.from_dict(values)))

        g = fd_gradient(loss, flat, eps=1e-5)
        for value in g.values():
            assert np.all(np.isfinite(value))

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ValueError):
            fd_gradient(lambda p: p["x"], {"x": 1.0}, eps=0.0)

    def test_nonfinite_value_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            fd_gradient(lambda p: float("nan"), {"x": 1.0}, eps=1e-5)


class TestAnalyticGradients:
    def test_zero_param_fuse_matches_fd(self):
        params = FusionParams.zeros(3, 2, 2)
        rng = np.random.default_rng(3)
        sem = rng.uniform(-1, 1, (3, 2))
        dep = rng.uniform(-1, 1, (3, 2))
        analytic = fuse_gradients(sem, dep, params)
        flat = {**params.to_dict(), "sem": sem, "dep": dep}

        def loss(values):
            return probe_loss(fuse(values["sem"], values["dep"], FusionParams.from_dict(values)))

        fd = fd_gradient(loss, flat, eps=1e-5)
        rel, _, _ = compare_gradients(analytic, fd, tol=1e-7)
        assert max(rel.values()) < 1e-7

    def test_neutral_calibration_matches_sem_gradients(self):
        rng = np.random.default_rng(4)
        q, k = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        v = rng.normal(size=(4, 2))
        dep_grads = dep_attention_gradients(q, k, v, np.ones((4, 4)))
        sem_grads = sem_attention_gradients(q, k, v)
        for name in ("q", "k", "v"):
            assert np.array_equal(dep_grads[name], sem_grads[name])

    def test_dispatcher_routes_ops(self):
        rng = np.random.default_rng(5)
        q, k = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        v = rng.normal(size=(3, 2))
        direct = sem_attention_gradients(q, k, v)
        routed = analytic_gradient("sem_attention", {"q": q, "k": k, "v": v})
        for name in direct:
            assert np.array_equal(direct[name], routed[name])
        with pytest.raises(ValueError, match="unknown op"):
            analytic_gradient("nope", {})

    def test_attention_gradients_match_fd(self):
        rng = np.random.default_rng(6)
        q, k = rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (4, 3))
        v = rng.uniform(-1, 1, (4, 2))
        c = 1.0 + rng.uniform(0, 1, (4, 4))
        analytic = dep_attention_gradients(q, k, v, c)
        fd = fd_gradient(
            lambda w: probe_loss(dep_attention(w["q"], w["k"], w["v"], c)[1]),
            {"q": q, "k": k, "v": v},
            eps=1e-5,
        )
        _, _, passed = compare_gradients(analytic, fd, tol=1e-6)
        assert passed


class TestCheck:
    def test_healthy_ops_pass(self):
        for op in ("fuse", "sem_attention", "dep_attention"):
            report = check(op, seed=7, tol=1e-5)
            assert report.passed, (op, report.rel_errors)

    def test_random_configurations_pass(self):
        rng = np.random.default_rng(8)
        for trial in range(8):
            cfg = GradCheckConfig(
                d_seq=int(rng.integers(1, 7)),
                d_k=int(rng.integers(1, 9)),
                d_v=int(rng.integers(1, 9)),
                d_hid=int(rng.integers(1, 6)),
            )
            for op in ("fuse", "dep_attention"):
                assert check(op, cfg, seed=trial).passed

    def test_injected_fault_fails(self):
        rng = np.random.default_rng(9)
        q, k = rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (3, 2))
        v = rng.uniform(-1, 1, (3, 2))
        analytic = sem_attention_gradients(q, k, v)
        fd = fd_gradient(
            lambda w: probe_loss(sem_attention(w["q"], w["k"], w["v"])[1]),
            {"q": q, "k": k, "v": v},
            eps=1e-5,
        )
        analytic["q"] = analytic["q"].copy()
        analytic["q"][0, 0] += 1e-2
        _, _, passed = compare_gradients(analytic, fd, tol=1e-5)
        assert not passed

    def test_same_seed_reproduces_report(self):
        first = check("fuse", seed=11)
        second = check("fuse", seed=11)
        assert first == second

    def test_report_json_roundtrip(self):
        import json

        report = check("sem_attention", seed=12)
        data = json.loads(report.to_json())
        assert data["op_name"] == "sem_attention"
        assert data["passed"] is True
        assert set(data["rel_errors"]) == {"q", "k", "v"}

    def test_unknown_op_rejected(self):
        with pytest.raises(ValueError):
            check("mystery", seed=0)
