"""Attention network: invariants, loss values, gradients, checkpoints."""

import math

import numpy as np
import pytest

from kifa.errors import EmptyClass, IoFailure, NonFiniteLoss, ShapeMismatch
from kifa.net import _backend, _core_py
from kifa.net import model as netmod
from kifa.net.checkpoint import load_checkpoint, save_checkpoint
from kifa.skeleton import ACTIONS, SkeletonSequence
from kifa.syngen import GenParams, default_templates, generate_sample


def _small_config(**kw):
    base = dict(hidden_size=8, joint_embed_size=5, learning_rate=0.1,
                epochs=3, seed=0)
    base.update(kw)
    return netmod.NetConfig(**base)


def _random_seq(rng, t=6, k=4):
    coords = rng.normal(0.0, 1.0, size=(t, k, 3))
    return SkeletonSequence(coords, 1, k)


def _training_corpus(per_intensity=5, noise=0.02, seed=0):
    params = GenParams(noise_std=noise, seed=seed)
    samples = []
    for action, t in default_templates().items():
        for i in range(per_intensity):
            for intensity in ("mild", "intense"):
                samples.append(generate_sample(t, intensity, params, i))
    return samples


class TestForward:
    def test_output_invariants_random_inputs(self):
        rng = np.random.default_rng(0)
        cfg = _small_config()
        for _ in range(20):
            params = netmod.init_params(cfg, 4, rng)
            out = netmod.forward(params, _random_seq(rng))
            out.validate()

    def test_identical_frames_symmetric_recurrence(self):
        # with a zeroed recurrent cell every hidden state is equal, so
        # two identical frames must split temporal attention evenly
        rng = np.random.default_rng(1)
        cfg = _small_config()
        params = netmod.init_params(cfg, 4, rng)
        for name in ("lstm_wx", "lstm_wh", "lstm_b"):
            params.arrays[name][:] = 0.0
        frame = rng.normal(size=(1, 4, 3))
        seq = SkeletonSequence(np.repeat(frame, 2, axis=0), 1, 4)
        out = netmod.forward(params, seq)
        assert math.isclose(out.temporal[0], 0.5, abs_tol=1e-9)
        assert math.isclose(out.temporal[1], 0.5, abs_tol=1e-9)

    def test_classifier_row_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        cfg = _small_config()
        params = netmod.init_params(cfg, 4, rng)
        seq = _random_seq(rng)
        base = netmod.forward(params, seq)
        perm = np.array([3, 0, 4, 1, 2])
        shuffled = params.copy()
        shuffled.arrays["cls_w"] = params.arrays["cls_w"][perm]
        shuffled.arrays["cls_b"] = params.arrays["cls_b"][perm]
        out = netmod.forward(shuffled, seq)
        assert np.allclose(out.class_scores, base.class_scores[perm],
                           atol=1e-12)
        assert np.allclose(out.temporal, base.temporal, atol=1e-15)
        assert np.allclose(out.joint, base.joint, atol=1e-15)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(3)
        params = netmod.init_params(_small_config(), 4, rng)
        with pytest.raises(ShapeMismatch):
            netmod.forward(params, _random_seq(rng, k=6))

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        params = netmod.init_params(_small_config(), 4, rng)
        seq = _random_seq(rng)
        a = netmod.forward(params, seq)
        b = netmod.forward(params, seq)
        assert np.array_equal(a.class_scores, b.class_scores)
        assert np.array_equal(a.temporal, b.temporal)


class TestPenalizedLoss:
    def _output(self, scores):
        scores = np.asarray(scores, dtype=np.float64)
        t = np.array([0.5, 0.5])
        joint = np.full((2, 2), 0.5)
        return netmod.AttentionOutput(t, joint, scores, np.zeros((2, 3)))

    def test_zero_lambda_is_cross_entropy(self):
        out = self._output([0.2, 0.3, 0.1, 0.15, 0.25])
        y = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
        q = np.array([0.6, 0.4])
        p = np.array([0.5, 0.5])
        got = netmod.penalized_loss(out, y, q, p, 0.0)
        assert math.isclose(got, -math.log(0.3), rel_tol=1e-12)

    def test_perfect_prediction_zero_loss(self):
        out = self._output([0.0, 1.0, 0.0, 0.0, 0.0])
        y = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
        got = netmod.penalized_loss(out, y, np.array([1.0]), None, 0.0)
        assert got <= 1e-11

    def test_hand_value_with_penalty(self):
        # y-hot prob 0.5 plus a matched p=q=(0.5,0.5) penalty at lambda 1:
        # 0.6931 + 0.6931 = 1.3863
        out = self._output([0.5, 0.5, 0.0, 0.0, 0.0])
        y = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        pq = np.array([0.5, 0.5])
        got = netmod.penalized_loss(out, y, pq, pq, 1.0)
        assert math.isclose(got, 2.0 * math.log(2.0), rel_tol=1e-9)
        assert math.isclose(got, 1.3863, abs_tol=5e-5)

    def test_nonnegative_for_random_inputs(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            s = rng.random(5) + 1e-6
            s /= s.sum()
            out = self._output(s)
            y = np.zeros(5)
            y[int(rng.integers(5))] = 1.0
            q = rng.random(2) + 1e-6
            q /= q.sum()
            p = rng.random(2) + 1e-6
            p /= p.sum()
            lam = float(rng.random())
            assert netmod.penalized_loss(out, y, q, p, lam) >= 0.0

    def test_penalty_minimized_when_q_matches_p(self):
        out = self._output([1.0, 0.0, 0.0, 0.0, 0.0])
        y = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        p = np.array([0.7, 0.3])
        matched = netmod.penalized_loss(out, y, p, p, 1.0)
        for q0 in (0.1, 0.3, 0.5, 0.9):
            q = np.array([q0, 1.0 - q0])
            assert netmod.penalized_loss(out, y, q, p, 1.0) >= matched - 1e-12


class TestGradients:
    def test_analytic_matches_finite_differences_20_seeds(self):
        cfg = netmod.NetConfig(hidden_size=6, joint_embed_size=4)
        worst = max(netmod.grad_check(cfg, seed, h=1e-5)
                    for seed in range(20))
        assert worst <= 1e-4, worst

    def test_step_size_robustness(self):
        cfg = netmod.NetConfig(hidden_size=6, joint_embed_size=4)
        e5 = netmod.grad_check(cfg, 0, h=1e-5)
        e6 = netmod.grad_check(cfg, 0, h=1e-6)
        assert e5 <= 1e-4 and e6 <= 1e-4
        lo, hi = sorted((max(e5, 1e-12), max(e6, 1e-12)))
        assert hi / lo <= 100.0

    def test_zero_input_sequence_passes(self):
        cfg = netmod.NetConfig(hidden_size=6, joint_embed_size=4)
        rng = np.random.default_rng(7)
        params = netmod.init_params(cfg, 4, rng)
        seq = SkeletonSequence(np.zeros((5, 4, 3)), 1, 4)
        loss, grads, _ = netmod.loss_and_grads(params, seq, 2)
        assert np.isfinite(loss)
        for g in grads.values():
            assert np.all(np.isfinite(g))


class TestBackendEquality:
    @pytest.mark.skipif(_backend.BACKEND != "cython",
                        reason="compiled backend not built")
    def test_compiled_core_matches_reference(self):
        from kifa.net import _core_cy

        rng = np.random.default_rng(8)
        cfg = _small_config()
        params = netmod.init_params(cfg, 5, rng)
        a = params.arrays
        X = np.ascontiguousarray(rng.normal(size=(7, 5, 3)))
        args = (a["embed"], a["attn_w"], a["attn_u"], a["attn_b"],
                a["attn_v"], a["lstm_wx"], a["lstm_wh"], a["lstm_b"], X)
        ref = _core_py.recurrent_forward(*args)
        got = _core_cy.recurrent_forward(*args)
        for key in ref:
            assert np.allclose(got[key], ref[key], atol=1e-12), key
        dh = rng.normal(size=ref["h"].shape)
        da = rng.normal(size=ref["aprime"].shape)
        gref = _core_py.recurrent_backward(*args, ref, dh, da)
        ggot = _core_cy.recurrent_backward(*args, got, dh, da)
        assert sorted(gref) == sorted(ggot)
        for key in gref:
            assert np.allclose(ggot[key], gref[key], atol=1e-10), key


class TestTrain:
    def test_loss_halves_on_separable_corpus(self):
        # widen the class offsets so 50 samples are linearly separable
        # with margin to spare at this tiny training budget
        params = GenParams(seed=0)
        samples = []
        for action, t in default_templates().items():
            t.offsets = {k: 4.0 * v for k, v in t.offsets.items()}
            for i in range(5):
                for intensity in ("mild", "intense"):
                    samples.append(generate_sample(t, intensity, params, i))
        cfg = netmod.NetConfig(hidden_size=24, joint_embed_size=8,
                               learning_rate=0.3, epochs=10, seed=0)
        _, trace = netmod.train(cfg, samples)
        assert trace[-1] < 0.5 * trace[0], trace

    def test_deterministic_parameters(self):
        samples = _training_corpus(per_intensity=2)
        cfg = _small_config(epochs=2)
        a, ta = netmod.train(cfg, samples)
        b, tb = netmod.train(cfg, samples)
        assert ta == tb
        for name in a.names():
            assert np.array_equal(a.arrays[name], b.arrays[name])

    def test_absent_feedback_equals_zero_penalty(self):
        samples = _training_corpus(per_intensity=2)
        cfg = _small_config(epochs=2, penalty_max=0.5)
        cfg0 = _small_config(epochs=2, penalty_max=0.0)
        p = np.full(30, 1.0 / 30)
        a, _ = netmod.train(cfg, samples, fuzzifier_feedback=None)
        b, _ = netmod.train(cfg0, samples, fuzzifier_feedback=lambda s: p)
        for name in a.names():
            assert np.array_equal(a.arrays[name], b.arrays[name])

    def test_penalty_changes_trajectory(self):
        samples = _training_corpus(per_intensity=2)
        cfg = _small_config(epochs=2, penalty_max=0.5, penalty_ramp=1)
        p = np.zeros(30)
        p[0] = 1.0
        a, _ = netmod.train(cfg, samples, fuzzifier_feedback=None)
        b, _ = netmod.train(cfg, samples, fuzzifier_feedback=lambda s: p)
        assert any(not np.array_equal(a.arrays[n], b.arrays[n])
                   for n in a.names())

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyClass):
            netmod.train(_small_config(), [])

    def test_missing_class_rejected(self):
        samples = [s for s in _training_corpus(per_intensity=1)
                   if s.action != "kicking"]
        with pytest.raises(EmptyClass):
            netmod.train(_small_config(), samples)

    def test_nonfinite_parameters_raise(self):
        samples = _training_corpus(per_intensity=1)
        cfg = _small_config(epochs=1)
        rng = np.random.default_rng(9)
        params = netmod.init_params(cfg, 30, rng)
        params.arrays["cls_b"][0] = np.nan
        with pytest.raises(NonFiniteLoss):
            netmod.train(cfg, samples, initial_params=params)

    def test_resume_from_initial_params(self):
        samples = _training_corpus(per_intensity=1)
        cfg = _small_config(epochs=2)
        first, _ = netmod.train(cfg, samples)
        resumed, trace = netmod.train(cfg, samples, initial_params=first)
        assert len(trace) == 2
        assert any(not np.array_equal(first.arrays[n], resumed.arrays[n])
                   for n in first.names())


class TestConfigValidation:
    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            netmod.NetConfig(hidden_size=0)

    def test_bad_rate_and_penalty(self):
        with pytest.raises(ValueError):
            netmod.NetConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            netmod.NetConfig(penalty_max=-0.1)

    def test_dict_round_trip(self):
        cfg = netmod.NetConfig(hidden_size=12, epochs=7, penalty_max=0.25)
        assert netmod.NetConfig.from_dict(cfg.to_dict()) == cfg


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        cfg = _small_config(epochs=1)
        params = netmod.init_params(cfg, 4, rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(params, cfg, 42, path)
        loaded, lcfg, seed = load_checkpoint(path)
        assert seed == 42
        assert lcfg == cfg
        assert loaded.slot_count == params.slot_count
        for name in params.names():
            assert np.array_equal(loaded.arrays[name], params.arrays[name])

    def test_loaded_params_forward_identically(self, tmp_path):
        rng = np.random.default_rng(11)
        cfg = _small_config()
        params = netmod.init_params(cfg, 4, rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(params, cfg, 0, path)
        loaded, _, _ = load_checkpoint(path)
        seq = _random_seq(rng)
        a = netmod.forward(params, seq)
        b = netmod.forward(loaded, seq)
        assert np.array_equal(a.class_scores, b.class_scores)
        assert np.array_equal(a.temporal, b.temporal)
        assert np.array_equal(a.joint, b.joint)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint\n{}\n")
        with pytest.raises(IoFailure):
            load_checkpoint(path)

    def test_truncated_payload_rejected(self, tmp_path):
        rng = np.random.default_rng(12)
        cfg = _small_config()
        params = netmod.init_params(cfg, 4, rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(params, cfg, 0, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(IoFailure):
            load_checkpoint(path)
