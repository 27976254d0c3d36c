"""Pipeline sessions: persistence, indexing, exports, bell fit, reports."""

import json
import math

import numpy as np
import pytest

from kifa import pipeline
from kifa.errors import DegenerateData, IoFailure
from kifa.net import model as netmod
from kifa.skeleton import ACTIONS, DatasetManifest, ManifestEntry
from kifa.syngen import GenParams, default_templates, generate_corpus, generate_sample


def _tiny_config(**kw):
    cfg = pipeline.PipelineConfig()
    cfg.net = netmod.NetConfig(hidden_size=10, joint_embed_size=6,
                               learning_rate=0.2, epochs=2, seed=0)
    cfg.penalty_epochs = kw.pop("penalty_epochs", 1)
    cfg.fit_steps = kw.pop("fit_steps", 30)
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def _tiny_corpus(per_intensity=2, seed=0):
    params = GenParams(seed=seed)
    samples = []
    for action, t in default_templates().items():
        for i in range(per_intensity):
            for intensity in ("mild", "intense"):
                samples.append(generate_sample(t, intensity, params, i))
    return samples


@pytest.fixture(scope="module")
def session():
    sess, info = pipeline.train_session(_tiny_corpus(), _tiny_config(),
                                        manifest_ref="tiny")
    return sess, info


class TestTrainSession:
    def test_info_traces_present(self, session):
        _, info = session
        assert len(info["pretrain_loss"]) == 2
        assert len(info["penalty_loss"]) == 1
        assert info["fit_loss"], "inference fit should run on mixed corpus"

    def test_deterministic(self):
        corpus = _tiny_corpus()
        a, _ = pipeline.train_session(corpus, _tiny_config())
        b, _ = pipeline.train_session(corpus, _tiny_config())
        for name in a.net_params.names():
            assert np.array_equal(a.net_params.arrays[name],
                                  b.net_params.arrays[name])
        assert a.fuzzifier_state.to_dict() == b.fuzzifier_state.to_dict()
        assert np.array_equal(a.inference_params.alpha,
                              b.inference_params.alpha)

    def test_zero_penalty_epochs_skips_phase(self):
        cfg = _tiny_config(penalty_epochs=0)
        _, info = pipeline.train_session(_tiny_corpus(), cfg)
        assert info["penalty_loss"] == []


class TestIndexSample:
    def test_result_schema(self, session):
        sess, _ = session
        sample = _tiny_corpus()[0]
        res = pipeline.index_sample(sess, sample.sequence, frozen=True)
        assert res["action"] in ACTIONS
        assert res["intensity_index"] in ("mild", "intense")
        assert 0.0 <= res["action_confidence"] <= 1.0
        assert 0.0 <= res["mu_y_mild"] <= 1.0
        assert 0.0 <= res["mu_y_intense"] <= 1.0
        assert res["intensity_score"] >= 0.0

    def test_frozen_leaves_state_and_is_repeatable(self, session):
        sess, _ = session
        sample = _tiny_corpus()[3]
        before = sess.fuzzifier_state.to_dict()
        a = pipeline.index_sample(sess, sample.sequence, frozen=True)
        b = pipeline.index_sample(sess, sample.sequence, frozen=True)
        assert sess.fuzzifier_state.to_dict() == before
        assert a == b

    def test_adaptive_updates_state(self, session):
        sess, _ = pipeline.train_session(_tiny_corpus(), _tiny_config())
        n = sess.fuzzifier_state.intensity_count
        pipeline.index_sample(sess, _tiny_corpus()[5].sequence, frozen=False)
        assert sess.fuzzifier_state.intensity_count == n + 1


class TestPersistence:
    def test_round_trip_changes_no_result_bit(self, tmp_path, session):
        sess, _ = session
        pipeline.save_session(sess, tmp_path / "sess")
        loaded = pipeline.load_session(tmp_path / "sess")
        assert loaded.seed == sess.seed
        assert loaded.manifest_ref == sess.manifest_ref
        for name in sess.net_params.names():
            assert np.array_equal(loaded.net_params.arrays[name],
                                  sess.net_params.arrays[name])
        for sample in _tiny_corpus():
            a = pipeline.index_sample(sess, sample.sequence, frozen=True)
            b = pipeline.index_sample(loaded, sample.sequence, frozen=True)
            assert a == b

    def test_saved_files_exist(self, tmp_path, session):
        sess, _ = session
        pipeline.save_session(sess, tmp_path / "sess")
        assert (tmp_path / "sess" / pipeline.SESSION_FILE).exists()
        assert (tmp_path / "sess" / pipeline.CHECKPOINT_FILE).exists()
        doc = json.loads(
            (tmp_path / "sess" / pipeline.SESSION_FILE).read_text())
        assert doc["version"] == pipeline.SCHEMA_VERSION

    def test_corrupt_session_rejected(self, tmp_path):
        d = tmp_path / "bad"
        d.mkdir()
        (d / pipeline.SESSION_FILE).write_text("{not json")
        with pytest.raises(IoFailure):
            pipeline.load_session(d)

    def test_missing_dir_rejected(self, tmp_path):
        with pytest.raises(IoFailure):
            pipeline.load_session(tmp_path / "nope")


class TestExports:
    def test_export_and_reimport_reproduces_score(self, tmp_path, session):
        from kifa.kinetics import intensity_score

        sess, _ = session
        sample = _tiny_corpus()[1]
        paths = pipeline.export_attention(sess, sample.sequence,
                                          tmp_path / "attn")
        t_rows = [l.split(",") for l in
                  open(paths["temporal"]).read().splitlines()[1:]]
        j_rows = [l.split(",") for l in
                  open(paths["joint"]).read().splitlines()[1:]]
        a_t = np.array([float(r[1]) for r in t_rows])
        d_t = np.array([float(r[2]) for r in t_rows])
        T = len(t_rows)
        joint = np.zeros((30, T))
        for j, t, v in j_rows:
            joint[int(j), int(t)] = float(v)
        out = netmod.forward(sess.net_params, sample.sequence)
        want = intensity_score(out.temporal, out.joint,
                               d_t)
        got = intensity_score(a_t, joint, d_t)
        assert abs(got.intensity - want.intensity) <= 1e-12

    def test_collision_refused_unless_forced(self, tmp_path, session):
        sess, _ = session
        seq = _tiny_corpus()[0].sequence
        pipeline.export_attention(sess, seq, tmp_path / "attn")
        with pytest.raises(IoFailure):
            pipeline.export_attention(sess, seq, tmp_path / "attn")
        pipeline.export_attention(sess, seq, tmp_path / "attn", force=True)


class TestBellFit:
    def test_recovers_known_parameters(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1.0, 2.0, size=400)
        true = pipeline.BellFit(center=0.3, width=1.2, slope=2.0, residual=0.0)
        fit = pipeline.fit_bell_membership(x, true(x))
        assert math.isclose(fit.center, 0.3, abs_tol=1e-3)
        assert math.isclose(fit.width, 1.2, rel_tol=1e-2)
        assert math.isclose(fit.slope, 2.0, rel_tol=1e-2)
        assert fit.residual <= 1e-6

    def test_peak_value_one_at_center(self):
        fit = pipeline.BellFit(center=0.5, width=0.2, slope=3.0, residual=0.0)
        assert fit(0.5) == 1.0
        assert fit(0.9) < 1.0

    def test_too_few_points(self):
        with pytest.raises(DegenerateData):
            pipeline.fit_bell_membership([0.1, 0.2], [1.0, 0.5])

    def test_constant_input_rejected(self):
        with pytest.raises(DegenerateData):
            pipeline.fit_bell_membership([0.4] * 10, [1.0] * 10)


@pytest.fixture(scope="module")
def cv(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    man = generate_corpus(GenParams(seed=3), 4, root)
    return man, root, pipeline.run_cv(man, root, _tiny_config(), 2, 3)


class TestEvaluation:
    def test_every_sample_predicted_once(self, cv):
        man, _, res = cv
        assert len(res["records"]) == len(man.entries)

    def test_report_metric_identities(self, cv):
        _, _, res = cv
        rep = pipeline.build_report(res)
        conf = np.array(rep["action_recognition"]["confusion"])
        assert conf.sum() == len(res["records"])
        acc = conf.trace() / conf.sum()
        assert math.isclose(rep["action_recognition"]["overall_accuracy"],
                            acc, rel_tol=1e-12)
        for i, action in enumerate(ACTIONS):
            want = conf[i, i] / conf[i].sum()
            got = rep["action_recognition"]["per_action_accuracy"][action]
            assert math.isclose(got, want, rel_tol=1e-12)
        overall = rep["intensity"]["overall"]
        labeled = [r for r in res["records"]
                   if r["intensity"] in ("mild", "intense")]
        hand = np.mean([r["fuzzy_pred"] == r["intensity"] for r in labeled])
        assert math.isclose(overall["accuracy"], hand, rel_tol=1e-12)

    def test_baseline_report_schema_and_delta(self, cv):
        _, _, res = cv
        fuzzy = pipeline.build_report(res)
        base = pipeline.build_report(res, method="baseline-logistic")
        assert base["method"] == "baseline-logistic"
        delta = fuzzy["intensity"]["overall"]["accuracy"] \
            - base["intensity"]["overall"]["accuracy"]
        assert math.isclose(base["fuzzy_minus_baseline_accuracy"], delta,
                            abs_tol=1e-12)

    def test_reports_byte_identical_across_reruns(self, cv):
        man, root, res = cv
        res2 = pipeline.run_cv(man, root, _tiny_config(), 2, 3)
        a = json.dumps(pipeline.build_report(res), sort_keys=True)
        b = json.dumps(pipeline.build_report(res2), sort_keys=True)
        assert a == b


class TestConfig:
    def test_dict_round_trip(self):
        cfg = _tiny_config(t_norm="product", s_norm="probabilistic-sum",
                           sigma=0.4)
        back = pipeline.PipelineConfig.from_dict(cfg.to_dict())
        assert back.to_dict() == cfg.to_dict()
