"""Smoke tests for the python module: shapes, oracles, determinism."""

import numpy as np
import pytest

import sietrack as st


@pytest.fixture(scope="module")
def desk():
    cfg = st.ModelConfig.desk_scale()
    cfg.validate()
    weights = st.init_weights(cfg, 7)
    return cfg, weights


def test_encode_decode_roundtrip():
    size = st.PatchSize(120.0, 200.0)
    box = st.BoundingBox(30.0, 40.0, 90.0, 160.0)
    off = st.encode_offsets(box, size)
    assert off.values() == pytest.approx([-0.25, -0.30, 0.25, 0.30])
    back = st.decode_offsets(off, size)
    assert [back.x1, back.y1, back.x2, back.y2] == pytest.approx([30, 40, 90, 160])


def test_iou_value():
    a = st.BoundingBox(0, 0, 2, 2)
    b = st.BoundingBox(1, 1, 3, 3)
    assert st.iou(a, b) == pytest.approx(1.0 / 7.0)
    assert st.iou(a, a) == 1.0


def test_smooth_l1_values():
    assert st.smooth_l1(0.0, 1.0) == 0.0
    assert st.smooth_l1(2.0, 1.0) == pytest.approx(1.5)
    assert st.smooth_l1(1.0, 1.0) == pytest.approx(0.5)


def test_shapes_default_config():
    cfg = st.ModelConfig()
    cfg.validate()
    weights = st.init_weights(cfg, 1)
    rng = np.random.default_rng(0)
    tmpl = rng.random((125, 125, 3))
    det = rng.random((239, 239, 3))
    fz = st.extract_features(tmpl, weights, cfg)
    fx = st.extract_features(det, weights, cfg)
    assert fz.shape == (7, 7, 64)
    assert fx.shape == (15, 15, 64)
    corr = st.channelwise_correlate(st.se_recalibrate(fx, weights, cfg),
                                    st.se_recalibrate(fz, weights, cfg))
    assert corr.shape == (9, 9, 64)
    offsets = st.regress(corr, weights, cfg)
    assert len(offsets) == 4
    assert np.isfinite(offsets.values()).all()


def test_correlate_matches_numpy(desk):
    rng = np.random.default_rng(3)
    fx = rng.random((5, 6, 2))
    fz = rng.random((2, 3, 2))
    got = st.channelwise_correlate(fx, fz)
    expected = np.zeros((4, 4, 2))
    for k in range(2):
        for oy in range(4):
            for ox in range(4):
                expected[oy, ox, k] = np.sum(fx[oy:oy + 2, ox:ox + 3, k] * fz[:, :, k])
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_se_gate_bounds(desk):
    cfg, weights = desk
    rng = np.random.default_rng(4)
    f = rng.random((7, 7, cfg.channels))
    gate = st.se_gate(f, weights, cfg)
    assert all(0.0 < g < 1.0 for g in gate)
    out = st.se_recalibrate(f, weights, cfg)
    np.testing.assert_allclose(out, f * np.asarray(gate)[None, None, :], rtol=1e-12)


def test_parameter_count_default():
    assert st.parameter_count(st.ModelConfig()) == 64729


def test_synth_determinism_and_sampling():
    cfg = st.SynthConfig()
    cfg.frame_w, cfg.frame_h = 160, 120
    cfg.length = 12
    cfg.seed = 5
    seq_a = st.synth_sequence(cfg)
    seq_b = st.synth_sequence(cfg)
    assert len(seq_a) == 12
    np.testing.assert_array_equal(seq_a.frame(3), seq_b.frame(3))

    pair = st.sample_pair(seq_a, st.Rng(9), 47, 111)
    assert pair.template_patch.shape == (47, 47, 3)
    assert pair.detection_patch.shape == (111, 111, 3)
    assert all(-0.5 <= v <= 0.5 for v in pair.label.values())


def test_checkpoint_roundtrip(tmp_path, desk):
    cfg, weights = desk
    path = tmp_path / "w.ckpt"
    st.serialize_weights(path, weights, cfg)
    loaded, loaded_cfg = st.deserialize_weights(path)
    assert loaded.parameter_count() == weights.parameter_count()
    assert st.config_hash(loaded_cfg) == st.config_hash(cfg)


def test_tracker_runs_on_synth(desk):
    cfg, weights = desk
    scfg = st.SynthConfig()
    scfg.frame_w, scfg.frame_h = 160, 120
    scfg.length = 5
    scfg.seed = 11
    seq = st.synth_sequence(scfg)
    track = st.track_sequence(seq, weights, cfg, 0.5)
    assert len(track) == 5
    assert track[0].box == seq.annotations[0]
    tracker = st.Tracker(weights, cfg, 0.5)
    tracker.init(seq.frame(0), seq.annotations[0])
    box = tracker.update(seq.frame(1))
    assert box.area > 0


def test_evaluate_one_pass_perfect():
    gt = [st.BoundingBox(0, 0, 10, 10), st.BoundingBox(1, 1, 11, 11)]
    r = st.evaluate_one_pass(gt, gt)
    assert r.auc == pytest.approx(100.0 / 101.0)
    assert r.precision_at_20 == 1.0


def test_train_on_pairs_smoke():
    mcfg = st.ModelConfig.desk_scale()
    scfg = st.SynthConfig()
    scfg.frame_w, scfg.frame_h = 160, 120
    scfg.length = 10
    scfg.seed = 2
    seq = st.synth_sequence(scfg)
    rng = st.Rng(1)
    pairs = [st.sample_pair(seq, rng, mcfg.template_input, mcfg.detection_input)
             for _ in range(2)]
    tcfg = st.TrainConfig()
    tcfg.batch_size = 2
    weights, history = st.train_on_pairs(mcfg, tcfg, pairs, 2)
    assert len(history.step_loss) == 2
    assert np.isfinite(history.step_loss).all()
