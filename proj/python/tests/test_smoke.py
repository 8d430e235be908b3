import json

import numpy as np
import pytest

import ssfnet


def small_config(**train):
    cfg = ssfnet.config(["data.synth.frames=4", "data.synth.noise=0.0"])
    cfg["train"].update(train)
    return json.dumps(cfg)


def test_default_config_round_trips():
    cfg = json.loads(ssfnet.default_config())
    assert cfg["model"]["bands"] == 16
    assert ssfnet.config(["train.steps=3"])["train"]["steps"] == 3
    with pytest.raises(ssfnet.ConfigError):
        ssfnet.config(["train.nope=1"])


def test_synth_sequence_shapes():
    seq = ssfnet.synth_sequence(small_config())
    t, h, w, b = seq["hs"].shape
    assert (t, b) == (4, 16)
    assert seq["rgb"].shape == (t, h, w, 3)
    assert seq["boxes"].shape == (t, 4)
    assert np.all(seq["boxes"][:, 2:] > 0)


def test_metrics():
    assert ssfnet.iou([0, 0, 10, 10], [0, 0, 10, 10]) == pytest.approx(1.0)
    assert ssfnet.iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(1 / 3)
    assert ssfnet.center_error([0, 0, 4, 4], [3, 4, 4, 4]) == pytest.approx(5.0)
    curve, auc = ssfnet.success_auc([1.0, 1.0])
    # success counts IoU > t, so the t = 1 threshold is never met
    assert auc == pytest.approx(20 / 21)
    assert len(curve) == 21
    _, dp20 = ssfnet.precision_dp20([0.0, 30.0])
    assert dp20 == pytest.approx(0.5)
    boxes = np.array([[0, 0, 10, 10], [1, 1, 10, 10]], dtype=float)
    report = ssfnet.evaluate_boxes(boxes, boxes)
    assert report["auc"] == pytest.approx(20 / 21)


def test_sam_map_highlights_target():
    rng = np.random.default_rng(0)
    background = rng.uniform(0.2, 0.8, size=(12, 12, 8))
    target = np.linspace(1.0, 0.1, 8)
    background[5:7, 5:7] = target
    score = ssfnet.sam_map(background, target.tolist())
    assert score.shape == (12, 12)
    assert score[5, 5] > np.delete(score.ravel(), [5 * 12 + 5]).mean()


def test_model_forward_and_track():
    cfg = small_config()
    model = ssfnet.Model(cfg, seed=1)
    rng = np.random.default_rng(1)
    out = model.forward(rng.random((32, 32, 16)), rng.random((32, 32, 3)),
                        rng.random((96, 96, 16)), rng.random((96, 96, 3)))
    cls = out["combined"]["cls"]
    assert cls.shape[0] == 1 and cls.shape[-1] == 2
    assert np.all(out["combined"]["loc"] > 0)
    assert np.all(np.isfinite(out["hs"]["saa"]))

    seq = ssfnet.synth_sequence(cfg)
    boxes = model.track(seq["hs"], seq["rgb"], seq["boxes"])
    assert boxes.shape == seq["boxes"].shape
    np.testing.assert_allclose(boxes[0], seq["boxes"][0])
    assert np.all(np.isfinite(boxes))


def test_train_save_load(tmp_path):
    cfg = small_config(batch=1)
    seq = ssfnet.synth_sequence(cfg)
    model = ssfnet.Model(cfg, seed=2)
    losses = model.train(seq["hs"], seq["rgb"], seq["boxes"], steps=2)
    assert len(losses) == 2 and all(np.isfinite(losses))
    path = tmp_path / "m.ckpt"
    model.save(path)
    back = ssfnet.Model.load(path)
    assert back.lambdas == model.lambdas
    assert json.loads(back.config) == json.loads(model.config)


def test_shape_errors_surface_as_value_errors():
    model = ssfnet.Model()
    with pytest.raises(ValueError):
        model.track(np.zeros((2, 8, 8, 16)), np.zeros((3, 8, 8, 3)), np.zeros((2, 4)))
