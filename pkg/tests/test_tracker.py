import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ibccf import admm, cf, tracker
from ibccf.errors import InitializationError, ParameterError, UndefinedAngleError
from ibccf.geometry import SIDES, BoundaryBox, iou
from ibccf.synthetic import SynthSpec, synth_sequence


def _seq(**kw):
    base = dict(frames=2, noise=1.0, seed=3)
    base.update(kw)
    return synth_sequence(SynthSpec(**base))


def test_init_then_detect_same_frame():
    seq = _seq()
    state = tracker.init(seq.frames[0], seq.groundtruth[0])
    box, _ = tracker.detect(state, tracker.prepare_frame(seq.frames[0]))
    assert iou(box, seq.groundtruth[0]) >= 0.9


def test_init_with_mu_zero_gives_independent_filters():
    seq = _seq()
    cfg = tracker.TrackerConfig(mu=0.0)
    box = seq.groundtruth[0]
    state = tracker.init(seq.frames[0], box, cfg)
    gray = tracker.prepare_frame(seq.frames[0])
    x = tracker.center_features(gray, box, state.template, cfg)
    ref = cf.train_center_filter(x, tracker.center_label(state.template, cfg), cfg.lam)
    np.testing.assert_allclose(state.center.spatial(), ref.spatial(), atol=1e-8)
    for s in SIDES:
        xb = tracker.boundary_features(gray, box, state.template, cfg, s)
        refb = cf.train_boundary_filter(xb, tracker.boundary_label(state.template, cfg, s), cfg.lam, s)
        np.testing.assert_allclose(state.boundary[s].spatial(), refb.spatial(), atol=1e-8)
    assert state.diagnostics.admm_iterations == 1


def test_degenerate_box_rejected():
    seq = _seq()
    with pytest.raises(InitializationError):
        tracker.init(seq.frames[0], BoundaryBox(10, 11, 10, 11))
    with pytest.raises(InitializationError):
        tracker.init(seq.frames[0], BoundaryBox(1000, 1040, 10, 50))


def test_static_scene_keeps_box():
    seq = _seq()
    state = tracker.init(seq.frames[0], seq.groundtruth[0])
    _, box = tracker.step(state, seq.frames[0])
    assert iou(box, seq.groundtruth[0]) >= 0.9


def test_translation_five_pixels():
    seq = _seq(velocity_x=5.0)
    state = tracker.init(seq.frames[0], seq.groundtruth[0])
    box, diag = tracker.detect(state, tracker.prepare_frame(seq.frames[1]))
    sx, _ = state.template.px_per_cell(seq.groundtruth[0])
    dr, dc = diag.center_shift
    assert abs(dc * sx - 5.0) <= sx and abs(dr) <= 1


def _mean_iou(seq, cfg):
    state = tracker.init(seq.frames[0], seq.groundtruth[0], cfg)
    out = []
    for frame, gt in zip(seq.frames[1:], seq.groundtruth[1:]):
        state, box = tracker.step(state, frame)
        out.append(iou(box, gt))
    return float(np.mean(out))


def test_widening_target_full_beats_center_only():
    seq = _seq(frames=20, width=30.0, height=60.0, width_rate=0.10, frame_width=480)
    full = _mean_iou(seq, tracker.TrackerConfig())
    center = _mean_iou(seq, tracker.TrackerConfig(disable_boundaries=True))
    assert full >= center


def test_orthogonality_moves_angles_toward_ninety():
    seq = _seq()
    dev = {}
    for mu in (0.0, 0.1):
        state = tracker.init(seq.frames[0], seq.groundtruth[0], tracker.TrackerConfig(mu=mu))
        dev[mu] = np.mean([abs(90 - a) for a in tracker.angle_report(state).values()])
    assert dev[0.1] <= dev[0.0]


def test_angle_report_zero_filters():
    seq = _seq()
    state = tracker.init(seq.frames[0], seq.groundtruth[0])
    zero = cf.center_filter_from_coeffs(np.ones(state.center.shape), np.zeros(state.center.shape), 1e-4)
    with pytest.raises(UndefinedAngleError):
        tracker.angle_report(dataclasses.replace(state, center=zero))


def test_angle_report_needs_boundaries():
    seq = _seq()
    state = tracker.init(seq.frames[0], seq.groundtruth[0], tracker.TrackerConfig(disable_boundaries=True))
    with pytest.raises(ParameterError):
        tracker.angle_report(state)


@settings(max_examples=50)
@given(arrays(float, 6, elements=st.floats(-1e6, 1e6)), arrays(float, 6, elements=st.floats(-1e6, 1e6)))
def test_angles_in_range(a, b):
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return
    assert 0.0 <= admm.vector_angle(a, b) <= 180.0


def test_template_is_fixed_and_even():
    cfg = tracker.TrackerConfig()
    tpl = tracker.Template.for_box(BoundaryBox(0, 30, 0, 110), cfg)
    assert tpl.tw % 2 == 0 and tpl.th % 2 == 0
    assert tpl.center_spec.rows == 2 * tpl.th and tpl.center_spec.cols == 2 * tpl.tw


def test_config_validation(monkeypatch):
    with pytest.raises(ParameterError):
        tracker.TrackerConfig(features="color")
    with pytest.raises(ParameterError):
        tracker.TrackerConfig(rho=-1.0)
    with pytest.raises(ParameterError):
        tracker.TrackerConfig(eta=2.0)
    with pytest.raises(ParameterError):
        tracker.TrackerConfig(channel_weights=(1.0, 2.0))
    assert tracker.TrackerConfig(channel_weights=(1.0,) * 11).weights.shape == (11,)
    monkeypatch.setenv("IBCCF_THREADS", "3")
    assert tracker.TrackerConfig().resolved_threads() == 3
    assert tracker.TrackerConfig(threads=2).resolved_threads() == 2


def test_step_is_deterministic():
    seq = _seq(frames=4, velocity_x=2.0, width_rate=0.05)
    boxes = []
    for _ in range(2):
        state = tracker.init(seq.frames[0], seq.groundtruth[0])
        run = []
        for f in seq.frames[1:]:
            state, b = tracker.step(state, f)
            run.append(b)
        boxes.append(run)
    assert boxes[0] == boxes[1]
