import subprocess
import sys

import numpy as np
import pytest

from ibccf import admm, cli, selftest
from ibccf.errors import DataError, UsageError
from ibccf.geometry import BoundaryBox
from ibccf.sequence_io import (format_key_values, load_sequence, parse_key_values, read_boxes,
                               save_sequence, write_boxes)
from ibccf.synthetic import SynthSpec, synth_sequence
from ibccf.tracker import TrackerConfig

SPEC = """\
# small moving, stretching target
frame_width = 160
frame_height = 120
frames = 5
center_x = 80
center_y = 60
width = 24
height = 40
velocity_x = 1.5
width_rate = 0.03
noise = 2
seed = 4
name = tiny
"""


@pytest.fixture
def seq_dir(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text(SPEC)
    assert cli.main(["synth", "--config", str(spec), "--out", str(tmp_path / "tiny")]) == 0
    return tmp_path / "tiny"


def test_synth_writes_otb_layout(seq_dir):
    assert sorted(p.name for p in (seq_dir / "img").iterdir()) == [f"{i:04d}.png" for i in range(1, 6)]
    assert len((seq_dir / "groundtruth_rect.txt").read_text().splitlines()) == 5


def test_ground_truth_round_trips_exactly(tmp_path):
    seq = synth_sequence(SynthSpec(frames=6, velocity_x=1.3, width_rate=0.07, height_rate=-0.03, seed=2))
    save_sequence(seq, tmp_path / "s")
    back = load_sequence(tmp_path / "s")
    assert back.groundtruth == seq.groundtruth
    for a, b in zip(back.frames, seq.frames):
        np.testing.assert_array_equal(a, b)


def test_track_one_line_per_frame(seq_dir, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["track", "--seq", str(seq_dir), "--out", str(out)]) == 0
    lines = (out / "results.txt").read_text().splitlines()
    assert len(lines) == 5
    assert read_boxes(out / "results.txt")[0] == read_boxes(seq_dir / "groundtruth_rect.txt")[0]
    manifest = (out / "manifest.txt").read_text()
    assert "sequence = tiny" in manifest and "config.mu = 0.1" in manifest and "version = " in manifest
    diag = (out / "diagnostics.log").read_text().splitlines()
    assert diag[0].startswith("frame ") and len(diag) == 6


def test_track_is_byte_identical(seq_dir, tmp_path):
    for name in ("a", "b"):
        assert cli.main(["track", "--seq", str(seq_dir), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "results.txt").read_bytes() == (tmp_path / "b" / "results.txt").read_bytes()


def test_track_flags_reach_config(seq_dir, tmp_path):
    out = tmp_path / "flags"
    assert cli.main(["track", "--seq", str(seq_dir), "--out", str(out), "--mu", "0",
                     "--disable-boundaries"]) == 0
    manifest = (out / "manifest.txt").read_text()
    assert "config.mu = 0.0" in manifest and "config.disable_boundaries = true" in manifest


def test_track_missing_groundtruth(seq_dir, tmp_path, capsys):
    (seq_dir / "groundtruth_rect.txt").unlink()
    assert cli.main(["track", "--seq", str(seq_dir), "--out", str(tmp_path / "x")]) == 2
    assert "ground-truth" in capsys.readouterr().err


def test_track_unreadable_frame(seq_dir, tmp_path, capsys):
    (seq_dir / "img" / "0003.png").write_bytes(b"not an image")
    assert cli.main(["track", "--seq", str(seq_dir), "--out", str(tmp_path / "x")]) == 3
    assert "0003.png" in capsys.readouterr().err


def test_track_unknown_config_key(seq_dir, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mu = 0.1\nlamda = 1e-4\n")
    assert cli.main(["track", "--seq", str(seq_dir), "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2


def test_eval_perfect_results(seq_dir, tmp_path, capsys):
    gt = seq_dir / "groundtruth_rect.txt"
    assert cli.main(["eval", "--results", str(gt), "--seq", str(seq_dir), "--out", str(tmp_path / "ev")]) == 0
    out = capsys.readouterr().out
    assert "OP(0.5) = 1.000" in out and "AUC = 0.952" in out
    rows = (tmp_path / "ev" / "success_tiny.csv").read_text().splitlines()
    assert rows[0] == "threshold,op" and rows[1] == "0.00,1.0" and rows[-1] == "1.00,0.0"
    assert len(rows) == 22


def test_eval_hand_fixture(tmp_path, capsys):
    seq = tmp_path / "hand"
    (seq / "img").mkdir(parents=True)
    gt = BoundaryBox(0.0, 10.0, 0.0, 10.0)
    write_boxes(seq / "groundtruth_rect.txt", [gt] * 4)
    preds = [gt] + [BoundaryBox(10 - a, 20 - a, 0.0, 10.0) for a in (20 * t / (1 + t) for t in (0.2, 0.6, 0.7))]
    write_boxes(tmp_path / "res.txt", preds)
    assert cli.main(["eval", "--results", str(tmp_path / "res.txt"), "--seq", str(seq)]) == 0
    assert "OP(0.5) = 0.667" in capsys.readouterr().out


def test_eval_malformed_line(seq_dir, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    lines = (seq_dir / "groundtruth_rect.txt").read_text().splitlines()
    lines[2] = "1,2,three,4"
    bad.write_text("\n".join(lines) + "\n")
    assert cli.main(["eval", "--results", str(bad), "--seq", str(seq_dir)]) == 3
    assert "bad.txt:3" in capsys.readouterr().err


def test_eval_length_mismatch(seq_dir, tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("\n".join((seq_dir / "groundtruth_rect.txt").read_text().splitlines()[:3]) + "\n")
    assert cli.main(["eval", "--results", str(short), "--seq", str(seq_dir)]) == 3


def test_read_boxes_accepts_tabs(tmp_path):
    p = tmp_path / "gt.txt"
    p.write_text("1\t2\t3\t4\n")
    assert read_boxes(p) == [BoundaryBox(1.0, 4.0, 2.0, 6.0)]
    p.write_text("1,2,3\n")
    with pytest.raises(DataError, match=":1:"):
        read_boxes(p)


def test_config_round_trip():
    cfg = TrackerConfig(mu=0.25, rho=3.0, channel_weights=(0.5,) * 11, disable_boundaries=True)
    back = TrackerConfig(**parse_key_values(format_key_values(cfg), TrackerConfig))
    assert back == cfg
    auto = TrackerConfig(**parse_key_values("rho = auto\nthreads = 2\n", TrackerConfig))
    assert auto.rho is None and auto.threads == 2
    with pytest.raises(UsageError):
        parse_key_values("eta = fast\n", TrackerConfig)
    with pytest.raises(UsageError):
        parse_key_values("just words\n", TrackerConfig)


def test_synth_generation_error_exit_code(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("frames = 40\nvelocity_x = 20\n")
    assert cli.main(["synth", "--config", str(spec), "--out", str(tmp_path / "o")]) == 3


def test_synth_aspect_preset(tmp_path):
    assert cli.main(["synth", "--preset", "aspect", "--out", str(tmp_path / "a")]) == 0
    assert len(read_boxes(tmp_path / "a" / "groundtruth_rect.txt")) == 30


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert sum(line.startswith("PASS") for line in out.splitlines()) >= 6


def test_selftest_catches_perturbed_u_update(capsys):
    def perturbed(*args):
        return admm.solve_uk(*args) + 1e-3

    assert not cli.cmd_selftest(solve_uk_fn=perturbed)
    captured = capsys.readouterr()
    assert "FAIL Sherman-Morrison" in captured.out
    assert "Sherman-Morrison" in captured.err and "achieved 1.000e-03" in captured.err
    names = [r.name for r in selftest.run_selftest()]
    assert len(set(names)) >= 6


def test_usage_errors():
    with pytest.raises(SystemExit) as err:
        cli.main(["track"])
    assert err.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["fly"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ibccf", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
