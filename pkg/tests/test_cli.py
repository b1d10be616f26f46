"""End-to-end tests of the command-line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from shadowphys.cli import main
from shadowphys.imagecore import Image, SoftMask, read_image, write_image, write_mask, write_tensor
from shadowphys.synth import SceneParams, generate


def _angle_gap(a, b):
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def _write_random_image(path, seed, h=48, w=64):
    rng = np.random.default_rng(seed)
    write_image(Image(rng.uniform(0.1, 0.9, (h, w, 3))), path)


# ---------- synth + chroma ----------


def test_synth_then_chroma_recovers_gt_angle(tmp_path):
    d = tmp_path / "d"
    assert main(["synth", "--n", "1", "--seed", "42", "--out-dir", str(d), "--quiet"]) == 0
    assert main(["chroma", str(d / "shadow.png"), "--out-dir", str(d), "--quiet"]) == 0
    meta = json.loads((d / "meta.json").read_text())
    theta = json.loads((d / "theta.json").read_text())
    assert _angle_gap(theta["angle_degrees"], meta["gt_angle"]) <= 2.0
    assert len(theta["profile_bits"]) == 180
    for payload in (meta, theta):
        assert payload["tool_version"]
        assert "resolved_flags" in payload
    assert (d / "sigma_phy.png").exists() and (d / "sigma_ent.png").exists()


def test_synth_multi_scene_layout_and_16bit_storage(tmp_path):
    d = tmp_path / "scenes"
    assert main(["synth", "--n", "2", "--seed", "5", "--out-dir", str(d), "--quiet"]) == 0
    assert (d / "scene_000" / "shadow.png").exists()
    assert (d / "scene_001" / "meta.json").exists()
    # stored scene must match the in-memory scene to 16-bit precision
    scene = generate(SceneParams(seed=5))
    stored = np.asarray(read_image(d / "scene_000" / "shadow.png").data)
    assert np.abs(stored - np.asarray(scene.shadow_image.data)).max() <= 0.5 / 65535.0 + 1e-12
    meta = json.loads((d / "scene_000" / "meta.json").read_text())
    assert meta["gt_angle"] == pytest.approx(scene.gt_angle.degrees)
    assert meta["params"]["seed"] == 5


def test_synth_soft_mode_draws_per_scene_params(tmp_path):
    d = tmp_path / "soft"
    assert main(["synth", "--n", "2", "--seed", "9", "--out-dir", str(d), "--soft", "--quiet"]) == 0
    a = json.loads((d / "scene_000" / "meta.json").read_text())["params"]
    b = json.loads((d / "scene_001" / "meta.json").read_text())["params"]
    assert a["penumbra_sigma"] != b["penumbra_sigma"]
    assert 4.0 <= a["penumbra_sigma"] <= 6.0
    assert 0.4 <= a["shadow_strength"] <= 1.0


# ---------- losses ----------


def test_losses_identity_all_terms_zero(tmp_path):
    x = tmp_path / "x.png"
    _write_random_image(x, 3)
    assert main(
        ["losses", "--input", str(x), "--output", str(x), "--out-dir", str(tmp_path), "--quiet"]
    ) == 0
    report = json.loads((tmp_path / "loss_report.json").read_text())
    for key in ("chroma", "feature", "smooth", "cons_s", "iden_s", "total"):
        assert report[key] == 0.0, key
    assert report["feature_source"] == "standin"


def test_losses_with_sptn_features(tmp_path):
    x, z = tmp_path / "x.png", tmp_path / "z.png"
    _write_random_image(x, 4)
    _write_random_image(z, 5)
    rng = np.random.default_rng(6)
    f1 = rng.normal(size=(8, 12, 12)).astype(np.float32)
    f2 = f1 + 0.5
    write_tensor(f1, tmp_path / "f1.sptn")
    write_tensor(f2, tmp_path / "f2.sptn")
    assert main(
        [
            "losses",
            "--input", str(x), "--output", str(z),
            "--features-in", str(tmp_path / "f1.sptn"),
            "--features-out", str(tmp_path / "f2.sptn"),
            "--out-dir", str(tmp_path), "--quiet",
        ]
    ) == 0
    report = json.loads((tmp_path / "loss_report.json").read_text())
    assert report["feature"] == pytest.approx(0.5, abs=1e-6)
    assert report["feature_source"] == "sptn"


def test_losses_lone_feature_flag_is_usage_error(tmp_path, capsys):
    x = tmp_path / "x.png"
    _write_random_image(x, 7)
    code = main(
        ["losses", "--input", str(x), "--output", str(x), "--features-in", "only.sptn"]
    )
    assert code == 1
    assert "together" in capsys.readouterr().err


def test_losses_weights_file(tmp_path):
    x, z = tmp_path / "x.png", tmp_path / "z.png"
    _write_random_image(x, 8)
    _write_random_image(z, 9)
    (tmp_path / "w.json").write_text(json.dumps({"iden": 0.0, "cons": 0.0}))
    for name, weights in (("a", None), ("b", tmp_path / "w.json")):
        argv = ["losses", "--input", str(x), "--output", str(z),
                "--out-dir", str(tmp_path / name), "--quiet"]
        if weights is not None:
            argv += ["--weights", str(weights)]
        assert main(argv) == 0
    full = json.loads((tmp_path / "a" / "loss_report.json").read_text())
    dropped = json.loads((tmp_path / "b" / "loss_report.json").read_text())
    assert dropped["total"] < full["total"]
    assert dropped["iden_s"] == full["iden_s"]  # raw terms unchanged


def test_losses_unknown_weight_key_is_validation_error(tmp_path):
    x = tmp_path / "x.png"
    _write_random_image(x, 10)
    (tmp_path / "w.json").write_text(json.dumps({"bogus": 1.0}))
    code = main(
        ["losses", "--input", str(x), "--output", str(x),
         "--weights", str(tmp_path / "w.json"), "--quiet"]
    )
    assert code == 3


def test_losses_physics_chroma_target(tmp_path):
    x = tmp_path / "x.png"
    _write_random_image(x, 11)
    assert main(
        ["losses", "--input", str(x), "--output", str(x), "--chroma-target", "physics",
         "--out-dir", str(tmp_path), "--quiet"]
    ) == 0
    report = json.loads((tmp_path / "loss_report.json").read_text())
    # the physics target differs from the image's own chromaticity
    assert report["chroma"] > 0.0


# ---------- mask / boundary ----------


def test_mask_and_boundary_commands(tmp_path):
    i, z = tmp_path / "i.png", tmp_path / "z.png"
    rng = np.random.default_rng(12)
    base = rng.uniform(0.4, 0.8, (40, 40, 3))
    dark = base.copy()
    dark[10:30, 10:30] *= 0.5
    write_image(Image(dark), i)
    write_image(Image(base), z)
    assert main(["mask", str(i), str(z), "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "mask.png").exists()
    assert main(
        ["boundary", str(tmp_path / "mask.png"), "--tau", "0.01",
         "--out-dir", str(tmp_path), "--quiet"]
    ) == 0
    assert (tmp_path / "boundary.png").exists()


# ---------- eval ----------


def _make_eval_dirs(tmp_path, n=2):
    res, gt = tmp_path / "res", tmp_path / "gt"
    res.mkdir()
    gt.mkdir()
    for i in range(n):
        _write_random_image(gt / f"s{i}.png", 100 + i)
        _write_random_image(res / f"s{i}.png", 200 + i)
    return res, gt


def test_eval_self_is_zero_and_writes_csv(tmp_path):
    _, gt = _make_eval_dirs(tmp_path)
    out = tmp_path / "rep.json"
    assert main(
        ["eval", "--results", str(gt), "--gt", str(gt), "--out", str(out), "--quiet"]
    ) == 0
    report = json.loads(out.read_text())
    assert report["aggregate"]["mae_all"] == 0.0
    assert report["aggregate"]["psnr"] == 99.0
    assert report["protocol"]["tool_version"]
    assert (tmp_path / "rep.csv").exists()


def test_eval_unpaired_exits_3(tmp_path, capsys):
    res, gt = _make_eval_dirs(tmp_path)
    _write_random_image(res / "orphan.png", 300)
    code = main(
        ["eval", "--results", str(res), "--gt", str(gt),
         "--out", str(tmp_path / "rep.json"), "--quiet"]
    )
    assert code == 3
    assert "orphan" in capsys.readouterr().err
    # report still written, orphan listed
    report = json.loads((tmp_path / "rep.json").read_text())
    assert report["unpaired_results"] == ["orphan"]


def test_eval_bit_identical_across_threads(tmp_path):
    res, gt = _make_eval_dirs(tmp_path, n=3)
    out = tmp_path / "rep.json"
    blobs = []
    for threads in ("1", "5"):
        assert main(
            ["eval", "--results", str(res), "--gt", str(gt), "--out", str(out),
             "--threads", threads, "--quiet"]
        ) == 0
        blobs.append((out.read_bytes(), (tmp_path / "rep.csv").read_bytes()))
    assert blobs[0] == blobs[1]


def test_threads_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SHADOWPHYS_THREADS", "not-a-number")
    res, gt = _make_eval_dirs(tmp_path)
    code = main(
        ["eval", "--results", str(gt), "--gt", str(gt),
         "--out", str(tmp_path / "r.json"), "--quiet"]
    )
    assert code == 1
    assert "SHADOWPHYS_THREADS" in capsys.readouterr().err
    monkeypatch.setenv("SHADOWPHYS_THREADS", "2")
    assert main(
        ["eval", "--results", str(gt), "--gt", str(gt),
         "--out", str(tmp_path / "r.json"), "--quiet"]
    ) == 0


# ---------- gradcheck ----------


def test_gradcheck_passes_and_prints_every_loss(capsys):
    assert main(["gradcheck", "--trials", "5", "--quiet"]) == 0
    out = capsys.readouterr().out
    for name in ("loss_chroma", "loss_smooth", "loss_feature", "loss_consistency", "loss_identity"):
        assert name in out


# ---------- exit codes and determinism ----------


def test_exit_codes(tmp_path, capsys):
    assert main(["chroma", str(tmp_path / "missing.png"), "--out-dir", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 1
    assert main(["synth", "--n", "0", "--out-dir", str(tmp_path)]) == 1
    capsys.readouterr()


@pytest.mark.filterwarnings("ignore:entropy profile is flat")
def test_flat_image_warns_flat_profile(tmp_path, capsys):
    flat = tmp_path / "flat.png"
    write_image(Image(np.full((32, 32, 3), 0.5)), flat)
    assert main(["chroma", str(flat), "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert "flat" in capsys.readouterr().err
    theta = json.loads((tmp_path / "theta.json").read_text())
    assert theta["flat_profile"] is True


def test_same_argv_twice_is_bit_identical(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        assert main(["synth", "--n", "1", "--seed", "3", "--out-dir", str(d), "--quiet"]) == 0
    for name in ("shadow.png", "shadowfree.png", "mask.png"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    # meta differs only in the echoed out-dir flag
    a = json.loads((d1 / "meta.json").read_text())
    b = json.loads((d2 / "meta.json").read_text())
    a["resolved_flags"].pop("out_dir")
    b["resolved_flags"].pop("out_dir")
    assert a == b


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "shadowphys.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "shadowphys" in proc.stdout
