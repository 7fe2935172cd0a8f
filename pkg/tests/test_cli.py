import contextlib
import io
import json
from pathlib import Path

import numpy as np
import pytest

from uars import cli
from uars.io.images import load_image, save_image
from uars.io.ply import load_ply, save_ply
from uars.io.tensor import load_tensor, save_tensor

from conftest import make_scene
from malformed import CORPUS, EXTRA

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = [None, "refine", "render", "entropy", "fst", "metrics", "synth"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            rc = cli.main([str(a) for a in argv])
        except SystemExit as e:
            rc = e.code
    return rc, out.getvalue(), err.getvalue()


def help_text(cmd):
    return run(*([cmd] if cmd else []), "--help")[1]


@pytest.mark.parametrize("cmd", COMMANDS, ids=lambda c: c or "main")
def test_help_matches_golden(cmd):
    golden = GOLDEN / f"help_{cmd or 'main'}.txt"
    assert help_text(cmd) == golden.read_text()


def test_refine_help_lists_every_flag_with_default():
    text = help_text("refine")
    for flag, section, name, _, _ in cli._REFINE_FLAGS:
        assert flag in text
        assert f"(default: {cli._default_of(section, name)})" in text
    for flag, *_ in cli._REFINE_SWITCHES:
        assert flag in text


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    cfg = {"gaussian_count": 30, "height": 32, "width": 48, "n_cameras": 5, "holdout": 1, "seed": 3}
    (d / "cfg.json").write_text(json.dumps(cfg))
    rc, _, err = run("synth", "--config", d / "cfg.json", "--outdir", d / "out", "--image-format", "uars")
    assert rc == 0, err
    return d / "out"


def test_synth_writes_layout(synth_dir):
    man = json.loads((synth_dir / "manifest.json").read_text())
    assert len(man["views"]) == 4 and len(man["eval_views"]) == 1
    assert man["input_image"] == man["views"][0]["image"]
    assert len(load_ply(synth_dir / "scene.ply")) == 30


def test_refine_fixed_point_and_determinism(synth_dir, tmp_path):
    outs = []
    for k in range(2):
        rc, stdout, err = run(
            "refine", "--scene", synth_dir / "scene.ply", "--manifest", synth_dir / "manifest.json",
            "--out", tmp_path / f"o{k}.ply", "--report", tmp_path / f"r{k}.jsonl", "--steps", 5, "--no-fst", "--no-adp",
        )
        assert rc == 0, err
        outs.append(((tmp_path / f"o{k}.ply").read_bytes(), (tmp_path / f"r{k}.jsonl").read_bytes()))
    assert outs[0] == outs[1]
    records = [json.loads(line) for line in outs[0][1].decode().splitlines()]
    assert records[0]["config"]["steps"] == 5 and records[0]["input_gaussians"] == 30
    assert records[1]["step"] == 0 and records[1]["loss"] <= 1e-6
    assert "final_psnr" in records[-1]
    assert "final_psnr" in json.loads(stdout)


def test_config_file_and_flag_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"steps": 7, "seed": 4, "adp": {"enabled": False, "prune_opacity": 0.01}, "fst": {"beta": 0.02}}))
    args = cli._parser().parse_args(["refine", "--scene", "s", "--manifest", "m", "--out", "o", "--report", "r",
                                     "--config", str(tmp_path / "c.json"), "--seed", "9", "--no-fst"])
    cfg = cli.build_refine_config(args)
    assert (cfg.steps, cfg.seed) == (7, 9)
    assert cfg.adp.prune_opacity == 0.01 and cfg.adp.densify_interval == cli._A.densify_interval
    assert cfg.fst.beta == 0.02 and cfg.fst.enabled is False


def test_densify_window_past_steps_exit_2(synth_dir, tmp_path):
    rc, _, err = run("refine", "--scene", synth_dir / "scene.ply", "--manifest", synth_dir / "manifest.json",
                     "--out", tmp_path / "o.ply", "--report", tmp_path / "r.jsonl", "--steps", 50)
    assert rc == 2 and "densify_end (800) exceeds steps (50)" in err


def test_bad_config_value_exit_2(synth_dir, tmp_path):
    rc, _, err = run("refine", "--scene", synth_dir / "scene.ply", "--manifest", synth_dir / "manifest.json",
                     "--out", tmp_path / "o.ply", "--report", tmp_path / "r.jsonl", "--steps", 0)
    assert rc == 2 and err.count("\n") == 1 and err.startswith("uars refine: error:")


def test_metrics_identical(tmp_path):
    img = np.random.default_rng(0).uniform(size=(20, 24, 3))
    save_image(img, tmp_path / "a.png")
    rc, out, _ = run("metrics", "--a", tmp_path / "a.png", "--b", tmp_path / "a.png")
    assert rc == 0 and json.loads(out) == {"psnr": 100.0, "ssim": 1.0}


def test_metrics_mismatch_exit_2(tmp_path):
    save_image(np.zeros((4, 4, 3)), tmp_path / "a.png")
    save_image(np.zeros((4, 5, 3)), tmp_path / "b.png")
    assert run("metrics", "--a", tmp_path / "a.png", "--b", tmp_path / "b.png")[0] == 2


def test_fst_self_transfer_within_one_lsb(tmp_path):
    img = np.random.default_rng(1).uniform(size=(40, 56, 3))
    save_image(img, tmp_path / "c.png")
    rc, _, err = run("fst", "--content", tmp_path / "c.png", "--style", tmp_path / "c.png", "--out", tmp_path / "o.png")
    assert rc == 0, err
    a = np.rint(load_image(tmp_path / "c.png") * 255)
    b = np.rint(load_image(tmp_path / "o.png") * 255)
    assert np.abs(a - b).max() <= 1


def test_entropy_uniform_is_white(tmp_path):
    save_tensor(np.zeros((6, 7, 4)), tmp_path / "l.uars")
    assert run("entropy", "--logits", tmp_path / "l.uars", "--out", tmp_path / "u.png")[0] == 0
    assert np.all(load_image(tmp_path / "u.png") == 1.0)
    assert run("entropy", "--logits", tmp_path / "l.uars", "--out", tmp_path / "u.uars")[0] == 0
    np.testing.assert_allclose(load_tensor(tmp_path / "u.uars"), 1.0, atol=1e-6)


def test_render_matches_library(tmp_path):
    from uars.io.manifest import load_camera
    from uars.raster.render import render

    scene = make_scene(8, seed=2)
    save_ply(scene, tmp_path / "s.ply")
    cam = {"fx": 40.0, "fy": 40.0, "cx": 16, "cy": 12, "width": 32, "height": 24, "world_to_camera": np.eye(4).ravel().tolist()}
    (tmp_path / "cam.json").write_text(json.dumps(cam))
    assert run("render", "--scene", tmp_path / "s.ply", "--camera", tmp_path / "cam.json", "--out", tmp_path / "r.uars")[0] == 0
    want = render(load_ply(tmp_path / "s.ply"), load_camera(tmp_path / "cam.json")).color
    np.testing.assert_array_equal(load_image(tmp_path / "r.uars"), want.astype(np.float32).astype(np.float64))


def test_missing_logits_exit_2_names_path(tmp_path):
    _, path, _ = EXTRA[0](tmp_path)
    save_ply(make_scene(3), tmp_path / "s.ply")
    rc, _, err = run("refine", "--scene", tmp_path / "s.ply", "--manifest", path, "--out", tmp_path / "o.ply", "--report", tmp_path / "r", "--steps", 5, "--no-adp")
    assert rc == 2 and "gone.uars" in err and err.count("\n") == 1
    assert not (tmp_path / "o.ply").exists()


def cli_args_for(kind, path, d):
    if kind == "ply":
        return ["render", "--scene", path, "--camera", d / "cam.json", "--out", d / "o.png"]
    if kind == "tensor":
        return ["entropy", "--logits", path, "--out", d / "o.png"]
    if kind == "image":
        return ["metrics", "--a", path, "--b", path]
    save_ply(make_scene(3), d / "s.ply")
    return ["refine", "--scene", d / "s.ply", "--manifest", path, "--out", d / "o.ply", "--report", d / "r", "--steps", 1, "--no-adp"]


@pytest.mark.parametrize("build", CORPUS + EXTRA, ids=lambda f: f.__name__)
def test_malformed_inputs_exit_2(build, tmp_path):
    kind, path, code = build(tmp_path)
    (tmp_path / "cam.json").write_text(json.dumps({"fx": 8.0, "fy": 8.0, "cx": 4, "cy": 4, "width": 8, "height": 8,
                                                   "world_to_camera": np.eye(4).ravel().tolist()}))
    rc, _, err = run(*cli_args_for(kind, path, tmp_path))
    assert rc == 2
    assert err.count("\n") == 1 and f"[{code}]" in err
