"""``uars`` command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 numerical failure during refinement.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import PseudoView
from .fst import FstConfig, fst_transfer
from .harness import SynthConfig, synth_scene
from .io import FormatError, load_camera, load_image, load_manifest, load_ply, load_tensor, load_views, save_image, save_ply, save_tensor
from .io.manifest import manifest_dict
from .loss import LossConfig
from .metrics import psnr, ssim_value
from .raster import render
from .refine import AdpConfig, NumericalError, RefineConfig, refine
from .uncertainty import uncertainty_from_logits

EXIT_INPUT = 2
EXIT_NUMERIC = 3

_R, _A, _L, _F = RefineConfig(), AdpConfig(), LossConfig(), FstConfig()

# (flag, config section, field, type, help). Flags default to None so that a
# config file value survives unless the flag is given explicitly.
_REFINE_FLAGS = [
    ("--steps", None, "steps", int, "optimization steps"),
    ("--batch-size", None, "batch_size", int, "pseudo-views per step"),
    ("--lr-position-start", None, "lr_position_start", float, "initial position learning rate"),
    ("--lr-position-end", None, "lr_position_end", float, "final position learning rate"),
    ("--lr-rotation", None, "lr_rotation", float, "rotation learning rate"),
    ("--lr-scale", None, "lr_scale", float, "log-scale learning rate"),
    ("--lr-opacity", None, "lr_opacity", float, "opacity-logit learning rate"),
    ("--lr-color", None, "lr_color", float, "color learning rate"),
    ("--scale-band", None, "scale_band", float, "allowed scale deviation from the initial snapshot"),
    ("--seed", None, "seed", int, "random seed"),
    ("--densify-start", "adp", "densify_start", int, "first step eligible for densification"),
    ("--densify-end", "adp", "densify_end", int, "last step eligible for densification"),
    ("--densify-interval", "adp", "densify_interval", int, "steps between densification rounds"),
    ("--grad-threshold", "adp", "grad_threshold", float, "mean screen-space gradient that triggers densification"),
    ("--split-scale-fraction", "adp", "split_scale_fraction", float, "split (rather than clone) above this fraction of the scene extent"),
    ("--prune-opacity", "adp", "prune_opacity", float, "prune below this opacity"),
    ("--split-count", "adp", "split_count", int, "children per split Gaussian"),
    ("--alpha", "loss", "alpha", float, "weight of the SSIM term"),
    ("--ssim-window", "loss", "ssim_window", int, "SSIM Gaussian window size"),
    ("--ssim-sigma", "loss", "ssim_sigma", float, "SSIM Gaussian window sigma"),
    ("--beta", "fst", "beta", float, "FST low-frequency window size relative to min(H, W)"),
]

# (flag, section, field, value stored when the flag is given, help)
_REFINE_SWITCHES = [
    ("--no-adp", "adp", "enabled", False, "disable densification and pruning"),
    ("--no-fst", "fst", "enabled", False, "disable Fourier style transfer of the pseudo-views"),
    ("--literal-ssim", "loss", "literal_ssim", True, "add +alpha*SSIM instead of alpha*(1-SSIM)/2"),
    ("--relative-scale-band", None, "scale_band_mode", "relative", "treat --scale-band as a fraction of each snapshot scale"),
]


def _default_of(section, name):
    src = {None: _R, "adp": _A, "loss": _L, "fst": _F}[section]
    return getattr(src, name)


class CliError(Exception):
    """Invalid command-line input; reported with exit code 2."""


def _formatter(prog):
    # fixed width keeps --help output independent of the terminal
    return argparse.HelpFormatter(prog, width=100)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uars", description="Uncertainty-aware refinement of 3D Gaussian scenes.", formatter_class=_formatter)
    p.add_argument("--version", action="version", version=f"uars {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    r = sub.add_parser("refine", formatter_class=_formatter, help="refine a scene against posed pseudo-views")
    r.add_argument("--scene", required=True, help="input Gaussian PLY")
    r.add_argument("--manifest", required=True, help="view manifest (JSON)")
    r.add_argument("--out", required=True, help="output PLY")
    r.add_argument("--report", required=True, help="output report (JSON lines)")
    r.add_argument("--config", default=None, help="JSON config file; explicit flags override it (default: none)")
    for flag, section, name, typ, text in _REFINE_FLAGS:
        r.add_argument(flag, type=typ, default=None, help=f"{text} (default: {_default_of(section, name)})")
    for flag, _, _, _, text in _REFINE_SWITCHES:
        r.add_argument(flag, action="store_true", default=None, help=text)
    r.add_argument(
        "--background", type=float, nargs=3, default=None, metavar=("R", "G", "B"),
        help=f"background color (default: {' '.join(str(v) for v in _R.background)})",
    )
    r.add_argument("--probs", action="store_true", help="logits files already hold probabilities; skip the softmax")
    r.add_argument("--timings", action="store_true", help="include wall-clock step times in the report (breaks byte reproducibility)")

    rd = sub.add_parser("render", formatter_class=_formatter, help="render a scene through one camera")
    rd.add_argument("--scene", required=True, help="Gaussian PLY")
    rd.add_argument("--camera", required=True, help="camera JSON")
    rd.add_argument("--out", required=True, help="output PNG (or .uars tensor)")
    rd.add_argument("--background", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("R", "G", "B"), help="background color (default: 0 0 0)")

    e = sub.add_parser("entropy", formatter_class=_formatter, help="normalized entropy map of a logits tensor")
    e.add_argument("--logits", required=True, help="UARS tensor, H x W x C")
    e.add_argument("--out", required=True, help="output: .png writes 8-bit grayscale, anything else a UARS tensor")
    e.add_argument("--probs", action="store_true", help="input already holds probabilities")

    f = sub.add_parser("fst", formatter_class=_formatter, help="Fourier style transfer of one image onto another")
    f.add_argument("--content", required=True, help="content image")
    f.add_argument("--style", required=True, help="style image (same size)")
    f.add_argument("--beta", type=float, default=_F.beta, help=f"low-frequency window size (default: {_F.beta})")
    f.add_argument("--out", required=True, help="output image")

    m = sub.add_parser("metrics", formatter_class=_formatter, help="PSNR and SSIM between two images")
    m.add_argument("--a", required=True, help="first image")
    m.add_argument("--b", required=True, help="second image")

    s = sub.add_parser("synth", formatter_class=_formatter, help="write a synthetic scene, its views and a manifest")
    s.add_argument("--config", default=None, help="JSON object with SynthConfig fields (default: none)")
    s.add_argument("--outdir", required=True, help="output directory")
    s.add_argument(
        "--image-format", choices=("png", "uars"), default="png",
        help="view files: 8-bit PNG or float32 UARS tensors (default: png)",
    )
    return p


def _json_file(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(obj, dict):
        raise CliError(f"{path}: expected a JSON object")
    return obj


def build_refine_config(args) -> RefineConfig:
    """Module defaults, overlaid by the config file, overlaid by flags."""
    d = RefineConfig().to_dict()
    if args.config:
        d = RefineConfig.from_dict(_nested_merge(d, _json_file(args.config))).to_dict()
    for flag, section, name, _, _ in _REFINE_FLAGS:
        v = getattr(args, flag[2:].replace("-", "_"))
        if v is not None:
            (d[section] if section else d)[name] = v
    for flag, section, name, value, _ in _REFINE_SWITCHES:
        if getattr(args, flag[2:].replace("-", "_")):
            (d[section] if section else d)[name] = value
    if args.background is not None:
        d["background"] = list(args.background)
    return RefineConfig.from_dict(d)


def _nested_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = {**base[k], **v} if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def cmd_refine(args) -> int:
    cfg = build_refine_config(args)
    scene = load_ply(args.scene)
    man = load_manifest(args.manifest)
    try:
        input_image = load_image(man.input_image)
    except FormatError as e:
        raise CliError(f"manifest.input_image: {e}") from None
    views = load_views(man.views, "views")
    evals = load_views(man.eval_views, "eval_views") if man.eval_views else []
    pseudo = [PseudoView(v.image, v.camera, v.logits, name=str(e.image.name), probs=args.probs) for v, e in zip(views, man.views)]
    out_scene, rep = refine(scene, input_image, pseudo, [(v.camera, v.image) for v in evals], cfg)

    lines = [json.dumps({"config": cfg.to_dict(), "input_gaussians": len(scene), "version": __version__}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in rep.step_records(timings=args.timings)]
    lines.append(json.dumps(rep.summary(), sort_keys=True))
    save_ply(out_scene, args.out)
    _write_atomic(Path(args.report), ("\n".join(lines) + "\n").encode())
    print(json.dumps({k: v for k, v in rep.summary().items() if k != "adp_events"}, sort_keys=True))
    return 0


def cmd_render(args) -> int:
    scene = load_ply(args.scene)
    cam = load_camera(args.camera)
    save_image(render(scene, cam, args.background).color, args.out)
    return 0


def cmd_entropy(args) -> int:
    u = uncertainty_from_logits(load_tensor(args.logits), probs=args.probs)
    if Path(args.out).suffix.lower() == ".png":
        save_image(u, args.out)
    else:
        save_tensor(u, args.out)
    return 0


def cmd_fst(args) -> int:
    content, style = load_image(args.content), load_image(args.style)
    save_image(fst_transfer(content, style, FstConfig(beta=args.beta)), args.out)
    return 0


def cmd_metrics(args) -> int:
    a, b = load_image(args.a), load_image(args.b)
    if a.shape != b.shape:
        raise CliError(f"metrics: dimension mismatch {a.shape} vs {b.shape}")
    print(json.dumps({"psnr": psnr(a, b), "ssim": ssim_value(a, b)}, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    raw = _json_file(args.config) if args.config else {}
    try:
        cfg = SynthConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    except TypeError as e:
        raise CliError(f"synth config: {e}") from None
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    scene, views = synth_scene(cfg)
    save_ply(scene, out / "scene.ply")
    entries = []
    for i, (cam, img) in enumerate(views):
        name = f"view_{i:03d}.{args.image_format}"
        save_image(img, out / name)
        entries.append({"image": name, "camera": cam.to_dict()})
    train = [entries[i] for i in cfg.train_indices]
    held = [entries[i] for i in cfg.holdout_indices]
    man = manifest_dict(train[0]["image"], train, held)
    (out / "manifest.json").write_text(json.dumps(man, indent=2) + "\n")
    (out / "synth_config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")
    return 0


COMMANDS = {
    "refine": cmd_refine,
    "render": cmd_render,
    "entropy": cmd_entropy,
    "fst": cmd_fst,
    "metrics": cmd_metrics,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FormatError, CliError, ValueError) as e:
        msg = " ".join(str(e).split())
        print(f"uars {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as e:
        print(f"uars {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
