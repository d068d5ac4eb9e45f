"""Command-line front end: synthesize, train, infer, eval, explain.

Exit codes: 0 success, 1 usage error, 2 runtime error. Every run prints its
resolved configuration before doing work, and all randomness flows from the
explicit seeds, so reruns with identical arguments produce identical output
trees (timestamps only ever appear in the training summary JSON).

The train config file is JSON; `--set key=value` overrides individual keys
(file < flag precedence). Recognized keys are the TrainConfig fields plus:

    data_dir               paired tree with input/ and target/ subdirs
    out_dir                run directory for logs and checkpoints
    base_channels          generator width (default 64)
    num_inception_blocks   generator bottleneck depth (default 3)
    disc_base_channels     discriminator width (default 64)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import trainer
from .archive import load_generator_checkpoint
from .data import load_paired_dir, match_prediction_pairs, write_synthetic_dataset
from .discriminator import DiscriminatorSpec
from .errors import DehazeError
from .generator import GeneratorSpec, generator_forward
from .gradcam import DEFAULT_TARGET_LAYER, grad_cam
from .imaging import ImageTensor, ValueRange, load_image, save_image, to_signed, to_unit
from .metrics import evaluate_set

__all__ = ["run", "main"]

_TRAIN_CONFIG_KEYS = {f.name for f in dataclasses.fields(trainer.TrainConfig)}
_EXTRA_TRAIN_KEYS = {
    "data_dir", "out_dir", "base_channels", "num_inception_blocks", "disc_base_channels",
}
_TARGET_KIND = {"residual": "residual_magnitude", "mean": "mean_output"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="satdehaze", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="print per-item progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="write a synthetic paired hazy/clear dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--severity", default="moderate",
                   help="comma list of thin/moderate/thick (round-robin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=256, help="square image size in pixels")

    p = sub.add_parser("train", help="train the dehazing GAN")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--resume", default=None, help="train-state archive to resume from")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("infer", help="dehaze every PNG in a directory")
    p.add_argument("--gen", required=True, help="generator checkpoint archive")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)

    p = sub.add_parser("eval", help="compute PSNR/SSIM/FSIM against ground truth")
    p.add_argument("--pred", required=True, help="directory of predictions")
    p.add_argument("--gt", required=True, help="directory of ground-truth images")
    p.add_argument("--report", required=True, help="output JSON report path")

    p = sub.add_parser("explain", help="write Grad-CAM heatmap/overlay for one image")
    p.add_argument("--gen", required=True, help="generator checkpoint archive")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--layer", default=DEFAULT_TARGET_LAYER)
    p.add_argument("--target", choices=sorted(_TARGET_KIND), default="residual")
    p.add_argument("--out", dest="out_dir", required=True)
    return parser


def _print_config(command: str, resolved: dict) -> None:
    print(f"[{command}] resolved config: {json.dumps(resolved, sort_keys=True)}")


def _parse_override(text: str):
    if "=" not in text:
        raise _UsageError(f"--set expects KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _cmd_synthesize(args) -> int:
    severities = [s.strip() for s in args.severity.split(",") if s.strip()]
    resolved = {"out": args.out, "n": args.n, "severity": severities,
                "seed": args.seed, "size": args.size}
    _print_config("synthesize", resolved)
    dataset = write_synthetic_dataset(
        args.out, n=args.n, severities=severities, seed=args.seed, size=args.size
    )
    print(f"wrote {len(dataset)} pairs under {args.out}")
    return 0


def _cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    if not isinstance(raw, dict):
        raise _UsageError(f"train config must be a JSON object, got {type(raw).__name__}")
    for key, value in map(_parse_override, args.overrides):
        raw[key] = value
    unknown = set(raw) - _TRAIN_CONFIG_KEYS - _EXTRA_TRAIN_KEYS
    if unknown:
        raise _UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "data_dir" not in raw:
        raise _UsageError("config must set data_dir")
    out_dir = raw.get("out_dir", "train_run")

    config = trainer.TrainConfig(**{k: v for k, v in raw.items() if k in _TRAIN_CONFIG_KEYS})
    gen_spec = GeneratorSpec(
        base_channels=raw.get("base_channels", 64),
        num_inception_blocks=raw.get("num_inception_blocks", 3),
    )
    disc_spec = DiscriminatorSpec(base_channels=raw.get("disc_base_channels", 64))
    resolved = dict(raw)
    resolved.update(dataclasses.asdict(config))
    resolved["out_dir"] = out_dir
    _print_config("train", resolved)

    dataset = load_paired_dir(raw["data_dir"])
    state = trainer.train(
        config, dataset, out_dir,
        gen_spec=gen_spec, disc_spec=disc_spec, resume_from=args.resume,
    )
    print(f"trained {state.step} steps ({state.epoch} epochs); checkpoints under {out_dir}")
    return 0


def _cmd_infer(args) -> int:
    _print_config("infer", {"gen": args.gen, "in": args.in_dir, "out": args.out_dir})
    net, _ = load_generator_checkpoint(args.gen)
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    paths = sorted(p for p in in_dir.iterdir() if p.suffix.lower() == ".png")
    if not paths:
        raise DehazeError(f"no PNG images under {in_dir}")
    for path in paths:
        dehazed = generator_forward(net, to_signed(load_image(path)))
        save_image(to_unit(dehazed), out_dir / path.name)
        if args.verbose:
            print(f"  {path.name}")
    print(f"dehazed {len(paths)} images into {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    _print_config("eval", {"pred": args.pred, "gt": args.gt, "report": args.report})
    pairs = match_prediction_pairs(args.pred, args.gt)
    report = evaluate_set(pairs, set_name=Path(args.pred).name)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json())
    print(report.to_table())
    return 0


def _cmd_explain(args) -> int:
    resolved = {"gen": args.gen, "in": args.in_path, "layer": args.layer,
                "target": args.target, "out": args.out_dir}
    _print_config("explain", resolved)
    net, _ = load_generator_checkpoint(args.gen)
    image = load_image(args.in_path)
    result = grad_cam(net, image, layer=args.layer, target_kind=_TARGET_KIND[args.target])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.in_path).stem

    dehazed = to_unit(generator_forward(net, to_signed(image)))
    save_image(dehazed, out_dir / f"{stem}_dehazed.png")
    save_image(
        ImageTensor(result.heatmap[:, :, None], ValueRange.UNIT),
        out_dir / f"{stem}_heatmap.png",
    )
    save_image(result.overlay, out_dir / f"{stem}_overlay.png")
    alphas = result.alphas
    sidecar = {
        "target_layer": result.target_layer,
        "target_kind": result.target_kind,
        "alpha_stats": {
            "count": int(alphas.size),
            "mean": float(np.mean(alphas)),
            "std": float(np.std(alphas)),
            "min": float(np.min(alphas)),
            "max": float(np.max(alphas)),
        },
    }
    (out_dir / f"{stem}_gradcam.json").write_text(json.dumps(sidecar, indent=2))
    print(f"wrote triptych for {stem} into {out_dir}")
    return 0


_COMMANDS = {
    "synthesize": _cmd_synthesize,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "explain": _cmd_explain,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help exits through here with code 0
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DehazeError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
