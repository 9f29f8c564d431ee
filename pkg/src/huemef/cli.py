"""Command-line entry point.

Every stage can be run on its own (``synth``, ``ssla``, ``fuse``, ``hdr``,
``correct``), ``pipeline`` chains them, and ``eval`` compares methods over a
directory of scenes. ``scenes`` writes the bundled synthetic scenes in the
layout ``eval`` expects.

Exit codes: 0 success, 1 internal error, 2 usage or validation error,
3 nothing to do.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, color_hue, fusion, hdr, imgio, pipeline, ssla
from .errors import CalibrationError, HueMefError, ImageFormatError, StackError
from .pipeline import METHODS, PipelineConfig

logger = logging.getLogger("huemef")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_NO_WORK = 0, 1, 2, 3

HDR_NAMES = ("hdr.pfm", "hdr.hdr", "reference.pfm", "reference.hdr")
EVS_FILE = "evs.txt"


class CliError(Exception):
    """Error tagged with the stage it came from and an exit code."""

    def __init__(self, stage: str, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.stage = stage
        self.code = code


# -- argument helpers ---------------------------------------------------------


def _ev_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _add_evs(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--evs", type=_ev_list, help="exposure values, e.g. '-2,0,2' (quote negatives)")
    g.add_argument("--evs-file", type=Path, help="sidecar with one exposure value per line")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("-o", "--output", type=Path, help="output directory or file")


def _add_fusion(p: argparse.ArgumentParser) -> None:
    p.add_argument("--levels", type=int, help="pyramid depth (default floor(log2(min side)))")
    p.add_argument("--contrast-exp", type=float)
    p.add_argument("--saturation-exp", type=float)
    p.add_argument("--exposedness-exp", type=float)
    p.add_argument("--sigma", type=float, help="well-exposedness width")


def _add_ssla(p: argparse.ArgumentParser) -> None:
    p.add_argument("-m", "--segments", dest="m", type=int, help="scene areas (default: stack size)")
    p.add_argument("--ssla-base", choices=("segment", "middle"))


def _add_crf(p: argparse.ArgumentParser) -> None:
    p.add_argument("--crf-degree", type=int)
    p.add_argument("--per-channel-crf", action="store_true", default=None)
    p.add_argument("--crf-samples", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="huemef", description="Hue-corrected multi-exposure image fusion."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="render an exposure stack from an HDR image")
    p.add_argument("hdr", type=Path)
    _add_evs(p)
    _add_common(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--bit-depth", type=int, choices=(8, 16))

    p = sub.add_parser("ssla", help="luminance-adjusted images from a stack")
    p.add_argument("stack", nargs="+", type=Path, help="images in exposure order, or one directory")
    _add_evs(p)
    _add_common(p)
    _add_ssla(p)

    p = sub.add_parser("fuse", help="exposure fusion of a set of images")
    p.add_argument("images", nargs="+", type=Path)
    _add_common(p)
    _add_fusion(p)

    p = sub.add_parser("hdr", help="calibrate the camera response and merge radiance")
    p.add_argument("stack", nargs="+", type=Path)
    _add_evs(p)
    _add_common(p)
    _add_crf(p)

    p = sub.add_parser("correct", help="transplant hue from a reference image")
    p.add_argument("image", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 16))

    p = sub.add_parser("pipeline", help="ssla, fusion, HDR merge and hue correction")
    p.add_argument("stack", nargs="+", type=Path)
    _add_evs(p)
    _add_common(p)
    _add_ssla(p)
    _add_fusion(p)
    _add_crf(p)
    p.add_argument("--bit-depth", type=int, choices=(8, 16))
    p.add_argument("--no-metrics", dest="metrics", action="store_false", default=None)

    p = sub.add_parser("eval", help="compare methods over a directory of scenes")
    p.add_argument("scene_dir", type=Path)
    p.add_argument(
        "--methods", type=lambda s: tuple(t for t in s.replace(",", " ").split() if t),
        default=METHODS, help=f"comma list from {', '.join(METHODS)}",
    )
    _add_evs(p)
    _add_common(p)
    _add_ssla(p)
    _add_fusion(p)
    _add_crf(p)
    p.add_argument("--gamma", type=float, help="capture gamma when a stack must be synthesized")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    p.add_argument("-j", "--jobs", type=int, default=1, help="scenes evaluated in parallel")

    p = sub.add_parser("scenes", help="write the bundled synthetic scenes")
    p.add_argument("output", type=Path)
    p.add_argument("--size", type=int, default=192)
    p.add_argument("--names", type=lambda s: [t for t in s.replace(",", " ").split() if t])
    _add_evs(p)
    p.add_argument("--gamma", type=float, default=2.2)
    return parser


CONFIG_FLAGS = {
    "m": "m", "ssla_base": "ssla_base", "seed": "seed", "levels": "levels",
    "contrast_exp": "contrast_exp", "saturation_exp": "saturation_exp",
    "exposedness_exp": "exposedness_exp", "sigma": "sigma", "crf_degree": "crf_degree",
    "per_channel_crf": "per_channel_crf", "crf_samples": "crf_samples", "gamma": "gamma",
    "bit_depth": "bit_depth", "metrics": "metrics", "figures": "figures",
}


def resolve_config(args: argparse.Namespace, stage: str, evs=None) -> PipelineConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    values: dict[str, Any] = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path is not None:
        try:
            values.update(pipeline.read_config_file(cfg_path))
        except OSError as exc:
            raise CliError(stage, f"cannot read config: {exc}") from exc
        except (KeyError, ValueError) as exc:
            raise CliError(stage, str(exc).strip("'\"")) from exc
    for attr, key in CONFIG_FLAGS.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = val
    if evs is not None:
        values["evs"] = tuple(evs)
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise CliError(stage, f"invalid configuration: {exc}") from exc


def _flag_evs(args) -> tuple[float, ...] | None:
    if getattr(args, "evs", None) is not None:
        return tuple(args.evs)
    if getattr(args, "evs_file", None) is not None:
        return tuple(imgio.read_evs(args.evs_file))
    return None


def _config_evs(args) -> tuple[float, ...] | None:
    if getattr(args, "config", None) is None:
        return None
    try:
        return pipeline.read_config_file(args.config).get("evs")
    except (OSError, KeyError, ValueError):
        return None  # reported properly by resolve_config


# -- stack loading ------------------------------------------------------------


def _expand_stack(paths: Sequence[Path]) -> tuple[list[Path], Path | None]:
    """Image files in exposure order plus a sidecar found next to them."""
    if len(paths) == 1 and paths[0].is_dir():
        d = paths[0]
        files = sorted(
            p for p in d.iterdir()
            if p.name not in HDR_NAMES and p.suffix.lower() == ".png" and imgio.is_image_file(p)
        )
        sidecar = d / EVS_FILE
        return files, sidecar if sidecar.is_file() else None
    return list(paths), None


def load_stack(args, stage: str) -> tuple[list[np.ndarray], tuple[float, ...], list[Path]]:
    files, sidecar = _expand_stack(args.stack)
    if not files:
        raise CliError(stage, "no input images found", EXIT_NO_WORK)
    images = []
    for path in files:
        img, info = _read(path, stage)
        if info.hdr:
            raise CliError(stage, f"{path}: expected an LDR image, got {info.format}")
        images.append(img)
    evs = _flag_evs(args) or _config_evs(args)
    if evs is None and sidecar is not None:
        evs = tuple(imgio.read_evs(sidecar))
    if evs is None:
        raise CliError(stage, "exposure values required: pass --evs or --evs-file")
    if len(evs) != len(images):
        raise CliError(stage, f"--evs lists {len(evs)} values but {len(images)} images were given")
    if any(b <= a for a, b in zip(evs, evs[1:])):
        raise CliError(stage, "--evs must be strictly increasing (order images from dark to bright)")
    return images, tuple(evs), files


def _read(path: Path, stage: str):
    try:
        return imgio.read_image(path)
    except FileNotFoundError:
        raise CliError(stage, f"{path}: no such file") from None
    except (ImageFormatError, OSError) as exc:
        raise CliError(stage, str(exc)) from exc


def _out_dir(args, default: str = "out") -> Path:
    out = args.output or Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- manifest -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(_fmt(float(v) if isinstance(v, np.floating) else v) for v in value)
    if isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


def manifest_lines(cfg: PipelineConfig, result: pipeline.PipelineResult,
                   inputs: Sequence[Path]) -> list[str]:
    """Every parameter that affects the outputs, one ``key=value`` per line."""
    entries: list[tuple[str, Any]] = [("huemef_version", __version__)]
    entries += [("input." + str(i), p.name) for i, p in enumerate(inputs)]
    for key in cfg.keys():
        if key != "output_dir":
            entries.append((key, getattr(cfg, key)))
    entries += [
        ("ssla.blur_divisor", ssla.BLUR_DIVISOR),
        ("ssla.delta", ssla.DELTA),
        ("ssla.middle_gray", ssla.MIDDLE_GRAY),
        ("ssla.v_max", ssla.V_MAX),
        ("ssla.gmm_max_iter", ssla.GmmParams().max_iter),
        ("ssla.gmm_tol", ssla.GmmParams().tol),
        ("ssla.gmm_var_floor", ssla.GmmParams().var_floor),
        ("ssla.segments_used", result.ssla.segments.m),
        ("ssla.gmm_converged", result.ssla.segments.converged),
        ("ssla.gmm_iterations", result.ssla.segments.iterations),
        ("ssla.base_indices", result.ssla.base_indices),
        ("ssla.scales", result.ssla.scales),
        ("ssla.clipped_pixels", result.ssla.clip_counts),
        ("fusion.levels_used", result.fusion.levels),
        ("fusion.weight_floor", fusion.WEIGHT_FLOOR),
        ("hdr.sample_range", hdr.SAMPLE_RANGE),
        ("hdr.merge_range", hdr.MERGE_RANGE),
        ("hdr.weight_floor", hdr.WEIGHT_FLOOR),
        ("hdr.anchor", hdr.ANCHOR),
        ("hue.chroma_eps", color_hue.CHROMA_EPS),
    ]
    crfs = result.crfs if cfg.per_channel_crf else result.crfs[:1]
    for k, crf in enumerate(crfs):
        entries += [
            (f"crf.{k}.degree", crf.degree),
            (f"crf.{k}.coefficients", crf.coefficients),
            (f"crf.{k}.residual", float(crf.residual)),
        ]
    for key, value in result.info.items():
        entries.append((key, value))
    return [f"{k}={_fmt(v)}" for k, v in entries]


# -- commands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    stage = "synth"
    radiance, info = _read(args.hdr, stage)
    if not info.hdr:
        raise CliError(stage, f"{args.hdr}: expected an HDR image (.hdr or .pfm)")
    evs = _flag_evs(args) or _config_evs(args) or pipeline.DEFAULT_EVS
    cfg = resolve_config(args, stage, evs)
    stack = hdr.synthesize_stack(radiance, cfg.evs, gamma=cfg.gamma, bit_depth=cfg.bit_depth)
    out = _out_dir(args)
    for i, img in enumerate(stack.images):
        imgio.write_image(img, out / f"stack_{i:02d}.png", bit_depth=cfg.bit_depth)
    imgio.write_evs(stack.evs, out / EVS_FILE)
    print(f"wrote {len(stack)} images and {EVS_FILE} to {out}")
    return EXIT_OK


def cmd_ssla(args) -> int:
    stage = "ssla"
    images, evs, _ = load_stack(args, stage)
    cfg = resolve_config(args, stage, evs)
    res = ssla.run_ssla_detailed(images, cfg.m, base=cfg.ssla_base)
    out = _out_dir(args)
    for j, img in enumerate(res.images, 1):
        imgio.write_image(img, out / f"ssla_{j:02d}.png", bit_depth=cfg.bit_depth)
    if res.segments.collapsed:
        print(f"note: segmentation collapsed to {res.segments.m} of {res.segments.requested} areas")
    print(f"wrote {len(res.images)} adjusted images to {out}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    stage = "fuse"
    images = []
    for path in args.images:
        img, info = _read(path, stage)
        if info.hdr:
            raise CliError(stage, f"{path}: fusion takes LDR images")
        images.append(img)
    cfg = resolve_config(args, stage)
    out = args.output or Path("fused.png")
    if out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "fused.png"
    imgio.write_image(fusion.fuse(images, cfg.fusion_params), out, bit_depth=cfg.bit_depth)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_hdr(args) -> int:
    stage = "hdr"
    images, evs, _ = load_stack(args, stage)
    cfg = resolve_config(args, stage, evs)
    stack = hdr.ExposureStack(tuple(images), evs)
    crfs, radiance = pipeline.calibrate_and_merge(stack, cfg)
    out = args.output or Path("hdr.pfm")
    if out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "hdr.pfm"
    imgio.write_image(radiance, out, hdr=True)
    for k, crf in enumerate(crfs):
        print(f"crf.{k}: degree={crf.degree} coefficients={_fmt(crf.coefficients)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_correct(args) -> int:
    stage = "correct"
    img, info = _read(args.image, stage)
    ref, _ = _read(args.reference, stage)
    if info.hdr:
        raise CliError(stage, f"{args.image}: image to correct must be LDR")
    if img.shape != ref.shape:
        raise CliError(stage, f"image {img.shape[:2]} and reference {ref.shape[:2]} differ in size")
    bit_depth = args.bit_depth or 16
    args.output.parent.mkdir(parents=True, exist_ok=True)
    imgio.write_image(color_hue.correct_image_hue(img, ref), args.output, bit_depth=bit_depth)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    stage = "pipeline"
    images, evs, files = load_stack(args, stage)
    cfg = resolve_config(args, stage, evs)
    stack = hdr.ExposureStack(tuple(images), evs)
    result = _staged(pipeline.run_pipeline, stack, cfg)
    if cfg.metrics:
        from . import metrics

        score = metrics.tmqi(result.hdr, result.corrected)
        ref = pipeline.display_reference(result.hdr)
        result.info.update({
            "metrics.mean_dH_mef": metrics.mean_delta_h(result.mef, ref),
            "metrics.mean_dH_corrected": metrics.mean_delta_h(result.corrected, ref),
            "metrics.TMQI_Q": score.Q,
            "metrics.TMQI_S": score.S,
            "metrics.TMQI_N": score.N,
        })
    out = _out_dir(args, cfg.output_dir)
    imgio.write_image(result.mef, out / "mef.png", bit_depth=cfg.bit_depth)
    imgio.write_image(result.hdr, out / "hdr.pfm", hdr=True)
    imgio.write_image(result.corrected, out / "corrected.png", bit_depth=cfg.bit_depth)
    (out / "manifest.txt").write_text("\n".join(manifest_lines(cfg, result, files)) + "\n")
    print(f"wrote mef.png, hdr.pfm, corrected.png and manifest.txt to {out}")
    return EXIT_OK


def _staged(fn, stack, cfg):
    """Run the pipeline, tagging failures with the stage that raised them."""
    try:
        return fn(stack, cfg)
    except CalibrationError as exc:
        raise CliError("hdr", str(exc)) from exc
    except StackError as exc:
        raise CliError("pipeline", str(exc)) from exc


# -- eval ---------------------------------------------------------------------


def _find_reference(scene: Path) -> Path | None:
    for name in HDR_NAMES:
        if (scene / name).is_file():
            return scene / name
    return None


def _eval_one(scene: Path, methods: Sequence[str], cfg: PipelineConfig, evs, out: Path | None):
    """Evaluate one scene directory; returns (rows, skip reason)."""
    ref_path = _find_reference(scene)
    if ref_path is None:
        return [], "no HDR ground truth (hdr.pfm or hdr.hdr)"
    radiance, _ = imgio.read_image(ref_path)
    files, sidecar = _expand_stack([scene])
    if files:
        images = [imgio.read_image(p)[0] for p in files]
        scene_evs = evs or (tuple(imgio.read_evs(sidecar)) if sidecar else None)
        if scene_evs is None or len(scene_evs) != len(images):
            return [], f"stack has {len(images)} images but no matching {EVS_FILE}"
        stack = hdr.ExposureStack(tuple(images), scene_evs)
    else:
        stack = hdr.synthesize_stack(radiance, evs or cfg.evs, gamma=cfg.gamma)
    rows, outputs = pipeline.evaluate_scene(scene.name, radiance, stack, methods, cfg)
    if out is not None:
        for method, img in outputs.items():
            imgio.write_image(img, out / f"{scene.name}_{method}.png", bit_depth=cfg.bit_depth)
    return rows, None


def cmd_eval(args) -> int:
    stage = "eval"
    for m in args.methods:
        if m not in METHODS:
            raise CliError(stage, f"--methods: unknown method {m!r}; choose from {', '.join(METHODS)}")
    if not args.scene_dir.is_dir():
        raise CliError(stage, f"{args.scene_dir}: not a directory")
    evs = _flag_evs(args) or _config_evs(args)
    cfg = resolve_config(args, stage, evs)
    scenes = sorted(p for p in args.scene_dir.iterdir() if p.is_dir())
    if not scenes:
        raise CliError(stage, f"{args.scene_dir}: no scene directories", EXIT_NO_WORK)
    out = _out_dir(args, cfg.output_dir)
    img_dir = out / "images"
    img_dir.mkdir(exist_ok=True)

    jobs = [(s, args.methods, cfg, evs, img_dir) for s in scenes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_eval_one, *zip(*jobs)))
    else:
        results = [_eval_one(*job) for job in jobs]

    rows = []
    for scene, (scene_rows, skip) in zip(scenes, results):
        if skip:
            warnings.warn(f"skipping scene {scene.name}: {skip}", stacklevel=1)
            print(f"[eval] warning: skipping {scene.name}: {skip}", file=sys.stderr)
            continue
        print(f"[eval] {scene.name}: done")
        rows.extend(scene_rows)
    if not rows:
        raise CliError(stage, "every scene was skipped", EXIT_NO_WORK)

    with open(out / "eval.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=pipeline.CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.as_dict().items()})
    table = pipeline.format_table(rows + pipeline.aggregate(rows))
    (out / "eval.txt").write_text(table + "\n")
    print(table)
    if cfg.figures:
        from .plotting import write_eval_figures

        for path in write_eval_figures(rows + pipeline.aggregate(rows), out):
            print(f"wrote {path}")
    return EXIT_OK


def cmd_scenes(args) -> int:
    from .scenes import SCENES, make_scene

    stage = "scenes"
    names = args.names or list(SCENES)
    evs = _flag_evs(args) or pipeline.DEFAULT_EVS
    for name in names:
        if name not in SCENES:
            raise CliError(stage, f"--names: unknown scene {name!r}; available: {', '.join(SCENES)}")
    for name in names:
        d = args.output / name
        d.mkdir(parents=True, exist_ok=True)
        radiance = make_scene(name, args.size)
        imgio.write_image(radiance, d / "hdr.pfm", hdr=True)
        stack = hdr.synthesize_stack(radiance, evs, gamma=args.gamma)
        for i, img in enumerate(stack.images):
            imgio.write_image(img, d / f"stack_{i:02d}.png")
        imgio.write_evs(stack.evs, d / EVS_FILE)
    print(f"wrote {len(names)} scenes to {args.output}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "ssla": cmd_ssla,
    "fuse": cmd_fuse,
    "hdr": cmd_hdr,
    "correct": cmd_correct,
    "pipeline": cmd_pipeline,
    "eval": cmd_eval,
    "scenes": cmd_scenes,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"huemef: [{exc.stage}] error: {exc}", file=sys.stderr)
        return exc.code
    except (StackError, CalibrationError, ImageFormatError, ValueError) as exc:
        print(f"huemef: [{args.command}] error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HueMefError as exc:
        print(f"huemef: [{args.command}] error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last resort
        logger.debug("internal error", exc_info=True)
        print(f"huemef: [{args.command}] internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
