"""Command-line entry point: ``sketch3d <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .fit import fit_multiview, fit_sds, init_sketch
from .grad import gradcheck
from .io import (
    SceneConfig,
    SceneFormatError,
    StepParseError,
    export_step,
    fit_config_from_dict,
    load_scene,
    read_png,
    save_scene,
    write_png,
)
from .raster import RenderConfig, render
from .scenes import GRADCHECK_SHIFT, figure4_scene, turntable_cameras


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketch3d", description="Render and fit 3D curve sketches.")
    sub = p.add_subparsers(dest="command", metavar="command")

    r = sub.add_parser("render", help="render one camera of a scene to PNG")
    r.add_argument("scene")
    r.add_argument("--camera-index", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--spp", type=int, help="samples per pixel (default: scene setting)")
    r.add_argument("--seed", type=int, help="sampling seed (default: scene setting)")

    f = sub.add_parser("figure4", help="render the depth-blending fixture")
    f.add_argument("--out", required=True)
    f.add_argument("--spp", type=int, default=1024)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--scene-out", help="also write the fixture as a scene file")

    g = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    g.add_argument("scene")
    g.add_argument("--seeds", type=int, default=64)
    g.add_argument("--tolerance", type=float, default=0.05)
    g.add_argument("--spp", type=int, default=256)
    g.add_argument("--camera-index", type=int, default=0)
    g.add_argument("--shift", type=float, nargs=3, default=list(GRADCHECK_SHIFT),
                   help="world-space offset of the target sketch")

    ft = sub.add_parser("fit", help="fit curve positions to target views")
    ft.add_argument("scene")
    ft.add_argument("--targets", required=True, help="directory of view_NNN.png, one per scene camera")
    ft.add_argument("--config", help="JSON object overriding the scene's fit settings")
    ft.add_argument("--out", required=True)

    fs = sub.add_parser("fit-sds", help="score-distillation fit against a mock predictor")
    fs.add_argument("scene")
    fs.add_argument("--predictor", required=True, help="mock:zero | mock:echo | mock:conditioned | mock:pull_toward=<png>")
    fs.add_argument("--config")
    fs.add_argument("--out", required=True)

    e = sub.add_parser("export-step", help="write the scene's curves as STEP")
    e.add_argument("scene")
    e.add_argument("--out", required=True)
    return p


def _scene(path) -> SceneConfig:
    if not os.path.isfile(path):
        raise UsageError(f"no such scene file: {path}")
    return load_scene(path)


def _fit_cfg(scene: SceneConfig, path, **overrides):
    base = scene.fit
    if path:
        if not os.path.isfile(path):
            raise UsageError(f"no such config file: {path}")
        with open(path, encoding="utf-8") as fh:
            base = fit_config_from_dict(json.load(fh), base)
    return dataclasses.replace(base, **overrides) if overrides else base


def _camera(scene: SceneConfig, index: int):
    if not 0 <= index < len(scene.cameras):
        raise UsageError(f"camera index {index} out of range ({len(scene.cameras)} cameras)")
    return scene.cameras[index]


def _write_fit_outputs(report, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    export_step(report.sketch, os.path.join(out, "sketch.step"))
    save_scene(SceneConfig(report.sketch), os.path.join(out, "sketch.json"))
    for k, cam in enumerate(turntable_cameras()):
        write_png(render(report.sketch, cam), os.path.join(out, f"turntable_{k:02d}.png"))


def _cmd_render(a) -> int:
    scene = _scene(a.scene)
    cam = _camera(scene, a.camera_index)
    rc = scene.render
    rc = dataclasses.replace(
        rc,
        samples_per_pixel=rc.samples_per_pixel if a.spp is None else a.spp,
        seed=rc.seed if a.seed is None else a.seed,
    )
    write_png(render(scene.sketch, cam, rc), a.out)
    return 0


def _cmd_figure4(a) -> int:
    sketch, cam = figure4_scene()
    write_png(render(sketch, cam, RenderConfig(a.spp, seed=a.seed)), a.out)
    if a.scene_out:
        save_scene(SceneConfig(sketch, [cam], RenderConfig(a.spp, seed=a.seed)), a.scene_out)
    return 0


def _cmd_gradcheck(a) -> int:
    scene = _scene(a.scene)
    cam = _camera(scene, a.camera_index)
    rep = gradcheck(scene.sketch, cam, np.array(a.shift), n_seeds=a.seeds, spp=a.spp)
    print(rep.summary())
    ok = rep.max_rel_error <= a.tolerance and rep.color_max_rel_error <= a.tolerance / 5
    print(f"max relative error {rep.max_rel_error:.4f} (tolerance {a.tolerance}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_fit(a) -> int:
    scene = _scene(a.scene)
    if not os.path.isdir(a.targets):
        raise UsageError(f"no such targets directory: {a.targets}")
    if not scene.cameras:
        raise UsageError("scene has no cameras")
    targets = []
    for k, cam in enumerate(scene.cameras):
        path = os.path.join(a.targets, f"view_{k:03d}.png")
        if not os.path.isfile(path):
            raise UsageError(f"missing target image {path}")
        targets.append((read_png(path), cam))
    cfg = _fit_cfg(scene, a.config, loss="l2")
    init = scene.sketch if len(scene.sketch) else None
    report = fit_multiview(targets, cfg, init)
    _write_fit_outputs(report, a.out)
    print(f"fit: {report.steps} steps, final loss {report.losses[-1] if report.losses else float('nan'):.6g}")
    return 0


def _predictor(spec: str):
    from .distill import mock_noise_predictor

    if not spec.startswith("mock:"):
        raise UsageError(f"only mock predictors are available, got {spec!r}")
    kind, _, arg = spec[5:].partition("=")
    if kind == "pull_toward":
        if not arg or not os.path.isfile(arg):
            raise UsageError("mock:pull_toward needs an existing target PNG: mock:pull_toward=<png>")
        return mock_noise_predictor(kind, read_png(arg).pixels[..., :3])
    if kind not in ("zero", "echo", "conditioned"):
        raise UsageError(f"unknown mock predictor {kind!r}")
    return mock_noise_predictor(kind)


def _cmd_fit_sds(a) -> int:
    scene = _scene(a.scene)
    predictor = _predictor(a.predictor)
    cfg = _fit_cfg(scene, a.config, loss="sds")
    init = scene.sketch if len(scene.sketch) else init_sketch(np.random.default_rng(cfg.seed),
                                                              cfg.n_curves, cfg.init_radius)
    camera = scene.cameras[0] if scene.cameras else None
    report = fit_sds(predictor, None, cfg, init, camera)
    _write_fit_outputs(report, a.out)
    print(f"fit-sds: {report.steps} steps")
    return 0


def _cmd_export_step(a) -> int:
    export_step(_scene(a.scene).sketch, a.out)
    return 0


_COMMANDS = {
    "render": _cmd_render,
    "figure4": _cmd_figure4,
    "gradcheck": _cmd_gradcheck,
    "fit": _cmd_fit,
    "fit-sds": _cmd_fit_sds,
    "export-step": _cmd_export_step,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, SceneFormatError, StepParseError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sketch3d: error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"sketch3d: numeric failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
