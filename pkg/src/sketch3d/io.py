"""Scene documents (JSON), PNG images and STEP curve export/import."""

from __future__ import annotations

import dataclasses
import json
import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .camera import Camera
from .curves import RationalBezier3, Sketch
from .distill import AnnealConfig
from .fit import FitConfig
from .raster import RasterImage, RenderConfig

SCENE_FORMAT = "sketch3d-scene"
SCENE_VERSION = 1


class SceneFormatError(ValueError):
    pass


class StepParseError(ValueError):
    pass


@dataclass
class SceneConfig:
    """Everything needed to render or fit: curves, cameras and settings."""

    sketch: Sketch = field(default_factory=Sketch)
    cameras: list[Camera] = field(default_factory=list)
    render: RenderConfig = field(default_factory=RenderConfig)
    fit: FitConfig = field(default_factory=FitConfig)


def _curve_to_dict(c: RationalBezier3) -> dict:
    return {
        "id": c.id,
        "user_order": c.user_order,
        "points": c.points.tolist(),
        "weights": c.weights.tolist(),
        "width": c.width,
        "color": c.color.tolist(),
    }


def _camera_to_dict(cam: Camera) -> dict:
    return {
        "rotation": cam.rotation.tolist(),
        "translation": cam.translation.tolist(),
        "focal_px": cam.focal_px,
        "image_size": [cam.image_width, cam.image_height],
        "near_z": cam.near_z,
    }


def _fit_to_dict(cfg: FitConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["betas"] = list(cfg.betas)
    return d


def scene_to_dict(scene: SceneConfig) -> dict:
    rc = dataclasses.asdict(scene.render)
    if rc["background"] is not None:
        rc["background"] = list(rc["background"])
    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "background": list(scene.sketch.background_color),
        "curves": [_curve_to_dict(c) for c in scene.sketch.curves],
        "cameras": [_camera_to_dict(c) for c in scene.cameras],
        "render": rc,
        "fit": _fit_to_dict(scene.fit),
    }


def _take(d: dict, keys: set, where: str) -> dict:
    if not isinstance(d, dict):
        raise SceneFormatError(f"{where}: expected an object")
    unknown = set(d) - keys
    if unknown:
        raise SceneFormatError(f"{where}: unknown keys {sorted(unknown)}")
    return d


def fit_config_from_dict(d: dict, base: FitConfig = FitConfig()) -> FitConfig:
    """FitConfig from a (possibly partial) mapping layered over ``base``."""
    names = {f.name for f in dataclasses.fields(FitConfig)}
    d = dict(_take(d, names, "fit"))
    if "betas" in d:
        d["betas"] = tuple(d["betas"])
    try:
        if "anneal" in d:
            a = _take(d["anneal"], {f.name for f in dataclasses.fields(AnnealConfig)}, "fit.anneal")
            d["anneal"] = dataclasses.replace(base.anneal, **a)
        return dataclasses.replace(base, **d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"fit: {exc}") from exc


def scene_from_dict(d: dict) -> SceneConfig:
    _take(d, {"format", "version", "background", "curves", "cameras", "render", "fit"}, "scene")
    if d.get("format") != SCENE_FORMAT or d.get("version") != SCENE_VERSION:
        raise SceneFormatError(f"not a {SCENE_FORMAT} v{SCENE_VERSION} document")
    try:
        curves = []
        for i, c in enumerate(d.get("curves", [])):
            _take(c, {"id", "user_order", "points", "weights", "width", "color"}, f"curves[{i}]")
            curves.append(RationalBezier3(
                np.array(c["points"], dtype=np.float64),
                None if c.get("weights") is None else np.array(c["weights"], dtype=np.float64),
                width=c.get("width", 1.5),
                color=c.get("color", (0.0, 0.0, 0.0, 1.0)),
                user_order=c.get("user_order", i),
                id=c.get("id", i),
            ))
        sketch = Sketch(curves, tuple(d.get("background", (1.0, 1.0, 1.0, 1.0))))
        cameras = []
        for i, c in enumerate(d.get("cameras", [])):
            _take(c, {"rotation", "translation", "focal_px", "image_size", "near_z"}, f"cameras[{i}]")
            w, h = c["image_size"]
            cameras.append(Camera(np.array(c["rotation"]), np.array(c["translation"]),
                                  c["focal_px"], w, h, c.get("near_z", 1e-3)))
        r = dict(_take(d.get("render", {}), {f.name for f in dataclasses.fields(RenderConfig)}, "render"))
        if r.get("background") is not None:
            r["background"] = tuple(r["background"])
        render = RenderConfig(**r)
        fit = fit_config_from_dict(d.get("fit", {}))
    except (KeyError, TypeError) as exc:
        raise SceneFormatError(f"malformed scene: {exc!r}") from exc
    return SceneConfig(sketch, cameras, render, fit)


def dumps_scene(scene: SceneConfig) -> str:
    return json.dumps(scene_to_dict(scene), indent=2) + "\n"


def loads_scene(text: str) -> SceneConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"invalid JSON: {exc}") from exc
    return scene_from_dict(d)


def save_scene(scene: SceneConfig, path) -> None:
    _write_text(path, dumps_scene(scene))


def load_scene(path) -> SceneConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read scene {os.fspath(path)!r}: {exc.strerror or exc}") from exc
    return loads_scene(text)


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)!r}: {exc.strerror or exc}") from exc


# --------------------------------------------------------------------------
# PNG


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Quantize with round-half-up, so 0.5 maps to 128."""
    return np.floor(np.clip(pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_png(image: RasterImage, path) -> None:
    try:
        Image.fromarray(to_uint8(image.pixels), "RGBA").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write PNG {os.fspath(path)!r}: {exc}") from exc


def read_png(path) -> RasterImage:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGBA"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise OSError(f"cannot read PNG {os.fspath(path)!r}: {exc}") from exc
    return RasterImage(arr)


# --------------------------------------------------------------------------
# STEP (ISO 10303-21), curve subset


def _real(x: float) -> str:
    return "%.17E" % x


def _tag(c: RationalBezier3) -> str:
    color = ",".join(repr(float(v)) for v in c.color)
    return f"id={c.id} order={c.user_order} width={float(c.width)!r} color={color}"


def step_text(sketch: Sketch, name: str = "sketch") -> str:
    """Part 21 text with one rational Bezier-form B-spline per curve.

    Control points are emitted before the curve that uses them, so every
    reference points at an already-defined entity.
    """
    lines = [
        "ISO-10303-21;",
        "HEADER;",
        "FILE_DESCRIPTION(('3D sketch curves'),'2;1');",
        f"FILE_NAME('{name}','',(''),(''),'sketch3d','sketch3d','');",
        "FILE_SCHEMA(('AUTOMOTIVE_DESIGN { 1 0 10303 214 1 1 1 1 }'));",
        "ENDSEC;",
        "DATA;",
    ]
    eid = 0
    for c in sketch.curves:
        refs = []
        for p in c.points:
            eid += 1
            refs.append(f"#{eid}")
            lines.append(f"#{eid}=CARTESIAN_POINT('',({','.join(_real(v) for v in p)}));")
        n = c.degree
        eid += 1
        lines.append(
            f"#{eid}=(BOUNDED_CURVE() "
            f"B_SPLINE_CURVE({n},({','.join(refs)}),.UNSPECIFIED.,.F.,.F.) "
            f"B_SPLINE_CURVE_WITH_KNOTS(({n + 1},{n + 1}),(0.,1.),.PIECEWISE_BEZIER_KNOTS.) "
            f"CURVE() GEOMETRIC_REPRESENTATION_ITEM() "
            f"RATIONAL_B_SPLINE_CURVE(({','.join(_real(w) for w in c.weights)})) "
            f"REPRESENTATION_ITEM('{_tag(c)}'));"
        )
    lines += ["ENDSEC;", "END-ISO-10303-21;"]
    return "\n".join(lines) + "\n"


def export_step(sketch: Sketch, path) -> None:
    _write_text(path, step_text(sketch, os.path.basename(os.fspath(path))))


_POINT_RE = re.compile(r"^#(\d+)=CARTESIAN_POINT\('[^']*',\(([^()]*)\)\);$")
_CURVE_RE = re.compile(
    r"^#(\d+)=\(BOUNDED_CURVE\(\) B_SPLINE_CURVE\((\d+),\(([^()]*)\),[^)]*\) "
    r"B_SPLINE_CURVE_WITH_KNOTS\(\((\d+),(\d+)\),\(0\.,1\.\),\.PIECEWISE_BEZIER_KNOTS\.\) "
    r"CURVE\(\) GEOMETRIC_REPRESENTATION_ITEM\(\) "
    r"RATIONAL_B_SPLINE_CURVE\(\(([^()]*)\)\) REPRESENTATION_ITEM\('([^']*)'\)\);$"
)
_TAG_RE = re.compile(r"^id=(-?\d+) order=(-?\d+) width=(\S+) color=(\S+)$")


def parse_step(text: str) -> Sketch:
    """Read back what :func:`step_text` writes; not a general STEP parser."""
    lines = text.splitlines()
    try:
        start = lines.index("DATA;")
    except ValueError:
        raise StepParseError("line 1: no DATA section") from None
    points: dict[int, np.ndarray] = {}
    curves = []
    for lineno, line in enumerate(lines[start + 1 :], start + 2):
        line = line.strip()
        if line == "ENDSEC;":
            break
        if not line:
            continue
        try:
            if m := _POINT_RE.match(line):
                xyz = [float(v) for v in m.group(2).split(",")]
                if len(xyz) != 3:
                    raise ValueError("point needs 3 coordinates")
                points[int(m.group(1))] = np.array(xyz)
            elif m := _CURVE_RE.match(line):
                n = int(m.group(2))
                refs = [int(r.strip().lstrip("#")) for r in m.group(3).split(",")]
                if len(refs) != n + 1 or int(m.group(4)) != n + 1 or int(m.group(5)) != n + 1:
                    raise ValueError("knot multiplicities do not match a Bezier segment")
                weights = np.array([float(w) for w in m.group(6).split(",")])
                pts = np.array([points[r] for r in refs])
                kw = {"id": len(curves), "user_order": len(curves)}
                if t := _TAG_RE.match(m.group(7)):
                    kw = {"id": int(t.group(1)), "user_order": int(t.group(2)),
                          "width": float(t.group(3)),
                          "color": [float(v) for v in t.group(4).split(",")]}
                curves.append(RationalBezier3(pts, weights, **kw))
            else:
                raise ValueError("unrecognized entity")
        except (ValueError, KeyError) as exc:
            raise StepParseError(f"line {lineno}: {exc}") from exc
    else:
        raise StepParseError(f"line {len(lines)}: unterminated DATA section")
    return Sketch(curves)


def import_step(path) -> Sketch:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read STEP {os.fspath(path)!r}: {exc.strerror or exc}") from exc
    return parse_step(text)
