"""Plain-text formats and the OTB directory layout.

A sequence directory holds ``img/`` with numbered frames (lexicographic
order is temporal order) and ``groundtruth_rect.txt`` with one ``x,y,w,h``
line per frame. Results files use the same line format. Numbers are
written with ``repr`` so a float survives a write/read cycle exactly.
"""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, IBCCFError, ParameterError, UsageError
from .geometry import BoundaryBox
from .synthetic import Sequence, SynthSpec

GROUNDTRUTH_NAMES = ("groundtruth_rect.txt", "groundtruth.txt")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm", ".tif", ".tiff")
_SEP = re.compile(r"[,\s]+")


def format_box(box: BoundaryBox) -> str:
    return ",".join(repr(float(v)) for v in box.to_xywh())


def parse_box(line: str, where: str = "") -> BoundaryBox:
    parts = [p for p in _SEP.split(line.strip()) if p]
    if len(parts) != 4:
        raise DataError(f"{where}expected 4 values x,y,w,h, got {len(parts)}")
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError:
        raise DataError(f"{where}non-numeric value in {line.strip()!r}") from None
    try:
        return BoundaryBox.from_xywh(x, y, w, h)
    except ParameterError as exc:
        raise DataError(f"{where}{exc}") from None


def read_boxes(path) -> list[BoundaryBox]:
    path = Path(path)
    boxes = []
    with open(path, encoding="ascii") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            boxes.append(parse_box(line, f"{path}:{n}: "))
    if not boxes:
        raise DataError(f"{path}: no boxes")
    return boxes


def write_boxes(path, boxes) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for box in boxes:
            fh.write(format_box(box) + "\n")


def find_groundtruth(seq_dir) -> Path:
    seq_dir = Path(seq_dir)
    for name in GROUNDTRUTH_NAMES:
        if (seq_dir / name).is_file():
            return seq_dir / name
    raise UsageError(f"{seq_dir}: no ground-truth file ({' or '.join(GROUNDTRUTH_NAMES)})")


def frame_paths(seq_dir) -> list[Path]:
    img = Path(seq_dir) / "img"
    if not img.is_dir():
        raise UsageError(f"{seq_dir}: no img/ directory")
    paths = sorted(p for p in img.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise UsageError(f"{img}: no frames")
    return paths


def read_frame(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"))
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"cannot read frame {path}: {exc}") from None


def load_sequence(seq_dir) -> Sequence:
    seq_dir = Path(seq_dir)
    if not seq_dir.is_dir():
        raise UsageError(f"{seq_dir} is not a directory")
    gt = read_boxes(find_groundtruth(seq_dir))
    paths = frame_paths(seq_dir)
    if len(paths) != len(gt):
        raise DataError(f"{seq_dir}: {len(paths)} frames but {len(gt)} ground-truth boxes")
    return Sequence([read_frame(p) for p in paths], gt, seq_dir.name)


def save_sequence(seq: Sequence, out_dir) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "img").mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(len(seq))))
    for i, frame in enumerate(seq.frames, 1):
        Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(out_dir / "img" / f"{i:0{digits}d}.png")
    write_boxes(out_dir / GROUNDTRUTH_NAMES[0], seq.groundtruth)
    return out_dir


# key=value files

def _parse_value(kind, text: str, key: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == "optional_float":
            return None if text.lower() in ("auto", "none", "") else float(text)
        if kind is tuple:
            return tuple(float(v) for v in _SEP.split(text) if v)
        if kind == "str_tuple":
            return tuple(v.strip() for v in text.split(";") if v.strip())
        return text
    except ValueError:
        raise UsageError(f"bad value for {key}: {text!r}") from None


def _field_kind(f: dataclasses.Field):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if "None" in t:
        return "optional_float"
    if t == "tuple":
        return "str_tuple" if f.name == "attributes" else tuple
    return {"bool": bool, "int": int, "float": float}.get(t, str)


def parse_key_values(text: str, cls, source: str = "config") -> dict:
    """``key = value`` lines into constructor kwargs of dataclass ``cls``.

    Blank lines and ``#`` comments are skipped; unknown keys are errors.
    """
    fields = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise UsageError(f"{source}:{n}: unknown key {key!r}")
        out[key] = _parse_value(_field_kind(fields[key]), value, key)
    return out


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        sep = ";" if all(isinstance(x, str) for x in v) else ","
        return sep.join(_format_value(x) for x in v)
    return str(v)


def format_key_values(obj) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(obj, f.name))}\n" for f in dataclasses.fields(obj))


def load_dataclass(path, cls, overrides: dict | None = None):
    kwargs = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        kwargs = parse_key_values(path.read_text(encoding="utf-8"), cls, str(path))
    kwargs.update(overrides or {})
    try:
        return cls(**kwargs)
    except IBCCFError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def load_synth_spec(path, overrides: dict | None = None) -> SynthSpec:
    return load_dataclass(path, SynthSpec, overrides)
