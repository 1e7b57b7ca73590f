"""Seeded synthetic sequences with exact ground truth.

A textured rectangle is drawn over a textured static background. The
rectangle's texture is attached to the target and stretches with it, so
aspect-ratio changes alter only the target's extent and the edges it
exposes. Box coordinates are snapped to 1/256 px so that they survive an
x,y,w,h text round trip bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GenerationError, InvalidBoxError
from .geometry import BoundaryBox

GRID = 256.0


@dataclass
class Sequence:
    frames: list
    groundtruth: list
    name: str = "sequence"
    attributes: tuple = ()

    def __post_init__(self):
        if len(self.frames) != len(self.groundtruth):
            raise GenerationError(f"{len(self.frames)} frames but {len(self.groundtruth)} boxes")
        if len(self.frames) < 2:
            raise GenerationError("a sequence needs at least two frames")

    def __len__(self):
        return len(self.frames)


@dataclass
class SynthSpec:
    frame_width: int = 400
    frame_height: int = 300
    frames: int = 30
    center_x: float = 200.0
    center_y: float = 150.0
    width: float = 40.0
    height: float = 80.0
    velocity_x: float = 0.0
    velocity_y: float = 0.0
    width_rate: float = 0.0   # fractional growth per frame (0.08 = +8%)
    height_rate: float = 0.0
    noise: float = 0.0        # std of additive Gaussian noise, grey levels
    seed: int = 0
    name: str = "synthetic"
    attributes: tuple = field(default_factory=tuple)

    def schedule(self) -> list[tuple[float, float, float, float]]:
        """(center_x, center_y, width, height) for every frame."""
        out = []
        for i in range(self.frames):
            out.append((self.center_x + i * self.velocity_x,
                        self.center_y + i * self.velocity_y,
                        self.width * (1.0 + self.width_rate) ** i,
                        self.height * (1.0 + self.height_rate) ** i))
        return out


def _snap(v: float) -> float:
    return round(v * GRID) / GRID


def _texture(rng, shape, smooth, lo, hi) -> np.ndarray:
    t = ndimage.gaussian_filter(rng.standard_normal(shape), smooth, mode="wrap")
    t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
    return lo + (hi - lo) * t


def render(background: np.ndarray, texture: np.ndarray, box: BoundaryBox) -> np.ndarray:
    """Paint ``texture`` into every pixel whose center lies inside ``box``."""
    img = background.copy()
    h, w = img.shape
    xs = np.arange(w)
    ys = np.arange(h)
    cols = xs[(xs >= box.left) & (xs < box.right)]
    rows = ys[(ys >= box.top) & (ys < box.bottom)]
    if cols.size == 0 or rows.size == 0:
        return img
    th, tw = texture.shape
    u = (cols - box.left) / box.width * (tw - 1)
    v = (rows - box.top) / box.height * (th - 1)
    vv, uu = np.meshgrid(v, u, indexing="ij")
    patch = ndimage.map_coordinates(texture, [vv, uu], order=1, mode="nearest")
    img[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] = patch
    return img


def synth_sequence(spec: SynthSpec) -> Sequence:
    if spec.frames < 2:
        raise GenerationError("need at least two frames")
    rng = np.random.default_rng(spec.seed)
    H, W = spec.frame_height, spec.frame_width
    background = _texture(rng, (H, W), 4.0, 20.0, 120.0)
    texture = _texture(rng, (64, 64), 3.0, 150.0, 240.0)

    boxes = []
    for i, (cx, cy, w, h) in enumerate(spec.schedule()):
        try:
            box = BoundaryBox(_snap(cx - w / 2), _snap(cx + w / 2), _snap(cy - h / 2), _snap(cy + h / 2))
        except InvalidBoxError as exc:
            raise GenerationError(f"frame {i + 1}: {exc}") from exc
        if box.left < 0 or box.top < 0 or box.right > W or box.bottom > H:
            raise GenerationError(f"frame {i + 1}: target {box.to_xywh()} leaves the {W}x{H} frame")
        boxes.append(box)

    frames = []
    for box in boxes:
        img = render(background, texture, box)
        if spec.noise > 0:
            img = img + rng.normal(0.0, spec.noise, img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return Sequence(frames, boxes, spec.name, tuple(spec.attributes))


def aspect_sequence(frames: int = 30, seed: int = 0, noise: float = 2.0) -> Sequence:
    """Fixture for the aspect-ratio ablation: width +8 %/frame, height -4 %/frame."""
    return synth_sequence(SynthSpec(frame_width=400, frame_height=300, frames=frames,
                                    center_x=200.0, center_y=150.0, width=30.0, height=110.0,
                                    width_rate=0.08, height_rate=-0.04, noise=noise, seed=seed,
                                    name="aspect", attributes=("aspect ratio variation",)))
