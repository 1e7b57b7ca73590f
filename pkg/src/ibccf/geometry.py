"""Box parameterizations, region windows, Gaussian labels and overlap.

Coordinates are continuous with pixel centers at integers. A box is kept
real-valued throughout tracking and only rounded when a crop window is
materialized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBoxError, NoOverlapError, ParameterError


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"

    @property
    def horizontal(self) -> bool:
        """True when the side localizes along the x axis (left/right)."""
        return self in (Side.LEFT, Side.RIGHT)


SIDES = (Side.LEFT, Side.RIGHT, Side.TOP, Side.BOTTOM)


@dataclass(frozen=True)
class BoundaryBox:
    left: float
    right: float
    top: float
    bottom: float

    def __post_init__(self):
        vals = (self.left, self.right, self.top, self.bottom)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box {vals}")
        if not (self.left < self.right and self.top < self.bottom):
            raise InvalidBoxError(f"degenerate box {vals}")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.right - self.left, self.bottom - self.top)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BoundaryBox":
        return cls(x, x + w, y, y + h)

    def coord(self, side: Side) -> float:
        return getattr(self, side.value)


@dataclass(frozen=True)
class CenterBox:
    center_x: float
    center_y: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidBoxError(f"non-positive size {self.width}x{self.height}")


@dataclass(frozen=True)
class RegionSpec:
    """Integer crop window; ``origin`` is the top-left cell."""

    origin_x: int
    origin_y: int
    rows: int
    cols: int
    replicate_border: bool = True

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterError(f"empty region {self.rows}x{self.cols}")

    @property
    def x_end(self) -> int:
        return self.origin_x + self.cols

    @property
    def y_end(self) -> int:
        return self.origin_y + self.rows


@dataclass(frozen=True)
class Label2D:
    values: np.ndarray
    peak_index: tuple[int, int]


@dataclass(frozen=True)
class Label1D:
    values: np.ndarray
    peak_index: int


def boundary_from_center(box: CenterBox) -> BoundaryBox:
    half_w = box.width / 2
    half_h = box.height / 2
    return BoundaryBox(
        box.center_x - half_w, box.center_x + half_w,
        box.center_y - half_h, box.center_y + half_h,
    )


def center_from_boundary(box: BoundaryBox) -> CenterBox:
    if not (box.left < box.right and box.top < box.bottom):
        raise InvalidBoxError(f"degenerate box {box}")
    return CenterBox(
        (box.left + box.right) / 2,
        (box.top + box.bottom) / 2,
        box.right - box.left,
        box.bottom - box.top,
    )


def _circular_gaussian(n: int, sigma: float, peak: int) -> np.ndarray:
    idx = np.arange(n)
    d = np.abs(idx - peak % n)
    d = np.minimum(d, n - d)
    # floored so far tails stay strictly positive instead of underflowing
    return np.maximum(np.exp(-0.5 * (d / sigma) ** 2), np.finfo(float).tiny)


def gaussian_label_1d(length: int, sigma: float, peak: int = 0) -> Label1D:
    """Circular 1-D Gaussian with value 1.0 at ``peak``.

    The default peak at index 0 means "zero displacement" under the
    correlation convention used by the filters.
    """
    if length < 1:
        raise ParameterError(f"label length must be >= 1, got {length}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    peak = int(peak) % length
    return Label1D(_circular_gaussian(length, sigma, peak), peak)


def gaussian_label_2d(rows: int, cols: int, sigma_row: float, sigma_col: float,
                      peak: tuple[int, int] = (0, 0)) -> Label2D:
    if rows < 1 or cols < 1:
        raise ParameterError(f"label grid must be non-empty, got {rows}x{cols}")
    if not (sigma_row > 0 and sigma_col > 0):
        raise ParameterError(f"sigmas must be positive, got {sigma_row}, {sigma_col}")
    pr, pc = int(peak[0]) % rows, int(peak[1]) % cols
    values = np.outer(_circular_gaussian(rows, sigma_row, pr),
                      _circular_gaussian(cols, sigma_col, pc))
    return Label2D(values, (pr, pc))


def _centered_spec(cx: float, cy: float, width: float, height: float) -> RegionSpec:
    cols = max(1, int(round(width)))
    rows = max(1, int(round(height)))
    return RegionSpec(int(round(cx - cols / 2)), int(round(cy - rows / 2)), rows, cols)


def center_region_spec(box: CenterBox, padding_factor: float) -> RegionSpec:
    if padding_factor < 1:
        raise ParameterError(f"padding_factor must be >= 1, got {padding_factor}")
    return _centered_spec(box.center_x, box.center_y,
                          padding_factor * box.width, padding_factor * box.height)


def boundary_region_spec(box: CenterBox, side: Side, alpha: float, beta: float) -> RegionSpec:
    """Window centered on the midpoint of one box edge.

    Along the localization axis the window spans ``alpha`` times the box
    extent on that axis; across it, ``beta`` times the other extent.
    """
    if not (alpha > 0 and beta > 0):
        raise ParameterError(f"alpha, beta must be positive, got {alpha}, {beta}")
    b = boundary_from_center(box)
    if side is Side.LEFT:
        return _centered_spec(b.left, box.center_y, alpha * box.width, beta * box.height)
    if side is Side.RIGHT:
        return _centered_spec(b.right, box.center_y, alpha * box.width, beta * box.height)
    if side is Side.TOP:
        return _centered_spec(box.center_x, b.top, beta * box.width, alpha * box.height)
    return _centered_spec(box.center_x, b.bottom, beta * box.width, alpha * box.height)


def crop_region(image: np.ndarray, spec: RegionSpec) -> np.ndarray:
    """Cut ``spec`` out of ``image`` (rows, cols[, channels]).

    Cells outside the image repeat the nearest edge pixel.
    """
    h, w = image.shape[:2]
    ys = np.arange(spec.origin_y, spec.y_end)
    xs = np.arange(spec.origin_x, spec.x_end)
    if not spec.replicate_border and (ys.min() < 0 or xs.min() < 0 or ys.max() >= h or xs.max() >= w):
        raise ParameterError("region leaves the image and border replication is off")
    return image[np.clip(ys, 0, h - 1)[:, None], np.clip(xs, 0, w - 1)[None, :]]


@dataclass(frozen=True)
class CommonRegion:
    """Intersection of two windows plus where it sits in each of them.

    ``first`` and ``second`` are flat row-major indices into the
    respective (rows, cols) grids, both enumerating the intersection in
    the same spatial order.
    """

    region: RegionSpec
    first: np.ndarray
    second: np.ndarray
    first_slices: tuple[slice, slice]
    second_slices: tuple[slice, slice]


def common_region(a: RegionSpec, b: RegionSpec) -> CommonRegion:
    x0, x1 = max(a.origin_x, b.origin_x), min(a.x_end, b.x_end)
    y0, y1 = max(a.origin_y, b.origin_y), min(a.y_end, b.y_end)
    if x1 <= x0 or y1 <= y0:
        raise NoOverlapError(f"regions {a} and {b} do not intersect")
    inter = RegionSpec(x0, y0, y1 - y0, x1 - x0)

    def local(spec):
        rs = slice(y0 - spec.origin_y, y1 - spec.origin_y)
        cs = slice(x0 - spec.origin_x, x1 - spec.origin_x)
        grid = np.arange(spec.rows * spec.cols).reshape(spec.rows, spec.cols)
        return grid[rs, cs].ravel(), (rs, cs)

    fa, sa = local(a)
    fb, sb = local(b)
    return CommonRegion(inter, fa, fb, sa, sb)


def iou(a: BoundaryBox, b: BoundaryBox) -> float:
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
