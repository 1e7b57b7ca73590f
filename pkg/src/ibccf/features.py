"""Hand-crafted feature front end: grayscale, gradient histograms, windows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParameterError


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray  # (channel, row, col)
    cell_size: int = 1
    channel_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise ParameterError(f"feature data must be (channel, row, col), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("feature data contains non-finite values")
        object.__setattr__(self, "data", data)
        weights = self.channel_weights
        if weights is None:
            weights = np.ones(data.shape[0])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (data.shape[0],) or np.any(weights < 0):
            raise ParameterError("channel_weights must be one non-negative value per channel")
        object.__setattr__(self, "channel_weights", weights)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]


def to_gray(patch: np.ndarray) -> np.ndarray:
    patch = np.asarray(patch, dtype=float)
    if patch.ndim == 3:
        # ITU-R 601 luma
        patch = patch[..., :3] @ np.array([0.299, 0.587, 0.114])
    return patch


def extract_grayscale(patch: np.ndarray) -> FeatureMap:
    gray = to_gray(patch)
    if gray.size == 0:
        raise ParameterError("empty patch")
    return FeatureMap(gray / 255.0 - 0.5, cell_size=1)


def _gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # centered differences, replicated border
    gx = ndimage.correlate1d(gray, [-0.5, 0.0, 0.5], axis=1, mode="nearest")
    gy = ndimage.correlate1d(gray, [-0.5, 0.0, 0.5], axis=0, mode="nearest")
    return gx, gy


def _cell_sum(a: np.ndarray, cell: int) -> np.ndarray:
    r, c = a.shape[-2] // cell, a.shape[-1] // cell
    a = a[..., : r * cell, : c * cell]
    return a.reshape(a.shape[:-2] + (r, cell, c, cell)).sum(axis=(-3, -1))


def extract_gradient_hist(patch: np.ndarray, cell: int = 4, bins: int = 9) -> FeatureMap:
    """Unsigned orientation histograms of gradient magnitude per cell.

    Returns ``bins`` orientation channels followed by one magnitude
    channel. Orientation 0 is a purely horizontal gradient (a vertical
    edge). Votes are split linearly between the two nearest bin centers.
    Each cell is divided by the L2 energy of its 3x3 cell neighbourhood,
    so its histogram norm never exceeds 1.
    """
    gray = to_gray(patch)
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    if cell < 1 or gray.ndim != 2 or gray.shape[0] < cell or gray.shape[1] < cell:
        raise ParameterError(f"patch {gray.shape} smaller than one {cell}px cell")
    gray = gray / 255.0
    gx, gy = _gradients(gray)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    pos = theta / (np.pi / bins)
    lo = np.floor(pos).astype(int) % bins
    frac = pos - np.floor(pos)
    hi = (lo + 1) % bins

    w_lo = mag * (1.0 - frac)
    w_hi = mag * frac
    votes = np.stack([np.where(lo == b, w_lo, 0.0) + np.where(hi == b, w_hi, 0.0)
                      for b in range(bins)])
    hist = _cell_sum(votes, cell)

    energy = (hist ** 2).sum(axis=0)
    block = ndimage.uniform_filter(energy, size=3, mode="nearest") * 9.0
    norm = np.sqrt(block + 1e-12)
    hist = hist / norm
    magnitude = np.sqrt((hist ** 2).sum(axis=0))
    return FeatureMap(np.concatenate([hist, magnitude[None]]), cell_size=cell)


def hann(n: int) -> np.ndarray:
    if n == 1:
        return np.ones(1)
    return np.hanning(n)


def apply_cosine_window(fm: FeatureMap, axes: str = "both") -> FeatureMap:
    """Taper every channel with Hann windows.

    ``axes`` is "both", "rows" (taper along the row index only) or "cols".
    """
    if axes not in ("both", "rows", "cols"):
        raise ParameterError(f"unknown window axes {axes!r}")
    rows, cols = fm.shape
    wr = hann(rows) if axes in ("both", "rows") else np.ones(rows)
    wc = hann(cols) if axes in ("both", "cols") else np.ones(cols)
    return FeatureMap(fm.data * np.outer(wr, wc)[None], fm.cell_size, fm.channel_weights)


FEATURE_KINDS = ("gray", "grad", "gray+grad")


def feature_stack(patch: np.ndarray, kind: str = "gray+grad", cell: int = 4, bins: int = 9,
                  channel_weights=None) -> FeatureMap:
    """Features on a ``cell``-sized grid.

    Grayscale is average-pooled to the cell grid so it stacks with the
    gradient channels.
    """
    if kind not in FEATURE_KINDS:
        raise ParameterError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    parts = []
    if "gray" in kind.split("+"):
        g = extract_grayscale(patch).data[0]
        parts.append(_cell_sum(g, cell)[None] / (cell * cell))
    if "grad" in kind.split("+"):
        parts.append(extract_gradient_hist(patch, cell, bins).data)
    data = np.concatenate(parts)
    return FeatureMap(data, cell_size=cell, channel_weights=channel_weights)


def feature_channels(kind: str, bins: int = 9) -> int:
    return ("gray" in kind.split("+")) + ("grad" in kind.split("+")) * (bins + 1)
