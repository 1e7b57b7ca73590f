"""Per-frame IBCCF tracking: center detection, boundary refinement, joint update.

All crops are sampled on a fixed template lattice measured in feature
cells. The lattice is anchored at the box center and stretched
anisotropically with the current box, so filter shapes never change while
the aspect ratio does. A box edge sits at ``+-tw/2`` (``+-th/2``) cells.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import cf
from .admm import (AdmmConfig, CommonProjection, TrainingData, build_projection, common_angle, run_admm)
from .errors import InitializationError, InvalidBoxError, ParameterError, TrackingFailure
from .features import FEATURE_KINDS, apply_cosine_window, feature_channels, feature_stack, to_gray
from .geometry import (SIDES, BoundaryBox, CenterBox, RegionSpec, Side, boundary_from_center,
                       boundary_region_spec, center_from_boundary, center_region_spec,
                       gaussian_label_1d, gaussian_label_2d)

log = logging.getLogger(__name__)

MIN_BOX_PX = 2.0


@dataclass
class TrackerConfig:
    lam: float = 1e-4
    mu: float = 0.1
    alpha: float = 2.0
    beta: float = 1.0
    padding: float = 2.0
    eta: float = 0.01
    sigma_center: float = 0.1
    sigma_boundary: float = 0.05
    admm_max_iters: int = 10
    admm_tol: float = 1e-3
    rho: float | None = None     # None: matched to the coupling curvature
    gamma: float | None = None
    features: str = "gray+grad"
    cell_size: int = 4
    hog_bins: int = 9
    channel_weights: tuple = ()
    template_size: float = 96.0
    boundary_clamp: float = 0.2
    disable_boundaries: bool = False
    threads: int = 0

    def __post_init__(self):
        positive = ("lam", "alpha", "beta", "sigma_center", "sigma_boundary", "admm_tol",
                    "template_size", "boundary_clamp")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("rho", "gamma"):
            if getattr(self, name) is not None and not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.mu < 0:
            raise ParameterError("mu must be non-negative")
        if self.padding < 1:
            raise ParameterError("padding must be >= 1")
        if not 0 <= self.eta <= 1:
            raise ParameterError("eta must lie in [0, 1]")
        if self.features not in FEATURE_KINDS:
            raise ParameterError(f"features must be one of {FEATURE_KINDS}")
        if self.cell_size < 1 or self.hog_bins < 2 or self.admm_max_iters < 1 or self.threads < 0:
            raise ParameterError("cell_size >= 1, hog_bins >= 2, admm_max_iters >= 1, threads >= 0")
        self.channel_weights = tuple(float(v) for v in self.channel_weights)
        if self.channel_weights and len(self.channel_weights) != self.n_features:
            raise ParameterError(f"channel_weights needs {self.n_features} values for {self.features!r}")

    @property
    def n_features(self) -> int:
        return feature_channels(self.features, self.hog_bins)

    @property
    def weights(self) -> np.ndarray | None:
        return np.array(self.channel_weights) if self.channel_weights else None

    def resolved_threads(self) -> int:
        if self.threads:
            return self.threads
        env = os.environ.get("IBCCF_THREADS")
        if env:
            return max(1, int(env))
        return min(4, os.cpu_count() or 1)

    def admm(self) -> AdmmConfig:
        return AdmmConfig(mu=self.mu, rho=self.rho, gamma=self.gamma, max_iters=self.admm_max_iters,
                          tol=self.admm_tol, threads=self.resolved_threads())


@dataclass(frozen=True)
class Template:
    """Cell lattice fixed at initialization."""

    tw: int  # target width in cells
    th: int
    cell: int
    center_spec: RegionSpec
    boundary_specs: dict

    @classmethod
    def for_box(cls, box: BoundaryBox, cfg: TrackerConfig) -> "Template":
        scale = cfg.template_size / math.sqrt(box.area)
        tw = max(2, 2 * int(round(box.width * scale / (2 * cfg.cell_size))))
        th = max(2, 2 * int(round(box.height * scale / (2 * cfg.cell_size))))
        unit = CenterBox(0.0, 0.0, float(tw), float(th))
        return cls(tw, th, cfg.cell_size, center_region_spec(unit, cfg.padding),
                   {s: boundary_region_spec(unit, s, cfg.alpha, cfg.beta) for s in SIDES})

    def px_per_cell(self, box: BoundaryBox) -> tuple[float, float]:
        return box.width / self.tw, box.height / self.th


@dataclass
class FrameDiagnostics:
    frame: int
    center_shift: tuple = (0, 0)
    boundary_shift: dict = field(default_factory=dict)
    admm_iterations: int = 0
    objective: float = float("nan")
    angles: dict = field(default_factory=dict)


@dataclass
class TrackerState:
    box: BoundaryBox
    center: cf.CenterFilter
    boundary: dict
    template: Template
    projection: CommonProjection | None
    config: TrackerConfig
    frame_index: int = 0
    diagnostics: FrameDiagnostics | None = None


def prepare_frame(frame: np.ndarray) -> np.ndarray:
    gray = to_gray(frame)
    if gray.ndim != 2 or gray.size == 0:
        raise ParameterError(f"frame must be a non-empty image, got shape {np.shape(frame)}")
    return gray


def sample_region(gray: np.ndarray, box: BoundaryBox, template: Template, spec: RegionSpec) -> np.ndarray:
    """Resample a cell-lattice window into a pixel patch.

    The patch holds ``cell`` samples per cell on each axis; samples outside
    the image replicate the border.
    """
    c = center_from_boundary(box)
    sx, sy = template.px_per_cell(box)
    n = template.cell
    u = spec.origin_x + (np.arange(spec.cols * n) + 0.5) / n
    v = spec.origin_y + (np.arange(spec.rows * n) + 0.5) / n
    xs = c.center_x + u * sx
    ys = c.center_y + v * sy
    step_x, step_y = sx / n, sy / n
    sigma = (0.5 * math.sqrt(max(step_y ** 2 - 1, 0.0)), 0.5 * math.sqrt(max(step_x ** 2 - 1, 0.0)))
    # blur only a margin around the window to keep the anti-alias cheap
    pad = int(3 * max(sigma)) + 2
    h, w = gray.shape
    y0 = max(0, min(h - 1, int(math.floor(ys[0])) - pad))
    y1 = max(y0 + 1, min(h, int(math.ceil(ys[-1])) + pad + 1))
    x0 = max(0, min(w - 1, int(math.floor(xs[0])) - pad))
    x1 = max(x0 + 1, min(w, int(math.ceil(xs[-1])) + pad + 1))
    sub = gray[y0:y1, x0:x1]
    if max(sigma) > 0:
        sub = ndimage.gaussian_filter(sub, sigma, mode="nearest")
    yy = np.clip(ys, 0, h - 1) - y0
    xx = np.clip(xs, 0, w - 1) - x0
    coords = np.meshgrid(yy, xx, indexing="ij")
    return ndimage.map_coordinates(sub, coords, order=1, mode="nearest")


def center_features(gray, box, template, cfg) -> np.ndarray:
    patch = sample_region(gray, box, template, template.center_spec)
    fm = feature_stack(patch, cfg.features, template.cell, cfg.hog_bins, cfg.weights)
    return apply_cosine_window(fm, "both")


def boundary_features(gray, box, template, cfg, side: Side):
    patch = sample_region(gray, box, template, template.boundary_specs[side])
    fm = feature_stack(patch, cfg.features, template.cell, cfg.hog_bins, cfg.weights)
    fm = apply_cosine_window(fm, "cols" if side.horizontal else "rows")
    if not side.horizontal:
        fm = dataclasses.replace(fm, data=fm.data.transpose(0, 2, 1))
    return fm


def center_label(template: Template, cfg: TrackerConfig) -> np.ndarray:
    spec = template.center_spec
    sigma = cfg.sigma_center * math.sqrt(template.tw * template.th)
    return gaussian_label_2d(spec.rows, spec.cols, sigma, sigma).values


def boundary_label(template: Template, cfg: TrackerConfig, side: Side) -> np.ndarray:
    spec = template.boundary_specs[side]
    length = spec.cols if side.horizontal else spec.rows
    return gaussian_label_1d(length, cfg.sigma_boundary * length).values


def _map(cfg: TrackerConfig, fn, items):
    threads = cfg.resolved_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def training_data(gray, box, template, cfg: TrackerConfig) -> TrainingData:
    """Windowed samples and labels of every filter, cut around ``box``."""
    x = center_features(gray, box, template, cfg)
    feats = _map(cfg, lambda s: boundary_features(gray, box, template, cfg, s), SIDES)
    return TrainingData(x.data, center_label(template, cfg), {s: fm.data for s, fm in zip(SIDES, feats)},
                        {s: boundary_label(template, cfg, s) for s in SIDES}, cfg.lam)


def train(gray, box, template, projection, cfg: TrackerConfig):
    """Fresh filters for ``box``: joint ADMM, or center-only when boundaries are off."""
    if cfg.disable_boundaries:
        x = center_features(gray, box, template, cfg)
        return cf.train_center_filter(x, center_label(template, cfg), cfg.lam), {}, None
    result = run_admm(training_data(gray, box, template, cfg), projection, cfg.admm())
    return result.center, result.boundary, result.diagnostics


def init(frame: np.ndarray, box0: BoundaryBox, cfg: TrackerConfig | None = None) -> TrackerState:
    cfg = cfg or TrackerConfig()
    gray = prepare_frame(frame)
    h, w = gray.shape
    if box0.width < MIN_BOX_PX or box0.height < MIN_BOX_PX:
        raise InitializationError(f"box {box0.width}x{box0.height} is smaller than {MIN_BOX_PX} px")
    if box0.right <= 0 or box0.bottom <= 0 or box0.left >= w or box0.top >= h:
        raise InitializationError(f"box {box0} lies outside the {w}x{h} frame")
    template = Template.for_box(box0, cfg)
    projection = None
    if not cfg.disable_boundaries:
        projection = build_projection(template.center_spec, template.boundary_specs, cfg.n_features)
    center, boundary, diag = train(gray, box0, template, projection, cfg)
    state = TrackerState(box0, center, boundary, template, projection, cfg, 0)
    state.diagnostics = FrameDiagnostics(0, admm_iterations=diag.iterations if diag else 0,
                                         objective=diag.objective_history[-1] if diag else float("nan"))
    if not cfg.disable_boundaries:
        state.diagnostics.angles = angle_report(state)
    return state


def _finite_response(resp: cf.ResponseMap, what: str, frame: int):
    if not np.all(np.isfinite(resp.values)):
        raise TrackingFailure(f"non-finite {what} response at frame {frame}", frame)


def _clamp_to_frame(box: BoundaryBox, fallback: BoundaryBox, w: int, h: int) -> BoundaryBox:
    left, right = min(max(box.left, 0.0), w), min(max(box.right, 0.0), w)
    top, bottom = min(max(box.top, 0.0), h), min(max(box.bottom, 0.0), h)
    if right - left < MIN_BOX_PX or bottom - top < MIN_BOX_PX:
        return fallback
    return BoundaryBox(left, right, top, bottom)


def detect(state: TrackerState, gray: np.ndarray) -> tuple[BoundaryBox, FrameDiagnostics]:
    """Locate the target in ``gray`` without touching the model."""
    cfg, tpl, box = state.config, state.template, state.box
    frame = state.frame_index + 1
    diag = FrameDiagnostics(frame)

    resp = cf.detect_center(state.center, center_features(gray, box, tpl, cfg))
    _finite_response(resp, "center", frame)
    dr, dc = resp.displacement
    sx, sy = tpl.px_per_cell(box)
    c = center_from_boundary(box)
    moved = boundary_from_center(CenterBox(c.center_x + dc * sx, c.center_y + dr * sy, c.width, c.height))
    diag.center_shift = (dr, dc)
    if cfg.disable_boundaries:
        return moved, diag

    def refine(side):
        r = cf.detect_boundary(state.boundary[side], boundary_features(gray, moved, tpl, cfg, side))
        _finite_response(r, side.value, frame)
        return r.displacement[0]

    shifts = dict(zip(SIDES, _map(cfg, refine, SIDES)))
    diag.boundary_shift = shifts
    lim_x = cfg.boundary_clamp * moved.width
    lim_y = cfg.boundary_clamp * moved.height
    dx = {s: float(np.clip(shifts[s] * sx, -lim_x, lim_x)) for s in (Side.LEFT, Side.RIGHT)}
    dy = {s: float(np.clip(shifts[s] * sy, -lim_y, lim_y)) for s in (Side.TOP, Side.BOTTOM)}
    try:
        refined = BoundaryBox(moved.left + dx[Side.LEFT], moved.right + dx[Side.RIGHT],
                              moved.top + dy[Side.TOP], moved.bottom + dy[Side.BOTTOM])
    except InvalidBoxError:
        refined = moved
    h, w = gray.shape
    return _clamp_to_frame(refined, moved, w, h), diag


def step(state: TrackerState, frame: np.ndarray) -> tuple[TrackerState, BoundaryBox]:
    cfg = state.config
    gray = prepare_frame(frame)
    box, diag = detect(state, gray)
    center, boundary, admm_diag = train(gray, box, state.template, state.projection, cfg)
    center = cf.update_model(state.center, center, cfg.eta)
    boundary = {s: cf.update_model(state.boundary[s], boundary[s], cfg.eta) for s in boundary}
    if admm_diag is not None:
        diag.admm_iterations = admm_diag.iterations
        diag.objective = admm_diag.objective_history[-1]
    new = dataclasses.replace(state, box=box, center=center, boundary=boundary,
                              frame_index=state.frame_index + 1, diagnostics=diag)
    if not cfg.disable_boundaries:
        diag.angles = angle_report(new)
    return new, box


def angle_report(state: TrackerState) -> dict:
    """Center-vs-boundary filter angle (degrees) over each common region."""
    if state.projection is None or not state.boundary:
        raise ParameterError("angles need boundary filters; boundaries are disabled")
    return {s: common_angle(state.center, state.boundary[s], state.projection, s) for s in SIDES}


def standard_fixture(seed: int = 0, features: str = "gray+grad", cell: int = 4, noise: float = 2.0):
    """One joint training problem with a 32x32-cell center grid.

    A 48 px square target in a 160 px frame, with a template of 16x16 cells
    so the padded center region is 32x32 cells. Returns the training data,
    the common-region projection and the config used.
    """
    from .synthetic import SynthSpec, synth_sequence

    seq = synth_sequence(SynthSpec(frame_width=160, frame_height=160, frames=2, center_x=80.0,
                                   center_y=80.0, width=48.0, height=48.0, noise=noise, seed=seed))
    cfg = TrackerConfig(features=features, cell_size=cell, template_size=16.0 * cell)
    box = seq.groundtruth[0]
    template = Template.for_box(box, cfg)
    proj = build_projection(template.center_spec, template.boundary_specs, cfg.n_features)
    return training_data(prepare_frame(seq.frames[0]), box, template, cfg), proj, cfg
