"""Joint center/boundary training with a near-orthogonality penalty.

The joint objective is

    E(w) + sum_k L_k(w_k) + mu * sum_k <w~, w~_k>^2

where ``E`` and ``L_k`` are the ridge losses of :mod:`ibccf.cf` and ``~``
restricts a filter to the cells it shares with the other one. It is split
with ``g = w`` and ``u_k = w_k`` and solved by ADMM in the scaled form

    w   <- argmin E(w)   + rho   ||w   - g   - p  ||^2
    g   <- argmin mu ||Q^T g||^2 + rho ||w - g - p||^2
    w_k <- argmin L_k    + gamma ||w_k - u_k - q_k||^2
    u_k <- argmin mu (s^T u_k)^2 + gamma ||w_k - u_k - q_k||^2
    p   += g - w,   q_k += u_k - w_k

``Q`` stacks the four zero-padded boundary auxiliaries in center-filter
coordinates and ``s`` is the zero-padded ``g`` in boundary coordinates.
Updates run Gauss-Seidel: each block sees the freshest values of the
others.

Penalties are fixed for the whole solve. Left unset, they are matched to
the curvature of the coupling term at the warm start,
``rho = c mu sigma_max(Q)^2`` and ``gamma_k = c mu ||s_k||^2`` with
``c = penalty_scale``; a penalty far above that curvature stalls the
g/u steps, far below it the w steps.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cf
from .errors import NumericalFailure, ParameterError, UndefinedAngleError
from .geometry import (SIDES, CenterBox, RegionSpec, Side, boundary_region_spec, center_region_spec,
                       common_region)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SideProjection:
    center_index: np.ndarray    # flat indices into w (feature, row, col)
    boundary_index: np.ndarray  # flat indices into w_k (feature, cross, along)
    boundary_shape: tuple[int, int, int]


@dataclass(frozen=True)
class CommonProjection:
    center_shape: tuple[int, int, int]
    sides: dict

    @property
    def center_size(self) -> int:
        return int(np.prod(self.center_shape))

    def __getitem__(self, side: Side) -> SideProjection:
        return self.sides[side]

    def restrict_center(self, side: Side, w: np.ndarray) -> np.ndarray:
        return w.reshape(-1)[self.sides[side].center_index]

    def restrict_boundary(self, side: Side, wk: np.ndarray) -> np.ndarray:
        return wk.reshape(-1)[self.sides[side].boundary_index]

    def pad_to_center(self, side: Side, uk: np.ndarray) -> np.ndarray:
        """Column of Q: the common part of ``uk`` placed on the center grid."""
        sp = self.sides[side]
        out = np.zeros(self.center_size)
        out[sp.center_index] = uk.reshape(-1)[sp.boundary_index]
        return out

    def pad_to_boundary(self, side: Side, g: np.ndarray) -> np.ndarray:
        """The vector s: the common part of ``g`` placed on the side's grid."""
        sp = self.sides[side]
        out = np.zeros(int(np.prod(sp.boundary_shape)))
        out[sp.boundary_index] = g.reshape(-1)[sp.center_index]
        return out


def boundary_array_shape(spec: RegionSpec, side: Side, n_features: int) -> tuple[int, int, int]:
    if side.horizontal:
        return (n_features, spec.rows, spec.cols)
    return (n_features, spec.cols, spec.rows)


def build_projection(center_spec: RegionSpec, boundary_specs: dict, n_features: int) -> CommonProjection:
    """Index maps between the center grid and each boundary grid.

    All specs must live on one integer cell lattice. The shared cells of
    every feature channel are concatenated, feature-major then row-major.
    """
    cshape = (n_features, center_spec.rows, center_spec.cols)
    csize = center_spec.rows * center_spec.cols
    sides = {}
    for side in SIDES:
        bspec = boundary_specs[side]
        cr = common_region(center_spec, bspec)
        bshape = boundary_array_shape(bspec, side, n_features)
        bsize = bspec.rows * bspec.cols
        if side.horizontal:
            local_b = cr.second
        else:
            rows_b, cols_b = np.unravel_index(cr.second, (bspec.rows, bspec.cols))
            local_b = cols_b * bspec.rows + rows_b
        offs_c = (np.arange(n_features) * csize)[:, None]
        offs_b = (np.arange(n_features) * bsize)[:, None]
        sides[side] = SideProjection(
            (offs_c + cr.first[None]).ravel(),
            (offs_b + local_b[None]).ravel(),
            bshape,
        )
    return CommonProjection(cshape, sides)


def template_projection(tw: int, th: int, n_features: int, padding: float = 2.0,
                        alpha: float = 2.0, beta: float = 1.0) -> CommonProjection:
    """Projection for a ``tw`` x ``th`` cell target at the lattice origin."""
    unit = CenterBox(0.0, 0.0, float(tw), float(th))
    return build_projection(center_region_spec(unit, padding),
                            {s: boundary_region_spec(unit, s, alpha, beta) for s in SIDES}, n_features)


@dataclass
class TrainingData:
    """Samples and labels for one joint solve.

    ``x`` is (feature, row, col) with label ``y`` (row, col); ``xk[side]``
    is (feature, cross, along) with label ``yk[side]`` (along,).
    """

    x: np.ndarray
    y: np.ndarray
    xk: dict
    yk: dict
    lam: float = 1e-4

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 3 or self.x.shape[1:] != self.y.shape:
            raise ParameterError(f"center sample {self.x.shape} does not match label {self.y.shape}")
        for side in SIDES:
            xk = np.asarray(self.xk[side], dtype=float)
            yk = np.asarray(self.yk[side], dtype=float)
            if xk.ndim != 3 or xk.shape[-1] != yk.shape[0]:
                raise ParameterError(f"{side.value} sample {xk.shape} does not match label {yk.shape}")
            self.xk[side], self.yk[side] = xk, yk
        self.xf = cf.fft_nd(self.x, 2)
        self.yf = cf.fft_nd(self.y, 2)
        self.xkf = {s: cf.fft_nd(self.xk[s], 1) for s in SIDES}
        self.ykf = {s: cf.fft_nd(self.yk[s], 1) for s in SIDES}


@dataclass
class AdmmConfig:
    """``rho``/``gamma`` of None select the curvature-matched penalties."""

    mu: float = 0.1
    rho: float | None = None
    gamma: float | None = None
    penalty_scale: float = 2.0
    max_iters: int = 10
    tol: float = 1e-3
    threads: int = 1

    def __post_init__(self):
        if self.mu < 0:
            raise ParameterError("mu must be non-negative")
        for name in ("rho", "gamma"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive, got {v}")
        if not self.penalty_scale > 0:
            raise ParameterError("penalty_scale must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")


@dataclass
class AdmmState:
    w: np.ndarray
    g: np.ndarray
    p: np.ndarray
    wk: dict
    uk: dict
    qk: dict
    rho: float
    gamma: dict
    mu: float
    iteration: int = 0
    objective_history: list = field(default_factory=list)


def ridge_loss(w: np.ndarray, xf: np.ndarray, y: np.ndarray, lam: float, nd: int) -> float:
    resp = cf.real_ifft(cf.correlate_freq(cf.fft_nd(w, nd), xf, nd), nd)
    return float(((resp - y) ** 2).sum() + lam * (w ** 2).sum())


def orthogonality_terms(w: np.ndarray, wk: dict, proj: CommonProjection) -> dict:
    return {s: float(proj.restrict_center(s, w) @ proj.restrict_boundary(s, wk[s])) for s in SIDES}


def objective(state: AdmmState, data: TrainingData, proj: CommonProjection) -> float:
    total = ridge_loss(state.w, data.xf, data.y, data.lam, 2)
    for s in SIDES:
        total += ridge_loss(state.wk[s], data.xkf[s], data.yk[s], data.lam, 1)
    inner = orthogonality_terms(state.w, state.wk, proj)
    return total + state.mu * sum(v * v for v in inner.values())


def solve_w(data: TrainingData, g: np.ndarray, p: np.ndarray, rho: float, lam: float) -> np.ndarray:
    """Minimizer of E(w) + rho ||w - g - p||^2."""
    wf = cf.solve_ridge_freq(data.xf, data.yf, lam, cf.fft_nd(g + p, 2), rho)
    return cf.real_ifft(wf, 2)


def solve_wk(xkf: np.ndarray, ykf: np.ndarray, u_k: np.ndarray, q_k: np.ndarray,
             gamma: float, lam: float) -> np.ndarray:
    """Minimizer of L_k(w_k) + gamma ||w_k - u_k - q_k||^2."""
    if u_k.shape != xkf.shape:
        raise ParameterError(f"auxiliary {u_k.shape} does not match sample {xkf.shape}")
    wf = cf.solve_ridge_freq(xkf, ykf, lam, cf.fft_nd(u_k + q_k, 1), gamma)
    return cf.real_ifft(wf, 1)


def solve_g(w: np.ndarray, p: np.ndarray, proj: CommonProjection, u_all: dict,
            mu: float, rho: float) -> np.ndarray:
    """g = (mu Q Q^T + rho I)^{-1} rho (w - p) through a thin SVD of Q.

    With Q = U S V^T (four columns), the inverse is
    ``I - U diag(mu s^2 / (mu s^2 + rho)) U^T``; zero singular values
    contribute nothing, so rank-deficient Q needs no special case.
    """
    v = (w - p).reshape(-1)
    if mu == 0.0:
        return v.reshape(w.shape).copy()
    Q = np.stack([proj.pad_to_center(s, u_all[s]) for s in SIDES], axis=1)
    U, sig, _ = np.linalg.svd(Q, full_matrices=False)
    shrink = mu * sig ** 2 / (mu * sig ** 2 + rho)
    g = v - U @ (shrink * (U.T @ v))
    return g.reshape(w.shape)


def solve_uk(w_k: np.ndarray, q_k: np.ndarray, proj: CommonProjection, side: Side,
             g: np.ndarray, mu: float, gamma: float) -> np.ndarray:
    """u_k = (I - mu s s^T / (gamma + mu s^T s)) (w_k - q_k)."""
    v = (w_k - q_k).reshape(-1)
    s = proj.pad_to_boundary(side, g)
    u = v - s * (mu * (s @ v) / (gamma + mu * (s @ s)))
    return u.reshape(w_k.shape)


def dual_update(state: AdmmState) -> AdmmState:
    state.p = state.p + state.g - state.w
    for s in SIDES:
        state.qk[s] = state.qk[s] + state.uk[s] - state.wk[s]
    return state


def balanced_penalties(w: np.ndarray, wk: dict, proj: CommonProjection, mu: float,
                       scale: float = 2.0) -> tuple[float, dict]:
    """Penalties proportional to the coupling curvature at (w, wk).

    Falls back to 1.0 wherever that curvature vanishes (mu = 0 or no
    overlap energy); the problem is then decoupled and any penalty works.
    """
    Q = np.stack([proj.pad_to_center(s, wk[s]) for s in SIDES], axis=1)
    sig_max = np.linalg.norm(Q, 2)
    rho = scale * mu * sig_max ** 2
    gamma = {}
    for s in SIDES:
        g_common = proj.restrict_center(s, w)
        gamma[s] = scale * mu * float(g_common @ g_common)
    rho = rho if rho > 0 else 1.0
    gamma = {s: (v if v > 0 else 1.0) for s, v in gamma.items()}
    return float(rho), gamma


def initial_state(data: TrainingData, config: AdmmConfig, proj: CommonProjection | None = None) -> AdmmState:
    """Independent closed-form filters; auxiliaries copy them, duals zero."""
    w = cf.real_ifft(cf.solve_ridge_freq(data.xf, data.yf, data.lam), 2)
    wk = {s: cf.real_ifft(cf.solve_ridge_freq(data.xkf[s], data.ykf[s], data.lam), 1) for s in SIDES}
    rho = config.rho
    gamma = {s: config.gamma for s in SIDES}
    if (rho is None or config.gamma is None) and proj is None:
        raise ParameterError("curvature-matched penalties need the common projection")
    if rho is None or config.gamma is None:
        auto_rho, auto_gamma = balanced_penalties(w, wk, proj, config.mu, config.penalty_scale)
        rho = auto_rho if rho is None else rho
        if config.gamma is None:
            gamma = auto_gamma
    return AdmmState(
        w=w, g=w.copy(), p=np.zeros_like(w),
        wk=wk, uk={s: wk[s].copy() for s in SIDES}, qk={s: np.zeros_like(wk[s]) for s in SIDES},
        rho=rho, gamma=gamma, mu=config.mu,
    )


@dataclass
class AdmmDiagnostics:
    objective_history: list
    iterations: int
    converged: bool
    center_residuals: list
    boundary_residuals: list  # one {side: norm} per iteration

    def log_lines(self) -> list[str]:
        head = "iter objective res_center " + " ".join(f"res_{s.value}" for s in SIDES)
        lines = [head, f"0 {self.objective_history[0]!r} - - - - -"]
        for i in range(self.iterations):
            res = self.boundary_residuals[i]
            lines.append(" ".join([str(i + 1), repr(self.objective_history[i + 1]),
                                   repr(self.center_residuals[i])]
                                  + [repr(res[s]) for s in SIDES]))
        return lines


@dataclass
class AdmmResult:
    center: cf.CenterFilter
    boundary: dict
    diagnostics: AdmmDiagnostics
    state: AdmmState


def _residuals_small(state: AdmmState, tol: float) -> bool:
    pairs = [(state.g, state.w)] + [(state.uk[s], state.wk[s]) for s in SIDES]
    return all(np.linalg.norm(a - b) <= tol * max(np.linalg.norm(b), np.finfo(float).tiny)
               for a, b in pairs)


def _check_finite(state: AdmmState, iteration: int):
    arrays = [state.w, state.g, state.p] + [a for d in (state.wk, state.uk, state.qk) for a in d.values()]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericalFailure(f"non-finite value in ADMM iterate {iteration}", iteration)


def run_admm(data: TrainingData, proj: CommonProjection, config: AdmmConfig | None = None,
             solve_uk_fn=solve_uk) -> AdmmResult:
    config = config or AdmmConfig()
    if proj.center_shape != data.x.shape:
        raise ParameterError(f"projection built for {proj.center_shape}, sample is {data.x.shape}")
    state = initial_state(data, config, proj)
    state.objective_history.append(objective(state, data, proj))
    center_res, boundary_res = [], []
    converged = False
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def side_update(side):
        wk = solve_wk(data.xkf[side], data.ykf[side], state.uk[side], state.qk[side],
                      state.gamma[side], data.lam)
        uk = solve_uk_fn(wk, state.qk[side], proj, side, state.g, state.mu, state.gamma[side])
        return side, wk, uk

    try:
        for it in range(1, config.max_iters + 1):
            state.w = solve_w(data, state.g, state.p, state.rho, data.lam)
            state.g = solve_g(state.w, state.p, proj, state.uk, state.mu, state.rho)
            results = pool.map(side_update, SIDES) if pool else map(side_update, SIDES)
            for side, wk, uk in results:
                state.wk[side], state.uk[side] = wk, uk
            dual_update(state)
            state.iteration = it
            _check_finite(state, it)

            center_res.append(float(np.linalg.norm(state.g - state.w)))
            boundary_res.append({s: float(np.linalg.norm(state.uk[s] - state.wk[s])) for s in SIDES})
            obj = objective(state, data, proj)
            if not math.isfinite(obj):
                raise NumericalFailure(f"non-finite objective at iteration {it}", it)
            prev = state.objective_history[-1]
            state.objective_history.append(obj)
            log.debug("admm iter %d objective %.6g", it, obj)
            # the warm start leaves the first w-step idle, so a flat
            # objective alone is not convergence while g, u_k still move
            flat = abs(obj - prev) <= config.tol * max(abs(prev), np.finfo(float).tiny)
            if flat and _residuals_small(state, config.tol):
                converged = True
                break
    finally:
        if pool:
            pool.shutdown()

    center = cf.center_filter_from_coeffs(data.xf, cf.fft_nd(state.w, 2), data.lam)
    boundary = {s: cf.boundary_filter_from_coeffs(s, data.xkf[s], cf.fft_nd(state.wk[s], 1), data.lam)
                for s in SIDES}
    diag = AdmmDiagnostics(state.objective_history, state.iteration, converged, center_res, boundary_res)
    return AdmmResult(center, boundary, diag, state)


def _as_spatial(f, nd: int) -> np.ndarray:
    if isinstance(f, (cf.CenterFilter, cf.BoundaryFilter)):
        return f.spatial()
    return np.asarray(f, dtype=float)


def vector_angle(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedAngleError("angle undefined for a zero-norm vector")
    # half-angle form stays accurate near 0 and 180 degrees, unlike acos
    ua, ub = a / na, b / nb
    return math.degrees(2.0 * math.atan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub)))


def common_angle(center_filter, boundary_filter, proj: CommonProjection, side: Side) -> float:
    """Angle in degrees between the two filters over their shared cells."""
    w = _as_spatial(center_filter, 2)
    wk = _as_spatial(boundary_filter, 1)
    return vector_angle(proj.restrict_center(side, w), proj.restrict_boundary(side, wk))
