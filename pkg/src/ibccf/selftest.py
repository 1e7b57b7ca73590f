"""Dense-oracle checks of every closed-form solver.

Each check draws random instances, solves them with the fast routine and
with an explicit dense reference from :mod:`ibccf.oracles`, and records
the worst discrepancy against its required tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import admm, cf, oracles
from .geometry import SIDES


@dataclass(frozen=True)
class CheckResult:
    name: str
    achieved: float
    required: float
    trials: int
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.achieved) and self.achieved <= self.required)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: achieved {self.achieved:.3e}, required <= {self.required:.0e}"
                f" ({self.trials} trials, {self.seconds:.2f} s)")


def _smooth_label(rng, shape) -> np.ndarray:
    sig = rng.uniform(0.5, 2.0)
    axes = np.meshgrid(*[np.minimum(np.arange(n), n - np.arange(n)) for n in shape], indexing="ij")
    return np.exp(-0.5 * sum(a ** 2 for a in axes) / sig ** 2)


def center_ridge_error(rng, trials: int = 20, max_side: int = 16, max_channels: int = 3,
                       lam: float = 1e-2) -> float:
    """Max |w_fft - w_dense| over random 2D multi-channel instances."""
    worst = 0.0
    for t in range(trials):
        # always include the largest instance
        r, c = (max_side, max_side) if t == 0 else rng.integers(2, max_side + 1, size=2)
        ch = max_channels if t == 0 else int(rng.integers(1, max_channels + 1))
        x = rng.standard_normal((ch, r, c))
        y = _smooth_label(rng, (r, c))
        w = cf.train_center_filter(x, y, lam).spatial()
        ref = oracles.dense_ridge(x, y, lam).reshape(w.shape)
        worst = max(worst, float(np.abs(w - ref).max()))
    return worst


def boundary_ridge_error(rng, trials: int = 20, max_len: int = 32, max_channels: int = 8,
                         lam: float = 1e-2) -> float:
    """Max |w_fft - w_dense| over random 1D multi-channel instances."""
    worst = 0.0
    for t in range(trials):
        n = max_len if t == 0 else int(rng.integers(2, max_len + 1))
        ch = max_channels if t == 0 else int(rng.integers(1, max_channels + 1))
        x = rng.standard_normal((1, ch, n))
        y = _smooth_label(rng, (n,))
        w = cf.train_boundary_filter(x, y, lam).spatial()
        ref = oracles.dense_ridge(x.reshape(ch, n), y, lam).reshape(w.shape)
        worst = max(worst, float(np.abs(w - ref).max()))
    return worst


def correlation_error(rng, trials: int = 10) -> float:
    worst = 0.0
    for _ in range(trials):
        ch, r, c = rng.integers(1, 4), rng.integers(2, 9), rng.integers(2, 9)
        w = rng.standard_normal((ch, r, c))
        x = rng.standard_normal((ch, r, c))
        fast = cf.real_ifft(cf.correlate_freq(cf.fft_nd(w, 2), cf.fft_nd(x, 2), 2), 2)
        worst = max(worst, float(np.abs(fast - oracles.correlation_loop(w, x, 2)).max()))
    return worst


def _random_problem(rng, n_features: int = 2, tw: int = 4, th: int = 4):
    proj = admm.template_projection(tw, th, n_features)
    w = rng.standard_normal(proj.center_shape)
    u_all = {s: rng.standard_normal(proj[s].boundary_shape) for s in SIDES}
    return proj, w, u_all


def g_update_error(rng, trials: int = 50) -> float:
    """SVD g-update vs the dense inverse, cycling the rank of Q through 0..4."""
    worst = 0.0
    for t in range(trials):
        rank = t % 5
        proj, w, u_all = _random_problem(rng)
        for s in SIDES[rank:]:
            u_all[s] = np.zeros_like(u_all[s])
        p = rng.standard_normal(w.shape)
        mu, rho = 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-2, 1)
        Q = np.stack([proj.pad_to_center(s, u_all[s]) for s in SIDES], axis=1)
        fast = admm.solve_g(w, p, proj, u_all, mu, rho).reshape(-1)
        ref = oracles.dense_g_update(w.reshape(-1), p.reshape(-1), Q, mu, rho)
        worst = max(worst, float(np.abs(fast - ref).max()))
    return worst


def u_update_error(rng, trials: int = 50, solve_uk_fn=None) -> float:
    solve_uk_fn = solve_uk_fn or admm.solve_uk
    worst = 0.0
    for t in range(trials):
        proj, g, u_all = _random_problem(rng)
        side = SIDES[t % 4]
        wk = u_all[side]
        qk = rng.standard_normal(wk.shape)
        mu, gamma = 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-2, 1)
        fast = solve_uk_fn(wk, qk, proj, side, g, mu, gamma).reshape(-1)
        ref = oracles.dense_u_update(wk.reshape(-1), qk.reshape(-1), proj.pad_to_boundary(side, g), mu, gamma)
        worst = max(worst, float(np.abs(fast - ref).max()))
    return worst


def _dense_loss(x, y, nd):
    X = oracles.shift_matrix(x, nd)
    yv = y.reshape(-1)
    return lambda w: float(np.sum((X @ w - yv) ** 2))


def w_stationarity(rng, trials: int = 5, lam: float = 1e-2) -> float:
    """Finite-difference gradient norm of the w-subproblem at solve_w's output."""
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal((2, 8, 8))
        y = _smooth_label(rng, (8, 8))
        g, p = rng.standard_normal(x.shape), rng.standard_normal(x.shape)
        rho = 10 ** rng.uniform(-1, 1)
        data = admm.TrainingData(x, y, {s: np.zeros((1, 1, 2)) for s in SIDES},
                                 {s: np.zeros(2) for s in SIDES}, lam)
        w = admm.solve_w(data, g, p, rho, lam).reshape(-1)
        loss = _dense_loss(x, y, 2)
        target = (g + p).reshape(-1)
        f = lambda v: loss(v) + lam * v @ v + rho * np.sum((v - target) ** 2)
        worst = max(worst, float(np.linalg.norm(oracles.central_gradient(f, w))))
    return worst


def wk_stationarity(rng, trials: int = 5, lam: float = 1e-2) -> float:
    worst = 0.0
    for _ in range(trials):
        ch, n = 4, 16
        x = rng.standard_normal((1, ch, n))
        y = _smooth_label(rng, (n,))
        u, q = rng.standard_normal(x.shape), rng.standard_normal(x.shape)
        gamma = 10 ** rng.uniform(-1, 1)
        wk = admm.solve_wk(cf.fft_nd(x, 1), cf.fft_nd(y, 1), u, q, gamma, lam).reshape(-1)
        loss = _dense_loss(x.reshape(ch, n), y, 1)
        target = (u + q).reshape(-1)
        f = lambda v: loss(v) + lam * v @ v + gamma * np.sum((v - target) ** 2)
        worst = max(worst, float(np.linalg.norm(oracles.central_gradient(f, wk))))
    return worst


def decoupled_error(rng, trials: int = 3, lam: float = 1e-2) -> float:
    """With mu = 0 ADMM must stop after one iteration at the independent filters.

    Returns the larger of the filter discrepancy and (iterations - 1).
    """
    worst = 0.0
    for _ in range(trials):
        proj = admm.template_projection(4, 4, 2)
        x = rng.standard_normal(proj.center_shape)
        xk = {s: rng.standard_normal(proj[s].boundary_shape) for s in SIDES}
        yk = {s: _smooth_label(rng, (xk[s].shape[-1],)) for s in SIDES}
        data = admm.TrainingData(x, _smooth_label(rng, x.shape[1:]), xk, yk, lam)
        res = admm.run_admm(data, proj, admm.AdmmConfig(mu=0.0))
        diff = float(np.abs(res.state.w - oracles.dense_ridge(x, data.y, lam).reshape(x.shape)).max())
        for s in SIDES:
            ch = xk[s].shape[0] * xk[s].shape[1]
            ref = oracles.dense_ridge(xk[s].reshape(ch, -1), yk[s], lam).reshape(xk[s].shape)
            diff = max(diff, float(np.abs(res.state.wk[s] - ref).max()))
        worst = max(worst, diff, float(res.diagnostics.iterations - 1))
    return worst


CHECKS = (
    ("center ridge vs dense circulant solve", center_ridge_error, 1e-8),
    ("boundary ridge vs dense stacked-circulant solve", boundary_ridge_error, 1e-8),
    ("FFT correlation vs scalar loop", correlation_error, 1e-10),
    ("SVD g-update vs dense inverse (rank 0-4)", g_update_error, 1e-8),
    ("Sherman-Morrison u-update vs dense inverse", u_update_error, 1e-10),
    ("w-subproblem stationarity (finite differences)", w_stationarity, 1e-6),
    ("w_k-subproblem stationarity (finite differences)", wk_stationarity, 1e-6),
    ("mu = 0 stops at 1 iteration on independent filters", decoupled_error, 1e-8),
)

_TRIALS = {center_ridge_error: 20, boundary_ridge_error: 20, correlation_error: 10, g_update_error: 50,
           u_update_error: 50, w_stationarity: 5, wk_stationarity: 5, decoupled_error: 3}


def run_selftest(seed: int = 0, solve_uk_fn=None) -> list[CheckResult]:
    """Run every check; ``solve_uk_fn`` swaps in a u-update (fault injection)."""
    results = []
    for i, (name, fn, tol) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        if fn is u_update_error:
            achieved = fn(rng, solve_uk_fn=solve_uk_fn)
        else:
            achieved = fn(rng)
        results.append(CheckResult(name, achieved, tol, _TRIALS[fn], time.perf_counter() - t0))
    return results
