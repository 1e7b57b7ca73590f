"""Dense reference solvers used to check the fast paths.

Nothing here touches an FFT, an SVD shortcut or a rank-one identity: the
circulant data matrices are assembled from explicit cyclic shifts and every
system is handed to ``numpy.linalg.solve``. Sizes must stay small (a few
hundred unknowns).
"""

from __future__ import annotations

import itertools

import numpy as np


def shift_matrix(x: np.ndarray, nd: int) -> np.ndarray:
    """Rows are displacements tau, columns the flattened filter cells.

    ``X[tau, (c, t)] = x_c[t + tau]`` (indices modulo the grid), so that
    ``X @ w`` is the correlation response of ``w`` on ``x``.
    """
    spatial = x.shape[-nd:]
    lead = x.shape[:-nd]
    rows = []
    for tau in itertools.product(*(range(n) for n in spatial)):
        shifted = np.roll(x, tuple(-t for t in tau), axis=tuple(range(-nd, 0)))
        rows.append(shifted.reshape(-1))
    X = np.array(rows)
    assert X.shape == (int(np.prod(spatial)), int(np.prod(lead, dtype=int)) * int(np.prod(spatial)))
    return X


def dense_ridge(x: np.ndarray, y: np.ndarray, lam: float, prior: np.ndarray | None = None,
                penalty: float = 0.0) -> np.ndarray:
    """Solve (X^T X + (lam + penalty) I) w = X^T y + penalty * prior."""
    nd = y.ndim
    X = shift_matrix(x, nd)
    A = X.T @ X + (lam + penalty) * np.eye(X.shape[1])
    b = X.T @ y.reshape(-1)
    if prior is not None:
        b = b + penalty * prior.reshape(-1)
    return np.linalg.solve(A, b).reshape(x.shape)


def correlation_loop(w: np.ndarray, x: np.ndarray, nd: int) -> np.ndarray:
    """Scalar-loop circular correlation summed over channels."""
    spatial = x.shape[-nd:]
    wf = w.reshape((-1,) + spatial)
    xf = x.reshape((-1,) + spatial)
    out = np.zeros(spatial)
    cells = list(itertools.product(*(range(n) for n in spatial)))
    for tau in cells:
        acc = 0.0
        for c in range(wf.shape[0]):
            for t in cells:
                idx = tuple((ti + si) % n for ti, si, n in zip(t, tau, spatial))
                acc += wf[(c,) + t] * xf[(c,) + idx]
        out[tau] = acc
    return out


def dense_g_update(w, p, Q, mu, rho):
    """(mu Q Q^T + rho I)^{-1} rho (w - p) for flattened w, p."""
    n = Q.shape[0]
    return np.linalg.solve(mu * Q @ Q.T + rho * np.eye(n), rho * (w - p))


def dense_u_update(wk, qk, s, mu, gamma):
    """(mu s s^T + gamma I)^{-1} gamma (wk - qk) for flattened vectors."""
    n = s.shape[0]
    return np.linalg.solve(mu * np.outer(s, s) + gamma * np.eye(n), gamma * (wk - qk))


def central_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def raster_iou(a, b, scale: int = 1) -> float:
    """IoU by counting sub-pixel cells; exact for boxes on a 1/scale grid."""
    lo_x = int(np.floor(min(a.left, b.left) * scale))
    hi_x = int(np.ceil(max(a.right, b.right) * scale))
    lo_y = int(np.floor(min(a.top, b.top) * scale))
    hi_y = int(np.ceil(max(a.bottom, b.bottom) * scale))
    inter = union = 0
    for yy in range(lo_y, hi_y):
        cy = (yy + 0.5) / scale
        for xx in range(lo_x, hi_x):
            cx = (xx + 0.5) / scale
            ina = a.left <= cx < a.right and a.top <= cy < a.bottom
            inb = b.left <= cx < b.right and b.top <= cy < b.bottom
            inter += ina and inb
            union += ina or inb
    return inter / union if union else 0.0


def crop_loop(image: np.ndarray, origin_x: int, origin_y: int, rows: int, cols: int) -> np.ndarray:
    h, w = image.shape[:2]
    out = np.empty((rows, cols) + image.shape[2:], dtype=image.dtype)
    for r in range(rows):
        for c in range(cols):
            yy = min(max(origin_y + r, 0), h - 1)
            xx = min(max(origin_x + c, 0), w - 1)
            out[r, c] = image[yy, xx]
    return out
