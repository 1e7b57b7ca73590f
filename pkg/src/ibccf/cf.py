"""Frequency-domain correlation filters: 2-D center and 1-D boundary.

Conventions shared by every routine here and in :mod:`ibccf.admm`:

* DFT is unnormalized forward, ``1/N`` inverse (numpy default).
* A filter ``w`` responds to a sample ``x`` by circular *correlation*,
  ``r[tau] = sum_c sum_t w_c[t] x_c[t + tau]``, i.e.
  ``r_hat = sum_c conj(w_hat_c) * x_hat_c``. Filter cell ``t`` therefore
  lines up with sample cell ``t``, and a response peak at ``tau`` means the
  content moved by ``+tau``.
* Labels peak at index 0 (zero displacement); peaks are unwrapped into
  ``(-n/2, n/2]``.

Boundary samples are arrays ``(feature, cross, along)``: every
(feature, cross) pair is one 1-D channel running along the localization
axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .features import FeatureMap
from .geometry import Label1D, Label2D, Side

IMAG_TOL = 1e-8


def fft_nd(a: np.ndarray, nd: int) -> np.ndarray:
    return np.fft.fftn(a, axes=tuple(range(-nd, 0)))


def ifft_nd(a: np.ndarray, nd: int) -> np.ndarray:
    return np.fft.ifftn(a, axes=tuple(range(-nd, 0)))


def real_ifft(a: np.ndarray, nd: int) -> np.ndarray:
    out = ifft_nd(a, nd)
    return out.real


def _channel_axes(ndim: int, nd: int) -> tuple[int, ...]:
    return tuple(range(ndim - nd))


def energy_spectrum(xf: np.ndarray, nd: int) -> np.ndarray:
    """sum over channels of |x_hat|^2; shape of the spatial grid."""
    return (xf.real ** 2 + xf.imag ** 2).sum(axis=_channel_axes(xf.ndim, nd))


def solve_ridge_freq(xf: np.ndarray, yf: np.ndarray, lam: float,
                     prior_f: np.ndarray | None = None, penalty: float = 0.0) -> np.ndarray:
    """Per-frequency minimizer of

        ||sum_c w_c (*) x_c - y||^2 + lam ||w||^2 + penalty ||w - prior||^2

    where (*) is the correlation above. ``xf`` carries channel axes in
    front of the ``yf.ndim`` spatial axes. At each frequency the normal
    matrix is ``conj(a) a^T + (lam + penalty) I`` with ``a`` the channel
    vector of ``xf``; it is inverted with Sherman-Morrison. Without a
    prior this collapses to ``x_hat conj(y_hat) / (sum |x_hat|^2 + lam)``.
    """
    nd = yf.ndim
    axes = _channel_axes(xf.ndim, nd)
    energy = energy_spectrum(xf, nd)
    if prior_f is None or penalty == 0.0:
        return xf * np.conj(yf) / (energy + lam)
    c = lam + penalty
    if c <= 0:
        raise ParameterError("lam + penalty must be positive")
    # v = conj(w_hat) solves (conj(a) a^T + c I) v = conj(a) y + penalty conj(prior)
    rhs = np.conj(xf) * yf + penalty * np.conj(prior_f)
    proj = (xf * rhs).sum(axis=axes)
    v = (rhs - np.conj(xf) * (proj / (c + energy))) / c
    return np.conj(v)


def correlate_freq(wf: np.ndarray, xf: np.ndarray, nd: int, weights=None) -> np.ndarray:
    prod = np.conj(wf) * xf
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        prod = prod * w.reshape(w.shape + (1,) * (prod.ndim - 1))
    return prod.sum(axis=_channel_axes(prod.ndim, nd))


def unwrap_index(idx: int, n: int) -> int:
    """Map a circular index into the signed range (-n/2, n/2]."""
    idx = int(idx) % n
    return idx - n if idx > n // 2 else idx


@dataclass(frozen=True)
class ResponseMap:
    values: np.ndarray
    peak: tuple[int, ...]
    peak_value: float

    @property
    def displacement(self) -> tuple[int, ...]:
        return tuple(unwrap_index(p, n) for p, n in zip(self.peak, self.values.shape))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "ResponseMap":
        flat = int(np.argmax(values))
        peak = tuple(int(i) for i in np.unravel_index(flat, values.shape))
        return cls(values, peak, float(values[peak]))


@dataclass(frozen=True)
class CenterFilter:
    coeffs_freq: np.ndarray        # (channel, row, col)
    numerator_freq: np.ndarray     # same shape as coeffs
    denominator_freq: np.ndarray   # (row, col), real
    lam: float

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs_freq.shape

    def spatial(self) -> np.ndarray:
        return real_ifft(self.coeffs_freq, 2)


@dataclass(frozen=True)
class BoundaryFilter:
    side: Side
    coeffs_freq: np.ndarray               # (feature, cross, along)
    numerator_freq: np.ndarray
    shared_denominator_freq: np.ndarray   # (along,), real
    lam: float

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs_freq.shape

    @property
    def denominator_freq(self) -> np.ndarray:
        return self.shared_denominator_freq

    def spatial(self) -> np.ndarray:
        return real_ifft(self.coeffs_freq, 1)


def _label_values(y, ndim: int) -> np.ndarray:
    values = y.values if isinstance(y, (Label1D, Label2D)) else np.asarray(y, dtype=float)
    if values.ndim != ndim:
        raise ParameterError(f"expected a {ndim}-D label, got shape {values.shape}")
    return values


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, FeatureMap) else np.asarray(x, dtype=float)


def center_filter_from_coeffs(xf: np.ndarray, coeffs_freq: np.ndarray, lam: float) -> CenterFilter:
    """Wrap coefficients with caches so that coeffs = numerator / denominator."""
    den = energy_spectrum(xf, 2) + lam
    return CenterFilter(coeffs_freq, coeffs_freq * den, den, lam)


def boundary_filter_from_coeffs(side: Side, xf: np.ndarray, coeffs_freq: np.ndarray,
                                lam: float) -> BoundaryFilter:
    den = energy_spectrum(xf, 1) + lam
    return BoundaryFilter(side, coeffs_freq, coeffs_freq * den, den, lam)


def train_center_filter(x, y, lam: float = 1e-4) -> CenterFilter:
    data = _data(x)
    yv = _label_values(y, 2)
    if data.ndim == 2:
        data = data[None]
    if data.shape[1:] != yv.shape:
        raise ParameterError(f"feature grid {data.shape[1:]} does not match label {yv.shape}")
    if lam < 0:
        raise ParameterError("lam must be non-negative")
    xf = fft_nd(data, 2)
    yf = fft_nd(yv, 2)
    num = xf * np.conj(yf)
    den = energy_spectrum(xf, 2) + lam
    return CenterFilter(num / den, num, den, lam)


def detect_center(f: CenterFilter, x) -> ResponseMap:
    data = _data(x)
    if data.ndim == 2:
        data = data[None]
    if data.shape != f.shape:
        raise ParameterError(f"features {data.shape} do not match filter {f.shape}")
    weights = x.channel_weights if isinstance(x, FeatureMap) else None
    resp = real_ifft(correlate_freq(f.coeffs_freq, fft_nd(data, 2), 2, weights), 2)
    return ResponseMap.from_values(resp)


def _boundary_data(x) -> np.ndarray:
    data = _data(x)
    if data.ndim == 2:
        # (channel, along) -> one feature plane
        data = data[None]
    if data.ndim != 3:
        raise ParameterError(f"boundary features must be (feature, cross, along), got {data.shape}")
    return data


def train_boundary_filter(x_b, y_b, lam: float = 1e-4, side: Side = Side.LEFT) -> BoundaryFilter:
    """Multi-channel 1-D filter; every (feature, cross) row is a channel."""
    data = _boundary_data(x_b)
    yv = _label_values(y_b, 1)
    if data.shape[-1] != yv.shape[0]:
        raise ParameterError(f"channel length {data.shape[-1]} does not match label {yv.shape[0]}")
    if lam < 0:
        raise ParameterError("lam must be non-negative")
    xf = fft_nd(data, 1)
    yf = fft_nd(yv, 1)
    num = xf * np.conj(yf)
    den = energy_spectrum(xf, 1) + lam
    return BoundaryFilter(side, num / den, num, den, lam)


def detect_boundary(f: BoundaryFilter, x_b) -> ResponseMap:
    data = _boundary_data(x_b)
    if data.shape != f.shape:
        raise ParameterError(f"features {data.shape} do not match filter {f.shape}")
    weights = x_b.channel_weights if isinstance(x_b, FeatureMap) else None
    resp = real_ifft(correlate_freq(f.coeffs_freq, fft_nd(data, 1), 1, weights), 1)
    return ResponseMap.from_values(resp)


def update_model(old, fresh, eta: float):
    """Blend numerator and denominator caches: (1 - eta) old + eta fresh."""
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    if type(old) is not type(fresh) or old.shape != fresh.shape:
        raise ParameterError("cannot blend filters of different kind or shape")
    if eta == 0.0:
        return old
    if eta == 1.0:
        return fresh
    num = (1 - eta) * old.numerator_freq + eta * fresh.numerator_freq
    den = (1 - eta) * old.denominator_freq + eta * fresh.denominator_freq
    if isinstance(old, CenterFilter):
        return CenterFilter(num / den, num, den, fresh.lam)
    return BoundaryFilter(fresh.side, num / den, num, den, fresh.lam)
