"""Downlink link-budget model: path loss, SINR and Shannon data rate.

The received power model is G * P * h * C * d^-alpha over a noise floor
W + I (interference defaults to zero, so SINR == SNR).  Rates are hard
zero beyond a RAT's maximum communication range.  Distances below one
metre are clamped to avoid the power-law singularity.
"""

from __future__ import annotations

import numpy as np

from .config import MIN_DISTANCE_M, RatConfig


def path_loss(rat: RatConfig, d_m):
    """Dimensionless propagation loss C * d^-alpha at distance ``d_m``.

    Accepts a scalar or ndarray of distances; non-positive distances are
    clamped to ``MIN_DISTANCE_M`` rather than raising.
    """
    d = np.maximum(np.asarray(d_m, dtype=float), MIN_DISTANCE_M)
    out = rat.pathloss_c * d ** (-rat.pathloss_alpha)
    return out if out.ndim else float(out)


def sinr(rat: RatConfig, d_m, fading_h: float | None = None):
    """Signal-to-interference-and-noise ratio at distance ``d_m``.

    ``fading_h`` overrides the RAT's fast-fading coefficient (used for
    per-frame Rayleigh draws); by default the configured constant applies.
    """
    h = rat.fading_h if fading_h is None else fading_h
    num = rat.antenna_gain * rat.tx_power_w * h * path_loss(rat, d_m)
    out = np.asarray(num / (rat.noise_w + rat.interference_w))
    return out if out.ndim else float(out)


def data_rate(rat: RatConfig, d_m, fading_h: float | None = None):
    """Achievable downlink rate in bit/s: bandwidth * log2(1 + SINR).

    Zero beyond the RAT's maximum communication range.
    """
    d = np.asarray(d_m, dtype=float)
    rate = rat.bandwidth_hz * np.log2(1.0 + sinr(rat, d, fading_h))
    out = np.where(d > rat.max_range_m, 0.0, rate)
    return out if out.ndim else float(out)


def max_data_rate(rats) -> float:
    """Best rate any RAT can offer (attained at the clamp distance).

    Used to normalise link-rate features into [0, 1].
    """
    return max(data_rate(rat, MIN_DISTANCE_M) for rat in rats)
