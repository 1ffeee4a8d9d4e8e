"""Canonical hemodynamic response kernel.

The kernel is the classic difference of two gamma densities: a positive
response peak minus a scaled, delayed undershoot. Defaults follow the common
convention of a 6 s peak, 16 s undershoot, unit dispersions, a 1/6 undershoot
ratio, and a 32 s kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma

from .errors import InvalidParamsError


@dataclass(frozen=True)
class HrfParams:
    peak_delay: float = 6.0
    undershoot_delay: float = 16.0
    peak_dispersion: float = 1.0
    undershoot_dispersion: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0
    kernel_length: float = 32.0

    def __post_init__(self):
        for name in (
            "peak_delay",
            "undershoot_delay",
            "peak_dispersion",
            "undershoot_dispersion",
            "undershoot_ratio",
            "kernel_length",
        ):
            if getattr(self, name) <= 0:
                raise InvalidParamsError(f"{name} must be positive, got {getattr(self, name)}")


def canonical_hrf(p: HrfParams, tr: float) -> np.ndarray:
    """Sample the double-gamma response kernel at volume resolution.

    The kernel starts at t=0, has ``ceil(kernel_length / tr)`` samples, and is
    normalized to peak amplitude 1 (left untouched when identically zero,
    e.g. a single-sample kernel whose only point is t=0).

    Parameters
    ----------
    p : HrfParams
    tr : float
        Seconds per volume; must be positive.

    Returns
    -------
    ndarray
        Kernel samples at t = 0, tr, 2*tr, ...
    """
    if tr <= 0:
        raise InvalidParamsError(f"tr must be positive, got {tr}")
    n = math.ceil(p.kernel_length / tr)
    t = np.arange(n) * tr
    kernel = np.zeros(n)
    pos = t > 0
    kernel[pos] = gamma.pdf(
        t[pos], p.peak_delay / p.peak_dispersion, scale=p.peak_dispersion
    ) - p.undershoot_ratio * gamma.pdf(
        t[pos], p.undershoot_delay / p.undershoot_dispersion, scale=p.undershoot_dispersion
    )
    peak = kernel.max()
    if peak > 0:
        kernel = kernel / peak
    return kernel
