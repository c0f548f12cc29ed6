"""Two-photon coincidence dip from the joint spectral amplitude.

Coincidence probability after the balanced combiner, relative delay delta:

    P(delta) = 1/2 [1 - d * Re II f(Os, Oi) conj(f(Oi, Os)) e^{-i(Os-Oi) delta}]

with d the distinguishability factor. Common phase applied to both inputs
cancels inside the exchange product point by point, which is what makes
the dip immune to matched dispersion; the computation inherits that
cancellation exactly even when the sampled phase wraps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biphoton import JointSpectralAmplitude
from .errors import DomainError, ValidationError
from .seeding import as_rng


@dataclass(frozen=True)
class HomProfile:
    delays_s: np.ndarray
    probability: np.ndarray
    baseline: float = 0.5

    def __post_init__(self):
        if len(self.delays_s) != len(self.probability):
            raise ValidationError("delays and probabilities must match in length")


@dataclass(frozen=True)
class DipMetrics:
    visibility: float
    width_fwhm_s: float
    minimum_delay_s: float


def _exchange_kernel(jsa: JointSpectralAmplitude):
    """Collapse f(Os,Oi) conj(f(Oi,Os)) onto the difference detuning.

    Returns (v_values, weights) where v = Os - Oi runs over the 2N-1
    anti-diagonal offsets of the square grid.
    """
    if jsa.omega_signal.shape != jsa.omega_idler.shape or not np.allclose(
        jsa.omega_signal, jsa.omega_idler
    ):
        raise ValidationError("exchange kernel needs identical detuning grids")
    w = jsa.amplitude * np.conj(jsa.amplitude.T)
    n = len(jsa.omega_signal)
    step = jsa.d_omega_signal
    i = np.arange(n)
    diff_index = (i[:, None] - i[None, :]).ravel() + (n - 1)
    sums = np.bincount(diff_index, weights=w.real.ravel(), minlength=2 * n - 1) + (
        1j * np.bincount(diff_index, weights=w.imag.ravel(), minlength=2 * n - 1)
    )
    v = (np.arange(2 * n - 1) - (n - 1)) * step
    return v, sums * step * step


def hom_profile(
    jsa: JointSpectralAmplitude,
    delays_s,
    distinguishability: float = 1.0,
) -> HomProfile:
    """Dip profile over the given delays; P -> 1/2 away from the dip."""
    if not jsa.is_normalized():
        raise ValidationError(
            f"joint spectral amplitude not normalized (norm={jsa.norm():.6g})"
        )
    if not 0.0 <= distinguishability <= 1.0:
        raise DomainError("distinguishability must be in [0, 1]")
    delays = np.asarray(delays_s, dtype=float)
    v, weights = _exchange_kernel(jsa)
    overlap = (np.exp(-1j * np.outer(delays, v)) @ weights).real
    prob = 0.5 * (1.0 - distinguishability * overlap)
    return HomProfile(delays_s=delays, probability=prob)


def dip_metrics(profile: HomProfile) -> DipMetrics:
    """Visibility, full width at half depth, and the interpolated minimum."""
    p = profile.probability
    base = profile.baseline
    imin = int(np.argmin(p))
    if imin in (0, len(p) - 1):
        raise DomainError("dip not captured: minimum sits on the delay boundary")
    depth = base - p[imin]
    if depth <= 0:
        raise DomainError("dip not captured: profile has no depth")

    # parabolic vertex through the three points around the sample minimum
    x = profile.delays_s[imin - 1 : imin + 2]
    y = p[imin - 1 : imin + 2]
    denom = (y[0] - 2 * y[1] + y[2])
    if denom <= 0:
        minimum_delay = float(x[1])
    else:
        minimum_delay = float(x[1] + 0.5 * (y[0] - y[2]) / denom * (x[1] - x[0]))

    half = base - 0.5 * depth
    below = p < half
    if not below[imin]:
        raise DomainError("dip not captured: no half-depth crossing")
    lo = imin
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = imin
    while hi < len(p) - 1 and below[hi + 1]:
        hi += 1
    if lo == 0 or hi == len(p) - 1:
        raise DomainError("dip not captured: half-depth crossing outside range")

    d = profile.delays_s

    def cross(i_out, i_in):
        frac = (half - p[i_out]) / (p[i_in] - p[i_out])
        return d[i_out] + frac * (d[i_in] - d[i_out])

    left = cross(lo - 1, lo)
    right = cross(hi + 1, hi)
    return DipMetrics(
        visibility=float(depth / base),
        width_fwhm_s=float(right - left),
        minimum_delay_s=minimum_delay,
    )


def sample_dip_counts(
    profile: HomProfile,
    pair_rate_hz: float,
    dwell_s: float,
    seed,
) -> np.ndarray:
    """Poisson counts per delay point; baseline mean is pair_rate * dwell."""
    if dwell_s < 0:
        raise DomainError("dwell must be >= 0")
    rng = as_rng(seed)
    mean = 2.0 * profile.probability * pair_rate_hz * dwell_s
    return rng.poisson(np.clip(mean, 0.0, None))
