"""Frequency-correlated photon pair model.

The two-photon spectral amplitude is a bivariate Gaussian over detunings
(Omega_s, Omega_i) about each photon's own band center:

    f ~ exp(-(Os + Oi)^2 / (4 sigma_sum^2)) * exp(-(Os - Oi)^2 / (4 sigma_diff^2))

sigma_sum is inherited from the pump spectral width through energy
conservation; sigma_diff is calibrated so the two-photon interference dip
has the requested full width at half depth:

    dip FWHM = 2 sqrt(2 ln 2) / sigma_diff

Dispersion enters as a multiplicative phase exp(i[phi_s(Os) + phi_i(Oi)]).
For long fibers the sampled phase wraps many times per grid step, so the
phase callables are also kept on the object; consumers that need the
temporal domain (arrival-time densities) re-evaluate them on adequately
fine grids instead of trusting the sampled values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.constants import c

from .errors import ConfigurationError, NumericError, ValidationError
from .fiber_model import FiberLink, group_delay_coefficient, gvd_coefficient

TWO_SQRT_2LN2 = 2.0 * np.sqrt(2.0 * np.log(2.0))


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / TWO_SQRT_2LN2


def difference_bandwidth_for_dip_width(dip_fwhm_s: float) -> float:
    """sigma_diff (rad/s) giving a Gaussian dip of the requested FWHM."""
    return TWO_SQRT_2LN2 / dip_fwhm_s


def sum_bandwidth_from_pump(pump_center_nm: float, pump_fwhm_nm: float) -> float:
    """sigma_sum (rad/s) from the pump intensity FWHM via energy conservation."""
    lam = pump_center_nm * 1e-9
    dw_fwhm = 2.0 * np.pi * c * (pump_fwhm_nm * 1e-9) / lam**2
    return dw_fwhm / TWO_SQRT_2LN2


@dataclass(frozen=True)
class PhotonPairSource:
    wavelength_signal_nm: float = 1574.4
    wavelength_idler_nm: float = 1574.7
    pump_center_nm: float = 787.0
    pump_bandwidth_fwhm_nm: float = 25.0
    repetition_rate_hz: float = 75e6
    pair_rate_hz: float = 272.54
    sum_bandwidth_rad_s: float = field(
        default_factory=lambda: sum_bandwidth_from_pump(787.0, 25.0)
    )
    difference_bandwidth_rad_s: float = field(
        default_factory=lambda: difference_bandwidth_for_dip_width(3.25e-12)
    )
    distinguishability: float = 0.60

    def __post_init__(self):
        problems = []
        for name in (
            "pump_bandwidth_fwhm_nm",
            "repetition_rate_hz",
            "pair_rate_hz",
            "sum_bandwidth_rad_s",
            "difference_bandwidth_rad_s",
        ):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if not 0.0 <= self.distinguishability <= 1.0:
            problems.append("distinguishability must be in [0, 1]")
        inv_pump = 1.0 / self.pump_center_nm
        inv_pair = 1.0 / self.wavelength_signal_nm + 1.0 / self.wavelength_idler_nm
        if abs(inv_pump - inv_pair) / inv_pump > 1e-3:
            problems.append(
                "energy conservation violated: 1/pump differs from "
                "1/signal + 1/idler by more than 0.1%"
            )
        if problems:
            raise ValidationError(problems)

    @property
    def omega_signal(self) -> float:
        return 2.0 * np.pi * c / (self.wavelength_signal_nm * 1e-9)

    @property
    def omega_idler(self) -> float:
        return 2.0 * np.pi * c / (self.wavelength_idler_nm * 1e-9)


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """Discretized complex two-photon spectral amplitude.

    omega_signal / omega_idler are uniform detuning grids (rad/s) symmetric
    about zero; amplitude[i, j] corresponds to (omega_signal[i],
    omega_idler[j]). sum_sigma/diff_sigma record the generating Gaussian
    when known; phase_signal/phase_idler record analytically applied phases.
    """

    omega_signal: np.ndarray
    omega_idler: np.ndarray
    amplitude: np.ndarray
    sum_sigma: Optional[float] = None
    diff_sigma: Optional[float] = None
    phase_signal: tuple[Callable, ...] = ()
    phase_idler: tuple[Callable, ...] = ()

    @property
    def d_omega_signal(self) -> float:
        return float(self.omega_signal[1] - self.omega_signal[0])

    @property
    def d_omega_idler(self) -> float:
        return float(self.omega_idler[1] - self.omega_idler[0])

    def norm(self) -> float:
        return float(
            np.sum(np.abs(self.amplitude) ** 2)
            * self.d_omega_signal
            * self.d_omega_idler
        )

    def is_normalized(self, tol: float = 1e-6) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def signal_marginal(self) -> np.ndarray:
        """Marginal density of |f|^2 over the signal detuning, unit integral."""
        dens = np.sum(np.abs(self.amplitude) ** 2, axis=1) * self.d_omega_idler
        return dens / np.trapezoid(dens, self.omega_signal)

    def total_phase(self):
        """Summed analytic phase callables, or None when none recorded."""
        if not self.phase_signal and not self.phase_idler:
            return None

        def phi_s(omega):
            return sum(p(omega) for p in self.phase_signal) if self.phase_signal else 0.0

        def phi_i(omega):
            return sum(p(omega) for p in self.phase_idler) if self.phase_idler else 0.0

        return phi_s, phi_i


def gaussian_jsa(
    source: PhotonPairSource,
    grid_size: int = 512,
    span_sigmas: float = 6.0,
) -> JointSpectralAmplitude:
    """Construct the normalized Gaussian JSA on a grid_size^2 detuning grid.

    The grid half-width is span_sigmas times the single-photon marginal
    width sqrt(sigma_sum^2 + sigma_diff^2)/2.
    """
    if grid_size < 64:
        raise ConfigurationError(f"grid_size must be >= 64, got {grid_size}")
    sp = source.sum_bandwidth_rad_s
    sm = source.difference_bandwidth_rad_s
    marg = np.sqrt(sp**2 + sm**2) / 2.0
    half = span_sigmas * marg
    if half < 3.0 * marg:
        raise ConfigurationError(
            f"span_sigmas={span_sigmas} too small to hold the spectrum"
        )
    axis = np.linspace(-half, half, grid_size)
    os, oi = np.meshgrid(axis, axis, indexing="ij")
    amp = np.exp(-((os + oi) ** 2) / (4.0 * sp**2) - ((os - oi) ** 2) / (4.0 * sm**2))
    amp = amp.astype(complex)
    d = axis[1] - axis[0]
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * d * d)
    return JointSpectralAmplitude(
        omega_signal=axis,
        omega_idler=axis.copy(),
        amplitude=amp,
        sum_sigma=sp,
        diff_sigma=sm,
    )


def apply_dispersion(
    jsa: JointSpectralAmplitude,
    phase_signal: Callable,
    phase_idler: Callable,
) -> JointSpectralAmplitude:
    """Multiply by exp(i[phi_s(Os) + phi_i(Oi)]); modulus is unchanged."""
    ps = phase_signal(jsa.omega_signal)
    pi = phase_idler(jsa.omega_idler)
    ps = np.broadcast_to(np.asarray(ps, dtype=float), jsa.omega_signal.shape)
    pi = np.broadcast_to(np.asarray(pi, dtype=float), jsa.omega_idler.shape)
    if not (np.all(np.isfinite(ps)) and np.all(np.isfinite(pi))):
        bad_s = jsa.omega_signal[~np.isfinite(ps)]
        bad_i = jsa.omega_idler[~np.isfinite(pi)]
        raise NumericError(
            f"non-finite phase at detunings signal={bad_s[:3]} idler={bad_i[:3]}"
        )
    phase = ps[:, None] + pi[None, :]
    return replace(
        jsa,
        amplitude=jsa.amplitude * np.exp(1j * phase),
        phase_signal=jsa.phase_signal + (phase_signal,),
        phase_idler=jsa.phase_idler + (phase_idler,),
    )


@dataclass(frozen=True)
class QuadraticPhase:
    """phi(Omega) = linear_s * Omega + half_quadratic_s2 * Omega^2.

    Group-delay (k' l) and accumulated-GVD (k'' l / 2) coefficients of a
    propagation phase, constant term dropped. Callable on detuning arrays.
    """

    linear_s: float
    half_quadratic_s2: float

    def __call__(self, omega):
        return self.linear_s * omega + self.half_quadratic_s2 * omega**2

    def __add__(self, other: "QuadraticPhase") -> "QuadraticPhase":
        return QuadraticPhase(
            self.linear_s + other.linear_s,
            self.half_quadratic_s2 + other.half_quadratic_s2,
        )


ZERO_PHASE = QuadraticPhase(0.0, 0.0)


def fiber_phase(
    link: Optional[FiberLink],
    wavelength_nm: float,
    temperature_c: float = 22.0,
) -> QuadraticPhase:
    """Propagation phase of one arm: sum over segments of
    k' l Omega + (k'' l / 2) Omega^2 at the arm's band center.

    ``link=None`` means no fiber (zero phase).
    """
    if link is None:
        return ZERO_PHASE
    total = ZERO_PHASE
    for seg in link.segments:
        t = temperature_c + seg.temperature_offset_c
        kp = group_delay_coefficient(link.dispersion, wavelength_nm, t)
        kpp = gvd_coefficient(link.dispersion, wavelength_nm, t)
        total = total + QuadraticPhase(kp * seg.length_m, 0.5 * kpp * seg.length_m)
    return total


def common_center_wavelength_nm(source: PhotonPairSource) -> float:
    """Wavelength of the mean of the two band-center frequencies."""
    mean_omega = 0.5 * (source.omega_signal + source.omega_idler)
    return 2.0 * np.pi * c / mean_omega * 1e9


def arm_phases(
    link_signal: Optional[FiberLink],
    link_idler: Optional[FiberLink],
    source: PhotonPairSource,
    temperature_c: float = 22.0,
) -> tuple[QuadraticPhase, QuadraticPhase]:
    """Propagation phases for the two photons on a shared detuning grid.

    Both photons traverse the same fiber type, so their phases are two
    expansions of one k(omega) curve. Expanding each about its own band
    center and then comparing on a common grid misstates the curvature
    difference; instead the group-delay (linear) term is taken at each
    photon's own center while the curvature term uses the mean band
    center for both. Identical equal-length arms then cancel exactly in
    any interference quantity, while the per-photon group delays (and
    hence the arrival-time offset between the arms) are preserved.
    """
    lam_mid = common_center_wavelength_nm(source)

    def one(link, lam_own):
        own = fiber_phase(link, lam_own, temperature_c)
        mid = fiber_phase(link, lam_mid, temperature_c)
        return QuadraticPhase(own.linear_s, mid.half_quadratic_s2)

    return (
        one(link_signal, source.wavelength_signal_nm),
        one(link_idler, source.wavelength_idler_nm),
    )
