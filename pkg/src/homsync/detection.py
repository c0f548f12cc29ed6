"""Two-site detection chain: arrival-time-difference density, timestamp
streams against independent clocks, coincidence histograms, Gaussian peak
fitting, and time-offset estimation.

The arrival-difference density is computed in rotated spectral coordinates
u = Os + Oi, v = Os - Oi. Writing the two-photon temporal amplitude as a
Fourier transform over (u, v) and marginalizing the common time analytically
leaves, for each u, a one-dimensional transform over v:

    p(t-) ~ sum_u |f+(u)|^2 | FT_v[ f-(v) e^{i psi(u, v)} ](t-/2) |^2

which stays numerically exact for kilometre-scale quadratic phases because
the phase functions are re-evaluated analytically on a v grid sized by a
Nyquist criterion, rather than read off the (aliased) sampled JSA.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .biphoton import JointSpectralAmplitude
from .errors import (
    DomainError,
    FitError,
    FitRejectedError,
    ResolutionError,
    ResourceError,
    ValidationError,
)
from .seeding import as_rng

SQRT_8LN2 = np.sqrt(8.0 * np.log(2.0))  # FWHM = SQRT_8LN2 * sigma


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    timing_jitter_sigma_s: float = 15e-12
    dark_rate_hz: float = 0.0

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.efficiency <= 1.0:
            problems.append("efficiency must be in [0, 1]")
        if self.timing_jitter_sigma_s < 0:
            problems.append("timing jitter must be >= 0")
        if self.dark_rate_hz < 0:
            problems.append("dark rate must be >= 0")
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class ClockModel:
    initial_offset_s: float = 0.0
    fractional_frequency_offset: float = 0.0
    white_pm_sigma_s: float = 0.0

    def __post_init__(self):
        vals = (
            self.initial_offset_s,
            self.fractional_frequency_offset,
            self.white_pm_sigma_s,
        )
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("clock parameters must be finite")


@dataclass(frozen=True)
class TimestampStream:
    detector_id: str
    times_s: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=float)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValidationError(
                f"timestamps of {self.detector_id} must be strictly increasing"
            )


@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_width_s: float
    window_s: float
    bin_centers_s: np.ndarray
    counts: np.ndarray

    @property
    def total_coincidences(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class GaussianFitResult:
    center_s: float
    sigma_s: float
    amplitude: float
    center_stderr_s: float
    sigma_stderr_s: float
    background: float

    @property
    def fwhm_s(self) -> float:
        return SQRT_8LN2 * self.sigma_s


@dataclass(frozen=True)
class OffsetEstimate:
    offset_s: float
    uncertainty_s: float


# ---------------------------------------------------------------------------
# arrival-time-difference density


@dataclass(frozen=True)
class DifferenceTimeDensity:
    """Unit-integral density of the two-photon arrival-time difference."""

    times_s: np.ndarray
    pdf: np.ndarray

    def __post_init__(self):
        if len(self.times_s) != len(self.pdf):
            raise ValidationError("time grid and pdf must match in length")

    @property
    def dt(self) -> float:
        return float(self.times_s[1] - self.times_s[0])

    def mean(self) -> float:
        return float(np.sum(self.times_s * self.pdf) * self.dt)

    def std(self) -> float:
        m = self.mean()
        return float(np.sqrt(np.sum((self.times_s - m) ** 2 * self.pdf) * self.dt))

    def fwhm(self) -> float:
        p = self.pdf
        half = p.max() / 2.0
        above = p >= half
        idx = np.nonzero(above)[0]
        lo, hi = idx[0], idx[-1]
        if lo == 0 or hi == len(p) - 1:
            raise ResolutionError("density not contained in its time window")
        t = self.times_s

        def cross(i_out, i_in):
            frac = (half - p[i_out]) / (p[i_in] - p[i_out])
            return t[i_out] + frac * (t[i_in] - t[i_out])

        return float(cross(hi + 1, hi) - cross(lo - 1, lo))

    def mirrored(self) -> "DifferenceTimeDensity":
        """Density of the negated difference."""
        return DifferenceTimeDensity(-self.times_s[::-1].copy(), self.pdf[::-1].copy())

    def sample(self, rng, n: int) -> np.ndarray:
        cdf = np.cumsum(self.pdf) * self.dt
        cdf /= cdf[-1]
        u = as_rng(rng).random(n)
        return np.interp(u, cdf, self.times_s)


def _check_sampled_phase(jsa: JointSpectralAmplitude):
    """Nyquist guard for grids whose phase is baked into the samples."""
    ang = np.angle(jsa.amplitude)
    mask = np.abs(jsa.amplitude) > 1e-6 * np.abs(jsa.amplitude).max()
    for diff in (np.diff(ang, axis=0), np.diff(ang, axis=1)):
        m = mask[: diff.shape[0], : diff.shape[1]]
        wrapped = (diff + np.pi) % (2 * np.pi) - np.pi
        if np.any(np.abs(wrapped[m]) > 0.9 * np.pi):
            raise ResolutionError(
                "sampled phase varies by ~pi per grid step; grid too coarse "
                "for this dispersion (apply phases analytically instead)"
            )


def arrival_difference_density(
    jsa: JointSpectralAmplitude,
    detector_a: DetectorModel,
    detector_b: DetectorModel,
    instrument_jitter_s: float = 0.0,
    n_u_nodes: int = 65,
) -> DifferenceTimeDensity:
    """Density of (signal-photon arrival - idler-photon arrival), including
    detector and instrument timing jitter.

    The JSA must either carry its analytic phase record (the normal path
    for fiber scenarios) or be sampled finely enough for its phases; the
    Gaussian envelope parameters are taken from the JSA metadata when
    present, otherwise estimated from the sampled moments.
    """
    if not jsa.is_normalized():
        raise ValidationError("joint spectral amplitude not normalized")
    for d in (detector_a, detector_b):
        if d.timing_jitter_sigma_s < 0:
            raise DomainError("jitter must be >= 0")
    jitter = float(
        np.sqrt(
            detector_a.timing_jitter_sigma_s**2
            + detector_b.timing_jitter_sigma_s**2
            + instrument_jitter_s**2
        )
    )

    analytic_envelope = jsa.sum_sigma is not None and jsa.diff_sigma is not None
    if analytic_envelope:
        sigma_u, sigma_v = jsa.sum_sigma, jsa.diff_sigma
    else:
        dens_s = jsa.signal_marginal()
        var = np.trapezoid(jsa.omega_signal**2 * dens_s, jsa.omega_signal)
        sigma_u = sigma_v = np.sqrt(2.0 * var)  # moment-based fallback

    phases = jsa.total_phase()
    if phases is None:
        if not analytic_envelope:
            _check_sampled_phase(jsa)  # phases may be baked into the grid
        zero = lambda w: np.zeros_like(np.asarray(w, dtype=float))
        phi_s = phi_i = zero
    else:
        phi_s, phi_i = phases
    sampled = not analytic_envelope

    def psi(u, v):
        return phi_s((u + v) / 2.0) + phi_i((u - v) / 2.0)

    # probe the v-phase slope over the support to size the time window
    u_edge = 5.0 * sigma_u
    v_probe = np.linspace(-6.0 * sigma_v, 6.0 * sigma_v, 257)
    slopes = []
    for u0 in (-u_edge, 0.0, u_edge):
        ps = psi(u0, v_probe)
        slopes.append(np.gradient(ps, v_probe))
    slopes = np.concatenate(slopes)
    tau_lo, tau_hi = float(slopes.min()), float(slopes.max())

    sigma_rest = np.sqrt((1.0 / sigma_v) ** 2 + jitter**2)  # in t- units
    t_lo = 2.0 * tau_lo - 8.0 * sigma_rest
    t_hi = 2.0 * tau_hi + 8.0 * sigma_rest
    t_half = 0.5 * (t_hi - t_lo) + 1e-18
    t_mid = 0.5 * (t_hi + t_lo)

    # v sampling: Nyquist for tau = t-/2 offsets up to t_half/2
    dv = np.pi / (0.5 * t_half) * 0.5
    dt_target = sigma_rest / 8.0
    n_fft = int(2 ** np.ceil(np.log2(max(12.0 * sigma_v / dv, np.pi / (dv * (dt_target / 2.0))))))
    if n_fft > 2**22:
        raise ResolutionError(
            "requested dispersion/jitter combination needs an impractically "
            "fine transform grid"
        )
    v = (np.arange(n_fft) - n_fft // 2) * dv

    if sampled:
        # resample the sampled grid onto (u, v); when analytic phases are
        # recorded, interpolate the modulus and re-apply them exactly
        from scipy.interpolate import RegularGridInterpolator

        baked = jsa.amplitude if phases is None else np.abs(jsa.amplitude)
        interp = RegularGridInterpolator(
            (jsa.omega_signal, jsa.omega_idler),
            baked,
            bounds_error=False,
            fill_value=0.0,
        )

        def v_amplitude(u0):
            pts = np.column_stack(((u0 + v) / 2.0, (u0 - v) / 2.0))
            vals = interp(pts)
            if phases is not None:
                vals = vals * np.exp(1j * psi(u0, v))
            return vals

    else:
        g_v = np.exp(-(v**2) / (4.0 * sigma_v**2))

        def v_amplitude(u0):
            return g_v * np.exp(1j * psi(u0, v))

    u_nodes = np.linspace(-u_edge, u_edge, n_u_nodes)
    w_u = np.exp(-(u_nodes**2) / (2.0 * sigma_u**2))

    acc = np.zeros(n_fft)
    phase_shift = np.exp(-1j * v * (t_mid / 2.0))  # center the window
    for u0, w in zip(u_nodes, w_u):
        h = np.fft.fft(np.fft.ifftshift(v_amplitude(u0) * phase_shift))
        acc += w * np.abs(h) ** 2
    acc = np.fft.fftshift(acc)

    tau = np.fft.fftshift(np.fft.fftfreq(n_fft, d=dv / (2.0 * np.pi)))
    times = 2.0 * tau + t_mid

    keep = (times >= t_lo) & (times <= t_hi)
    times = times[keep]
    pdf = acc[keep]

    if jitter > 0:
        dt = times[1] - times[0]
        half = (len(times) - 1) // 2
        kt = (np.arange(2 * half + 1) - half) * dt
        kernel = np.exp(-(kt**2) / (2.0 * jitter**2))
        pdf = np.convolve(pdf, kernel, mode="same")

    pdf = np.clip(pdf, 0.0, None)
    pdf /= np.sum(pdf) * (times[1] - times[0])
    return DifferenceTimeDensity(times_s=times, pdf=pdf)


# ---------------------------------------------------------------------------
# timestamp simulation


def simulate_timestamps(
    pair_rate_hz: float,
    density: DifferenceTimeDensity,
    clock_a: ClockModel,
    clock_b: ClockModel,
    detector_a: DetectorModel,
    detector_b: DetectorModel,
    duration_s: float,
    seed,
    max_events: float = 5e7,
) -> tuple[TimestampStream, TimestampStream]:
    """Detected photon timestamp streams at the two sites.

    Pair emissions are Poissonian at the detected-pair rate; the per-pair
    arrival split is drawn from ``density`` (which already includes all
    timing jitter, so none is re-applied here). Detector efficiency thins
    each side independently; dark counts arrive uniformly. Each stream is
    then expressed in its own clock's timescale.
    """
    if duration_s <= 0:
        raise DomainError("duration must be > 0")
    expected = pair_rate_hz * duration_s
    if expected > max_events:
        raise ResourceError(
            f"would draw ~{expected:.2e} pairs (> cap {max_events:.2e}); "
            "run in shorter chunks"
        )
    rng = as_rng(seed)
    n = rng.poisson(expected)
    t_pair = np.sort(rng.random(n)) * duration_s
    d = density.sample(rng, n)
    raw_a = t_pair + d / 2.0
    raw_b = t_pair - d / 2.0
    keep_a = rng.random(n) < detector_a.efficiency
    keep_b = rng.random(n) < detector_b.efficiency

    def darks(det):
        nd = rng.poisson(det.dark_rate_hz * duration_s)
        return rng.random(nd) * duration_s

    def to_clock(times, clock):
        out = times * (1.0 + clock.fractional_frequency_offset) + clock.initial_offset_s
        if clock.white_pm_sigma_s > 0:
            out = out + rng.normal(0.0, clock.white_pm_sigma_s, times.shape)
        return np.sort(out)

    times_a = to_clock(np.concatenate([raw_a[keep_a], darks(detector_a)]), clock_a)
    times_b = to_clock(np.concatenate([raw_b[keep_b], darks(detector_b)]), clock_b)
    # strictly increasing: perturb exact ties by one femtosecond
    for arr in (times_a, times_b):
        dup = np.nonzero(np.diff(arr) <= 0)[0]
        while dup.size:
            arr[dup + 1] = arr[dup] + 1e-15
            dup = np.nonzero(np.diff(arr) <= 0)[0]
    return (
        TimestampStream("a", times_a),
        TimestampStream("b", times_b),
    )


def coincidence_histogram(
    a: TimestampStream,
    b: TimestampStream,
    bin_width_s: float = 4e-12,
    window_s: float = 5e-9,
) -> CoincidenceHistogram:
    """Histogram of t_a - t_b over +/-window, bins centered on multiples of
    the bin width. Linear-time two-pointer sweep over the sorted streams."""
    if bin_width_s <= 0:
        raise DomainError("bin width must be > 0")
    if window_s < bin_width_s:
        raise DomainError("window must be at least one bin wide")
    ta = np.asarray(a.times_s, dtype=float)
    tb = np.asarray(b.times_s, dtype=float)
    k = int(np.floor(window_s / bin_width_s))
    centers = np.arange(-k, k + 1) * bin_width_s
    edges = np.concatenate([centers - bin_width_s / 2, [centers[-1] + bin_width_s / 2]])
    lo = np.searchsorted(tb, ta + edges[0])
    hi = np.searchsorted(tb, ta + edges[-1])
    counts_per = hi - lo
    if counts_per.sum() == 0:
        return CoincidenceHistogram(
            bin_width_s, window_s, centers, np.zeros(centers.size, dtype=int)
        )
    a_rep = np.repeat(ta, counts_per)
    offsets = np.concatenate([np.arange(l, h) for l, h in zip(lo, hi) if h > l])
    diffs = a_rep - tb[offsets]
    counts, _ = np.histogram(diffs, bins=edges)
    return CoincidenceHistogram(bin_width_s, window_s, centers, counts)


def fit_gaussian(hist: CoincidenceHistogram) -> GaussianFitResult:
    """Least-squares Gaussian-plus-background fit of the coincidence peak."""
    t = hist.bin_centers_s
    y = hist.counts.astype(float)
    bg0 = float(np.median(y))
    imax = int(np.argmax(y))
    peak = float(y[imax])
    if (peak + 1.0) / (bg0 + 1.0) <= 3.0:
        raise FitRejectedError(
            f"peak-to-background ratio {(peak + 1) / (bg0 + 1):.2f} <= 3"
        )
    if imax < 2 or imax > len(y) - 3:
        raise FitRejectedError("peak not captured: maximum at the window edge")

    half_level = bg0 + (peak - bg0) / 2.0
    above = y > half_level
    lo = imax
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = imax
    while hi < len(y) - 1 and above[hi + 1]:
        hi += 1
    c0 = float(t[imax])
    # robust width: half-max span cross-checked by excess second moment
    sigma_span = (hi - lo + 1) * hist.bin_width_s / SQRT_8LN2
    excess = np.clip(y - bg0, 0.0, None)
    if excess.sum() > 0:
        mu = np.sum(t * excess) / excess.sum()
        sigma_mom = np.sqrt(np.sum((t - mu) ** 2 * excess) / excess.sum())
    else:
        sigma_mom = sigma_span
    sigma0 = max(sigma_span, min(sigma_mom, 50 * sigma_span), hist.bin_width_s)

    span = max(8.0 * sigma0, 15 * hist.bin_width_s)
    sel = np.abs(t - c0) <= span
    if sel.sum() < 6:
        sel = slice(None)

    def model(x, amp, center, sigma, background):
        return amp * np.exp(-((x - center) ** 2) / (2.0 * sigma**2)) + background

    try:
        popt, pcov = curve_fit(
            model,
            t[sel],
            y[sel],
            p0=[peak - bg0, c0, sigma0, bg0],
            sigma=np.sqrt(np.clip(y[sel], 1.0, None)),
            absolute_sigma=True,
            maxfev=20000,
        )
    except RuntimeError as exc:
        resid = float(np.linalg.norm(y[sel] - model(t[sel], peak - bg0, c0, sigma0, bg0)))
        raise FitError(f"gaussian fit did not converge: {exc}", resid) from exc
    perr = np.sqrt(np.diag(pcov))
    if not np.all(np.isfinite(perr)):
        raise FitError("gaussian fit covariance singular", None)
    amp, center, sigma, background = popt
    if abs(center - t[0]) < 2 * hist.bin_width_s or abs(center - t[-1]) < 2 * hist.bin_width_s:
        raise FitRejectedError("peak not captured: fitted center at window edge")
    return GaussianFitResult(
        center_s=float(center),
        sigma_s=float(abs(sigma)),
        amplitude=float(amp),
        center_stderr_s=float(perr[1]),
        sigma_stderr_s=float(perr[2]),
        background=float(background),
    )


def estimate_offset(
    fit: GaussianFitResult,
    calibration_center_s: float,
    calibration_uncertainty_s: float = 0.0,
) -> OffsetEstimate:
    """Clock offset relative to a calibration run's fitted center."""
    return OffsetEstimate(
        offset_s=fit.center_s - calibration_center_s,
        uncertainty_s=float(
            np.hypot(fit.center_stderr_s, calibration_uncertainty_s)
        ),
    )


def instrument_jitter_for_reference_width(
    source,
    detector_a: DetectorModel,
    detector_b: DetectorModel,
    reference_fwhm_s: float,
) -> float:
    """Instrument jitter that makes the fiber-free difference density as
    wide as a measured reference (quadrature budget minus the intrinsic
    biphoton width and the detector jitters)."""
    total_sigma = reference_fwhm_s / SQRT_8LN2
    intrinsic = 1.0 / source.difference_bandwidth_rad_s
    rest = (
        total_sigma**2
        - intrinsic**2
        - detector_a.timing_jitter_sigma_s**2
        - detector_b.timing_jitter_sigma_s**2
    )
    if rest < 0:
        raise DomainError(
            "reference width narrower than the intrinsic plus detector budget"
        )
    return float(np.sqrt(rest))
