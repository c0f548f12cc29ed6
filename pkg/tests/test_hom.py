"""Coincidence-dip computation, metrics, and count sampling."""

import numpy as np
import pytest

from homsync import biphoton as bp
from homsync import fiber_model as fm
from homsync import hom
from homsync.errors import DomainError, ValidationError

MODEL = fm.load_dispersion_model()
DELAYS = np.linspace(-10e-12, 10e-12, 201)


def make_jsa(grid=256, degenerate=False):
    kw = {}
    if degenerate:
        kw = dict(wavelength_signal_nm=1574.0, wavelength_idler_nm=1574.0)
    return bp.gaussian_jsa(bp.PhotonPairSource(**kw), grid_size=grid)


def link(lengths_m):
    return fm.FiberLink(tuple(fm.FiberSegment(l) for l in lengths_m), MODEL)


def test_perfect_dip_at_zero_delay():
    prof = hom.hom_profile(make_jsa(degenerate=True), [0.0], distinguishability=1.0)
    assert prof.probability[0] == pytest.approx(0.0, abs=1e-9)


def test_no_interference_when_distinguishable():
    prof = hom.hom_profile(make_jsa(), DELAYS, distinguishability=0.0)
    assert np.allclose(prof.probability, 0.5)


def test_profile_requires_normalized_jsa():
    jsa = make_jsa(grid=128)
    broken = bp.JointSpectralAmplitude(
        jsa.omega_signal, jsa.omega_idler, jsa.amplitude * 2.0
    )
    with pytest.raises(ValidationError, match="normalized"):
        hom.hom_profile(broken, DELAYS)


def test_dip_width_matches_calibration_target():
    prof = hom.hom_profile(make_jsa(grid=512), DELAYS, distinguishability=0.6)
    m = hom.dip_metrics(prof)
    assert m.width_fwhm_s == pytest.approx(3.25e-12, rel=0.02)
    assert m.visibility == pytest.approx(0.6, abs=0.02)
    assert abs(m.minimum_delay_s) < 2e-13


def test_grid_halving_changes_metrics_below_half_percent():
    coarse = hom.dip_metrics(hom.hom_profile(make_jsa(grid=256), DELAYS, 0.6))
    fine = hom.dip_metrics(hom.hom_profile(make_jsa(grid=512), DELAYS, 0.6))
    assert coarse.width_fwhm_s == pytest.approx(fine.width_fwhm_s, rel=5e-3)
    assert coarse.visibility == pytest.approx(fine.visibility, abs=5e-3)


def test_matched_dispersion_leaves_profile_unchanged():
    jsa = make_jsa(grid=256)
    base = hom.hom_profile(jsa, DELAYS).probability
    for arms in ([10e3], [5e3, 4e3, 1e3]):
        phi = bp.fiber_phase(link(arms), 1574.4, 22.0)
        # identical quadratic phase on both photons
        common = bp.QuadraticPhase(phi.linear_s, phi.half_quadratic_s2)
        disp = hom.hom_profile(bp.apply_dispersion(jsa, common, common), DELAYS)
        assert np.max(np.abs(disp.probability - base)) < 1e-6


def test_realistic_unequal_arm_phases_keep_width():
    # full 20-km arms with per-photon group delays; the delay line zeroes
    # the inter-arm imbalance (set here by equating the linear terms)
    jsa = make_jsa(grid=512)
    arms = link([5e3, 4e3, 1e3] * 2)
    phi_s, phi_i = bp.arm_phases(arms, arms, bp.PhotonPairSource(), 22.0)
    phi_s = bp.QuadraticPhase(phi_i.linear_s, phi_s.half_quadratic_s2)
    disp = hom.hom_profile(bp.apply_dispersion(jsa, phi_s, phi_i), DELAYS, 0.6)
    m = hom.dip_metrics(disp)
    assert m.width_fwhm_s == pytest.approx(3.25e-12, rel=0.02)
    assert m.visibility == pytest.approx(0.6, abs=0.03)


def test_arm_phases_cancel_exactly_for_equal_arms():
    arms = link([5e3, 4e3, 1e3])
    phi_s, phi_i = bp.arm_phases(arms, arms, bp.PhotonPairSource(), 22.0)
    assert phi_s.half_quadratic_s2 == phi_i.half_quadratic_s2
    # the linear difference is the physical group-delay imbalance
    assert (phi_i.linear_s - phi_s.linear_s) == pytest.approx(52.7e-12, rel=0.02)


def test_group_delay_imbalance_shifts_minimum():
    jsa = make_jsa(grid=256)
    shift = 2e-12
    disp = bp.apply_dispersion(
        jsa, bp.QuadraticPhase(shift, 0.0), bp.QuadraticPhase(0.0, 0.0)
    )
    m = hom.dip_metrics(hom.hom_profile(disp, DELAYS))
    grid_step = DELAYS[1] - DELAYS[0]
    assert abs(abs(m.minimum_delay_s) - shift) < grid_step


def test_visibility_linear_in_distinguishability():
    jsa = make_jsa(grid=256)
    vis = []
    for d in (0.25, 0.5, 1.0):
        vis.append(hom.dip_metrics(hom.hom_profile(jsa, DELAYS, d)).visibility)
    assert vis[2] / vis[1] == pytest.approx(2.0, rel=1e-6)
    assert vis[1] / vis[0] == pytest.approx(2.0, rel=1e-6)


def test_profile_symmetric_about_minimum():
    prof = hom.hom_profile(make_jsa(grid=256), DELAYS)
    p = prof.probability
    assert np.max(np.abs(p - p[::-1])) < 1e-8


def test_synthetic_gaussian_dip_metrics_recovered():
    width = 3.0e-12
    sigma = width / (2 * np.sqrt(2 * np.log(2)))
    delays = np.linspace(-10e-12, 10e-12, 401)
    prob = 0.5 * (1 - 0.7 * np.exp(-((delays - 0.4e-12) ** 2) / (2 * sigma**2)))
    m = hom.dip_metrics(hom.HomProfile(delays, prob))
    assert m.visibility == pytest.approx(0.7, rel=0.01)
    assert m.width_fwhm_s == pytest.approx(width, rel=0.01)
    assert m.minimum_delay_s == pytest.approx(0.4e-12, abs=2e-14)


def test_flat_profile_raises():
    prof = hom.HomProfile(DELAYS, np.full_like(DELAYS, 0.5))
    with pytest.raises(DomainError, match="dip not captured"):
        hom.dip_metrics(prof)


def test_minimum_on_boundary_raises():
    prob = np.linspace(0.1, 0.5, len(DELAYS))
    with pytest.raises(DomainError, match="boundary"):
        hom.dip_metrics(hom.HomProfile(DELAYS, prob))


def test_sample_counts_poisson_mean():
    prof = hom.HomProfile(np.array([0.0]), np.array([0.5]))
    rng = np.random.default_rng(42)
    draws = np.array(
        [hom.sample_dip_counts(prof, 1000.0, 1.0, rng)[0] for _ in range(10_000)]
    )
    mean = draws.mean()
    assert abs(mean - 1000.0) < 3 * np.sqrt(1000.0 / 10_000) * 10
    # a far looser but independent bound: sample mean within 3 sigma of Poisson
    assert abs(mean - 1000.0) < 3 * np.sqrt(1000.0) / np.sqrt(10_000)


def test_sample_counts_zero_dwell():
    prof = hom.HomProfile(DELAYS, np.full_like(DELAYS, 0.4))
    counts = hom.sample_dip_counts(prof, 1000.0, 0.0, 1)
    assert np.all(counts == 0)


def test_sample_counts_deterministic_per_seed():
    prof = hom.HomProfile(DELAYS, np.full_like(DELAYS, 0.4))
    a = hom.sample_dip_counts(prof, 500.0, 2.0, 123)
    b = hom.sample_dip_counts(prof, 500.0, 2.0, 123)
    assert np.array_equal(a, b)
