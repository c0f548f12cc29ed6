"""Thermo-optic chromatic dispersion model of single-mode fiber.

The refractive index is a temperature-dependent Sellmeier expression
(coefficient sets live in ``data/dispersion_models.yaml``). Wavelength
derivatives are closed-form; temperature derivatives use Richardson-
extrapolated central differences with a 0.01 degC step. Propagation
quantities derive from the index in the usual way:

    k'  = n_g / c                 (group delay per metre)
    k'' = lam^3 / (2 pi c^2) n''  (group-velocity dispersion)

Drift of the inter-arm delay under a common temperature excursion dT is
modelled per segment as root-sum-square:

    single fiber   drift = B * l * dT
    m segments     drift = B * sqrt(sum l_k^2) * dT

where B collects the temperature sensitivities of the four per-arm
delay terms (both arms' k' and k''*omega0) in quadrature.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import yaml
from scipy.constants import c

from .errors import DomainError, ValidationError

_FD_STEP_T = 0.01  # degC, temperature finite-difference step


@dataclass(frozen=True)
class SellmeierTerm:
    amplitude: float
    resonance_um: float
    d_amplitude_dt: float = 0.0
    d_resonance_sq_dt: float = 0.0  # um^2 per degC


@dataclass(frozen=True)
class DispersionModel:
    name: str
    terms: tuple[SellmeierTerm, ...]
    reference_temperature_c: float = 22.0
    wavelength_range_nm: tuple[float, float] = (1200.0, 1700.0)
    temperature_range_c: tuple[float, float] = (0.0, 50.0)

    def __post_init__(self):
        if not self.terms:
            raise ValidationError("dispersion model needs at least one term")


@dataclass(frozen=True)
class FiberSegment:
    length_m: float
    attenuation_db_per_km: float = 0.2
    excess_loss_db: float = 0.0
    temperature_offset_c: float = 0.0

    def __post_init__(self):
        problems = []
        if not self.length_m > 0:
            problems.append(f"segment length must be > 0, got {self.length_m}")
        if self.attenuation_db_per_km < 0:
            problems.append("attenuation must be >= 0")
        if self.excess_loss_db < 0:
            problems.append("excess loss must be >= 0")
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class FiberLink:
    segments: tuple[FiberSegment, ...]
    dispersion: DispersionModel

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("fiber link needs at least one segment")

    @property
    def total_length_m(self) -> float:
        return float(sum(s.length_m for s in self.segments))

    @property
    def segment_lengths_m(self) -> np.ndarray:
        return np.array([s.length_m for s in self.segments])


def _builtin_model_table():
    text = (
        importlib.resources.files("homsync.data")
        .joinpath("dispersion_models.yaml")
        .read_text()
    )
    return yaml.safe_load(text)["models"]


def _model_from_mapping(raw: dict) -> DispersionModel:
    try:
        terms = raw["terms"]
        thermo = raw.get("thermo_optic_terms") or [[0.0, 0.0]] * len(terms)
        if len(thermo) != len(terms):
            raise ValidationError(
                "thermo_optic_terms must match terms in length "
                f"({len(thermo)} vs {len(terms)})"
            )
        built = tuple(
            SellmeierTerm(float(a), float(r), float(da), float(dr))
            for (a, r), (da, dr) in zip(terms, thermo)
        )
        return DispersionModel(
            name=str(raw["name"]),
            terms=built,
            reference_temperature_c=float(raw.get("reference_temperature_c", 22.0)),
            wavelength_range_nm=tuple(raw.get("wavelength_range_nm", (1200.0, 1700.0))),
            temperature_range_c=tuple(raw.get("temperature_range_c", (0.0, 50.0))),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed dispersion model entry: {exc!r}") from exc


def available_models() -> list[str]:
    return [m["name"] for m in _builtin_model_table()]


def load_dispersion_model(name: str = "g652_smf_v1") -> DispersionModel:
    """Load a named coefficient set, or any set from a YAML file path."""
    for raw in _builtin_model_table():
        if raw["name"] == name:
            return _model_from_mapping(raw)
    try:
        with open(name) as fh:
            data = yaml.safe_load(fh)
    except OSError:
        raise ValidationError(
            f"unknown dispersion model {name!r}; built-in: {available_models()}"
        ) from None
    models = data["models"] if isinstance(data, dict) and "models" in data else [data]
    return _model_from_mapping(models[0])


# ---------------------------------------------------------------------------
# index and closed-form wavelength derivatives


def _check_domain(model: DispersionModel, wavelength_nm, temperature_c):
    lo, hi = model.wavelength_range_nm
    w = np.asarray(wavelength_nm, dtype=float)
    if np.any(w < lo) or np.any(w > hi):
        raise DomainError(
            f"wavelength_nm={wavelength_nm} outside model range [{lo}, {hi}] nm"
        )
    tlo, thi = model.temperature_range_c
    t = np.asarray(temperature_c, dtype=float)
    if np.any(t < tlo) or np.any(t > thi):
        raise DomainError(
            f"temperature_c={temperature_c} outside model range [{tlo}, {thi}] C"
        )


def _sellmeier(model: DispersionModel, lam_um, temperature_c):
    """Return (S, dS/dlam, d2S/dlam2) with S = n^2, lam in um."""
    lam = np.asarray(lam_um, dtype=float)
    dT = np.asarray(temperature_c, dtype=float) - model.reference_temperature_c
    lam2 = lam * lam
    S = np.ones_like(lam2 + dT)
    S1 = np.zeros_like(S)
    S2 = np.zeros_like(S)
    for term in model.terms:
        a = term.amplitude + term.d_amplitude_dt * dT
        C = term.resonance_um**2 + term.d_resonance_sq_dt * dT
        den = lam2 - C
        S = S + a * lam2 / den
        S1 = S1 + (-2.0 * a * lam * C) / den**2
        S2 = S2 + (2.0 * a * C * (3.0 * lam2 + C)) / den**3
    return S, S1, S2


def _n_derivs(model: DispersionModel, wavelength_nm, temperature_c):
    """n and its first/second wavelength derivatives (per um, per um^2)."""
    lam_um = np.asarray(wavelength_nm, dtype=float) * 1e-3
    S, S1, S2 = _sellmeier(model, lam_um, temperature_c)
    if np.any(S <= 0):
        raise DomainError("Sellmeier expression non-positive inside domain")
    n = np.sqrt(S)
    n1 = S1 / (2.0 * n)
    n2 = S2 / (2.0 * n) - n1 * n1 / n
    return n, n1, n2


def refractive_index(model: DispersionModel, wavelength_nm, temperature_c):
    """Phase index n(lam, T)."""
    _check_domain(model, wavelength_nm, temperature_c)
    n, _, _ = _n_derivs(model, wavelength_nm, temperature_c)
    return n if np.ndim(n) else float(n)


def group_index(model: DispersionModel, wavelength_nm, temperature_c):
    """n_g = n - lam dn/dlam."""
    _check_domain(model, wavelength_nm, temperature_c)
    n, n1, _ = _n_derivs(model, wavelength_nm, temperature_c)
    lam_um = np.asarray(wavelength_nm, dtype=float) * 1e-3
    ng = n - lam_um * n1
    return ng if np.ndim(ng) else float(ng)


def group_delay_coefficient(model: DispersionModel, wavelength_nm, temperature_c):
    """k' = dk/domega = n_g / c, in s/m."""
    ng = group_index(model, wavelength_nm, temperature_c)
    return ng / c


def gvd_coefficient(model: DispersionModel, wavelength_nm, temperature_c):
    """k'' = d2k/domega2 = lam^3 / (2 pi c^2) d2n/dlam2, in s^2/m."""
    _check_domain(model, wavelength_nm, temperature_c)
    _, _, n2 = _n_derivs(model, wavelength_nm, temperature_c)
    lam_m = np.asarray(wavelength_nm, dtype=float) * 1e-9
    kpp = lam_m**3 / (2.0 * np.pi * c**2) * (n2 * 1e12)  # n2: per um^2 -> per m^2
    return kpp if np.ndim(kpp) else float(kpp)


def dispersion_parameter(model: DispersionModel, wavelength_nm, temperature_c):
    """Conventional D = -2 pi c k'' / lam^2, in s/m^2 (1e6 x ps/(nm km))."""
    kpp = gvd_coefficient(model, wavelength_nm, temperature_c)
    lam_m = np.asarray(wavelength_nm, dtype=float) * 1e-9
    D = -2.0 * np.pi * c * kpp / lam_m**2
    return D if np.ndim(D) else float(D)


def zero_dispersion_wavelength_nm(model: DispersionModel, temperature_c=22.0):
    """Locate the k'' sign change inside the validity window."""
    from scipy.optimize import brentq

    lo, hi = model.wavelength_range_nm
    grid = np.linspace(lo, hi, 101)
    vals = gvd_coefficient(model, grid, temperature_c)
    sign = np.sign(vals)
    idx = np.nonzero(np.diff(sign) != 0)[0]
    if idx.size == 0:
        raise DomainError("no zero-dispersion wavelength inside model range")
    a, b = grid[idx[0]], grid[idx[0] + 1]
    return float(
        brentq(lambda w: gvd_coefficient(model, w, temperature_c), a, b, xtol=1e-6)
    )


# ---------------------------------------------------------------------------
# temperature sensitivity and drift


def _dT_richardson(f, temperature_c, h=_FD_STEP_T):
    """d f / dT by central differences at steps h and h/2, extrapolated."""
    d1 = (f(temperature_c + h) - f(temperature_c - h)) / (2.0 * h)
    d2 = (f(temperature_c + h / 2) - f(temperature_c - h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


def temperature_sensitivity_b(model: DispersionModel, source, temperature_c=22.0):
    """Sensitivity factor B in s/(m*degC).

    Quadrature sum of the temperature derivatives of the four per-metre
    delay terms: k' at each arm wavelength and k''*omega0 at each arm
    wavelength. ``source`` only needs wavelength_signal_nm /
    wavelength_idler_nm attributes.
    """
    lam_s = source.wavelength_signal_nm
    lam_i = source.wavelength_idler_nm
    _check_domain(model, [lam_s, lam_i], temperature_c)
    w_s = 2.0 * np.pi * c / (lam_s * 1e-9)
    w_i = 2.0 * np.pi * c / (lam_i * 1e-9)
    parts = [
        _dT_richardson(lambda T: group_delay_coefficient(model, lam_i, T), temperature_c),
        _dT_richardson(lambda T: group_delay_coefficient(model, lam_s, T), temperature_c),
        _dT_richardson(lambda T: gvd_coefficient(model, lam_i, T) * w_i, temperature_c),
        _dT_richardson(lambda T: gvd_coefficient(model, lam_s, T) * w_s, temperature_c),
    ]
    return float(np.sqrt(sum(p * p for p in parts)))


def drift_single(b: float, length_m: float, delta_t_c: float) -> float:
    """Delay drift B*l*dT of one unsegmented fiber, in seconds."""
    if not length_m > 0:
        raise DomainError(f"length must be > 0, got {length_m}")
    return b * length_m * delta_t_c


def drift_segmented(b: float, lengths_m: Sequence[float], delta_t_c: float) -> float:
    """Delay drift B*sqrt(sum l_k^2)*dT of a segmented fiber, in seconds."""
    lengths = np.asarray(lengths_m, dtype=float)
    if lengths.size == 0:
        raise DomainError("segment list must not be empty")
    if np.any(lengths <= 0):
        raise DomainError("all segment lengths must be > 0")
    return b * float(np.sqrt(np.sum(lengths**2))) * delta_t_c


def link_loss(link: FiberLink) -> float:
    """Total attenuation plus excess losses, in dB."""
    total = 0.0
    for seg in link.segments:
        total += seg.attenuation_db_per_km * seg.length_m / 1e3 + seg.excess_loss_db
    return total


@dataclass(frozen=True)
class PathDelayDifference:
    """Inter-arm delay difference, split into the two delay-expansion terms.

    ``group_delay_s`` is the plain group-delay imbalance (k'_i - k'_s)*l;
    this is the quantity a coincidence-peak measurement shifts by.
    ``center_frequency_gvd_s`` is the (k''_i w0i - k''_s w0s)*l term of the
    same expansion; ``total_s`` subtracts it from the group-delay term.
    """

    group_delay_s: float
    center_frequency_gvd_s: float

    @property
    def total_s(self) -> float:
        return self.group_delay_s - self.center_frequency_gvd_s


def _arm_terms(link: FiberLink, wavelength_nm: float, ambient_c: float):
    """(sum k' l, sum k'' w0 l) over the segments of one arm."""
    model = link.dispersion
    temps = np.array([ambient_c + s.temperature_offset_c for s in link.segments])
    lens = link.segment_lengths_m
    kp = group_delay_coefficient(model, wavelength_nm, temps)
    kpp = gvd_coefficient(model, wavelength_nm, temps)
    w0 = 2.0 * np.pi * c / (wavelength_nm * 1e-9)
    return float(np.sum(kp * lens)), float(np.sum(kpp * w0 * lens))


def path_delay_difference(
    link_signal: FiberLink,
    link_idler: FiberLink,
    source,
    temperature_c: float = 22.0,
) -> PathDelayDifference:
    """Residual delay difference between the idler and signal arms."""
    kp_s, kw_s = _arm_terms(link_signal, source.wavelength_signal_nm, temperature_c)
    kp_i, kw_i = _arm_terms(link_idler, source.wavelength_idler_nm, temperature_c)
    return PathDelayDifference(
        group_delay_s=kp_i - kp_s,
        center_frequency_gvd_s=kw_i - kw_s,
    )
