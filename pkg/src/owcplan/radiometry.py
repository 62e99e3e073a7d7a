"""Scalar radiometric and electrical-domain formulas.

All noise and signal quantities are electrical powers in A^2 (squared
photocurrents).  Optical powers are in W, responsivities in A/W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

ELECTRON_CHARGE = 1.602176634e-19  # C, exact (2019 SI)


def lambertian_order(semi_angle_half_power_deg: float) -> float:
    """Lambertian mode number n such that cos(phi_half)^n = 1/2.

    `semi_angle_half_power_deg` is the half-power semi-angle in degrees,
    strictly between 0 and 90.  Evaluated in extended precision and rounded
    once, so special angles stay clean: a 60 deg semi-angle gives exactly
    n = 1.
    """
    phi = semi_angle_half_power_deg
    if not 0.0 < phi < 90.0:
        raise ValueError(f"semi-angle must be in (0, 90) degrees, got {phi}")
    with mpmath.workdps(40):
        c = mpmath.cospi(mpmath.mpf(phi) / 180)
        return float(-mpmath.ln(2) / mpmath.ln(c))


def electrical_power(responsivity: float, optical_power_w: float) -> float:
    """Electrical signal power (R * PO)^2 in A^2 at the photodetector."""
    if responsivity <= 0.0:
        raise ValueError("responsivity must be positive")
    if optical_power_w < 0.0:
        raise ValueError("optical power must be non-negative")
    current = responsivity * optical_power_w
    return current * current


@dataclass(frozen=True)
class NoiseParams:
    """Receiver-side noise parameterization.

    n_r_a2_per_hz   -- receiver noise density in A^2/Hz
    bandwidth_hz    -- electrical bandwidth B_E in Hz
    optical_factor  -- dimensionless optical-filter pass-through applied to
                       the background shot-noise term (default 1.0)
    """

    n_r_a2_per_hz: float
    bandwidth_hz: float
    optical_factor: float = 1.0
    electron_charge: float = field(default=ELECTRON_CHARGE, init=False)

    def __post_init__(self):
        if self.n_r_a2_per_hz <= 0.0 or self.bandwidth_hz <= 0.0:
            raise ValueError("noise density and bandwidth must be positive")
        if self.optical_factor <= 0.0:
            raise ValueError("optical pass-through factor must be positive")

    def with_bandwidth(self, bandwidth_hz: float) -> "NoiseParams":
        return NoiseParams(self.n_r_a2_per_hz, bandwidth_hz, self.optical_factor)

    @staticmethod
    def from_current_density(density_a_per_rthz: float, bandwidth_hz: float,
                             optical_factor: float = 1.0) -> "NoiseParams":
        """Build from a noise current spectral density in A/sqrt(Hz)."""
        return NoiseParams(density_a_per_rthz ** 2, bandwidth_hz, optical_factor)


def receiver_noise(params: NoiseParams) -> float:
    """Receiver noise power N_R * B_E in A^2."""
    return params.n_r_a2_per_hz * params.bandwidth_hz


def shot_noise(responsivity: float, optical_power_w: float,
               params: NoiseParams) -> float:
    """Background shot noise 2 e (R PO) B_o B_e in A^2.

    `optical_power_w` is the received optical power from an unmodulated
    transmitter; B_o is the dimensionless pass-through factor.
    """
    if optical_power_w < 0.0:
        raise ValueError("optical power must be non-negative")
    return (2.0 * params.electron_charge * responsivity * optical_power_w
            * params.optical_factor * params.bandwidth_hz)


class ResponsivityTable:
    """Wavelength name -> photodetector responsivity in A/W."""

    def __init__(self, values: dict[str, float]):
        for name, r in values.items():
            if not 0.0 < r <= 1.0:
                raise ValueError(f"responsivity for {name!r} outside (0, 1]: {r}")
        self._values = dict(values)

    def __getitem__(self, wavelength: str) -> float:
        return self._values[wavelength]

    def __contains__(self, wavelength: str) -> bool:
        return wavelength in self._values

    def items(self):
        return self._values.items()


#: Detector responsivities for the RYGB laser-diode wavelengths, A/W.
DEFAULT_RESPONSIVITIES = ResponsivityTable(
    {"red": 0.4, "yellow": 0.35, "green": 0.3, "blue": 0.2})
