"""Horizontal Fabry-Perot model of the side-leakage channel.

The etched wall reflects the in-plane field back across the pillar; the
pillar diameter then acts as a resonator length. Only the spectral placement
of leaky maxima (half-wavelength diameters) and their contrast are modelled,
both relative to the bulk rate.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "SideResonator",
    "SideModelRangeWarning",
    "fresnel_R",
    "circulating_enhancement",
    "side_resonance_wavelengths",
    "full_wave_minima",
    "round_trip_phase",
    "gamma_side_model",
    "airy_contrast",
    "in_validity_range",
    "write_gamma_side_csv",
]

VALID_M = (5.0, 10.0)


class SideModelRangeWarning(UserWarning):
    """Diameter outside the range where the 1-D side model is predictive."""


@dataclass(frozen=True)
class SideResonator:
    d_cavity: float  # um
    n_cavity: float
    n_background: float = 1.0

    def __post_init__(self) -> None:
        if not self.d_cavity > 0:
            raise ValueError("d_cavity must be > 0")
        if not self.n_background >= 1.0:
            raise ValueError("background index must be >= 1")
        if not self.n_cavity >= self.n_background:
            raise ValueError("cavity index must not be below the background index")

    @property
    def reflectance(self) -> float:
        return fresnel_R(self.n_cavity, self.n_background)


def fresnel_R(n_cavity: float, n_background: float) -> float:
    """Normal-incidence intensity reflectance of the pillar wall."""
    if n_cavity < 1 or n_background < 1:
        raise ValueError("refractive indices must be >= 1")
    return ((n_cavity - n_background) / (n_cavity + n_background)) ** 2


def circulating_enhancement(R: float) -> float:
    """|E_circ|^2 / |E_H|^2 = 1 / (1 - R)^2, with R the wall reflectance."""
    if not 0.0 <= R < 1.0:
        raise ValueError("reflectance must lie in [0, 1)")
    return 1.0 / (1.0 - R) ** 2


def _ks(k_range: Iterable[int]) -> list[int]:
    ks = sorted({int(k) for k in k_range})
    if ks and ks[0] < 0:
        raise ValueError("k must be >= 0")
    return ks


def side_resonance_wavelengths(res: SideResonator, k_range: Iterable[int]) -> list[float]:
    """Leaky maxima: n d / (k + 1/2); the background index does not enter."""
    return [res.n_cavity * res.d_cavity / (k + 0.5) for k in _ks(k_range)]


def full_wave_minima(res: SideResonator, k_range: Iterable[int]) -> list[float]:
    """Suppression minima at n d / k (k >= 1)."""
    return [res.n_cavity * res.d_cavity / k for k in _ks(k_range) if k >= 1]


def round_trip_phase(res: SideResonator, lam):
    """Phase of the symmetric in-plane mode: 2 pi n d / lam + pi.

    An on-axis emitter only feeds modes that are even about the pillar
    axis, so one free spectral range corresponds to one extra wavelength
    across the diameter; the pi offset puts the maxima at half-wave
    diameters.
    """
    return 2.0 * np.pi * res.n_cavity * res.d_cavity / np.asarray(lam, dtype=float) + np.pi


def in_validity_range(res: SideResonator, lam: float) -> bool:
    m = res.n_cavity * res.d_cavity / lam
    # 0.1% slack so diameters quoted to four digits still count as on the edge
    return VALID_M[0] * (1 - 1e-3) <= m <= VALID_M[1] * (1 + 1e-3)


def gamma_side_model(res: SideResonator, lambda_grid) -> np.ndarray:
    """Gamma_side / Gamma_0 from an Airy function of the wall reflection.

    A(phi) = (1 - R) / ((1 - r)^2 + 4 r sin^2(phi / 2)) with r = sqrt(R) the
    field reflectivity; the prefactor makes the average over one period
    exactly one, so an index-matched wall gives the bulk rate everywhere.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    if lam.size and not in_validity_range(res, float(np.median(lam))):
        warnings.warn(
            f"d = {res.d_cavity:.4g} um is outside {VALID_M[0]:g}-{VALID_M[1]:g} lambda/n; "
            "side model is qualitative here",
            SideModelRangeWarning,
            stacklevel=2,
        )
    R = res.reflectance
    r = math.sqrt(R)
    phi = round_trip_phase(res, lam)
    return (1.0 - R) / ((1.0 - r) ** 2 + 4.0 * r * np.sin(phi / 2.0) ** 2)


def airy_contrast(R: float) -> float:
    """Max/min ratio of the side model: ((1 + sqrt R) / (1 - sqrt R))^2."""
    r = math.sqrt(R)
    return ((1.0 + r) / (1.0 - r)) ** 2


def write_gamma_side_csv(lambda_grid, gamma, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda_um", "gamma_side_over_gamma0"])
        for lam, g in zip(lambda_grid, gamma):
            w.writerow([repr(float(lam)), repr(float(g))])
