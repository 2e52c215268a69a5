"""Normal-incidence transfer-matrix engine for planar stacks.

Characteristic-matrix convention: a layer of index n and thickness d at
vacuum wavelength lam has phase delta = 2 pi n d / lam and matrix

    [[cos delta, i sin delta / n], [i n sin delta, cos delta]]

Stacks multiply top to bottom; amplitude coefficients are referred to the
electric field in the incidence medium.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np
from scipy.optimize import curve_fit, minimize_scalar

from .geometry import Layer, LayerStack, PillarDesign, build_stack, mirror_layers

__all__ = [
    "HC_EV_UM",
    "StackResponse",
    "StackSpectrum",
    "CavityMode",
    "NoResonance",
    "RatioMap",
    "layer_matrix",
    "stack_matrix",
    "stack_response",
    "reflectivity_spectrum",
    "mirror_transmission",
    "cavity_resonance",
    "stop_band",
    "transmissivity_ratio_map",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_ratio_map_csv",
]

# photon energy [eV] * wavelength [um]
HC_EV_UM = 1.2398419843320026

Direction = Literal["from_top", "from_bottom"]


def layer_matrix(layer: Layer, lam) -> np.ndarray:
    """2x2 characteristic matrix (shape ``(..., 2, 2)`` for array ``lam``)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    n = np.asarray(layer.material.index(lam), dtype=float)
    delta = 2.0 * np.pi * n * layer.thickness / lam
    c, s = np.cos(delta), np.sin(delta)
    m = np.empty(np.broadcast(lam, n).shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = 1j * s / n
    m[..., 1, 0] = 1j * n * s
    m[..., 1, 1] = c
    return m


def stack_matrix(stack: LayerStack, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    m = np.broadcast_to(np.eye(2, dtype=complex), lam.shape + (2, 2)).copy()
    for layer in stack.layers:
        m = m @ layer_matrix(layer, lam)
    return m


@dataclass(frozen=True)
class StackResponse:
    wavelength: float
    r: complex
    t: complex
    R: float
    T: float

    @property
    def phase_r(self) -> float:
        return float(np.angle(self.r))


@dataclass(frozen=True)
class StackSpectrum:
    """Pointwise responses over a wavelength grid, stored column-wise."""

    wavelength: np.ndarray
    r: np.ndarray
    t: np.ndarray
    R: np.ndarray
    T: np.ndarray

    def __len__(self) -> int:
        return len(self.wavelength)

    def __iter__(self) -> Iterator[StackResponse]:
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, k: int) -> StackResponse:
        return StackResponse(
            float(self.wavelength[k]), complex(self.r[k]), complex(self.t[k]), float(self.R[k]), float(self.T[k])
        )

    @property
    def phase_r(self) -> np.ndarray:
        return np.angle(self.r)


def _coefficients(stack: LayerStack, lam: np.ndarray, direction: Direction):
    if direction == "from_top":
        s = stack
    elif direction == "from_bottom":
        s = stack.reversed()
    else:
        raise ValueError(f"unknown direction {direction!r}")
    n0 = np.asarray(s.ambient.index(lam), dtype=float)
    ns = np.asarray(s.substrate.index(lam), dtype=float)
    m = stack_matrix(s, lam)
    b = m[..., 0, 0] + m[..., 0, 1] * ns
    c = m[..., 1, 0] + m[..., 1, 1] * ns
    denom = n0 * b + c
    r = (n0 * b - c) / denom
    t = 2.0 * n0 / denom
    R = np.abs(r) ** 2
    T = ns / n0 * np.abs(t) ** 2
    return r, t, R, T


def stack_response(stack: LayerStack, lam: float, direction: Direction = "from_top") -> StackResponse:
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    r, t, R, T = _coefficients(stack, np.asarray(float(lam)), direction)
    return StackResponse(float(lam), complex(r), complex(t), float(R), float(T))


def reflectivity_spectrum(
    stack: LayerStack, lambda_grid: Sequence[float], direction: Direction = "from_top"
) -> StackSpectrum:
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size == 0:
        raise ValueError("empty wavelength grid")
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    r, t, R, T = _coefficients(stack, lam, direction)
    return StackSpectrum(lam.copy(), r, t, R, T)


def mirror_transmission(design: PillarDesign, side: Literal["top", "bottom"], lam) -> np.ndarray | float:
    """Single-pass intensity transmission of one mirror.

    Light starts in the cavity material and leaves into the mirror's true
    exit medium (background above, substrate below).
    """
    count = design.n_top if side == "top" else design.n_bottom
    exit_medium = design.background if side == "top" else design.substrate
    mirror = LayerStack(tuple(mirror_layers(design, count)), design.cavity_material, exit_medium)
    _, _, _, T = _coefficients(mirror, np.asarray(lam, dtype=float), "from_top")
    return float(T) if np.ndim(T) == 0 else T


# --- cavity mode ------------------------------------------------------------


@dataclass(frozen=True)
class CavityMode:
    lambda_res: float  # um
    kappa: float  # meV, FWHM
    Q: float
    peak_transmission: float

    @property
    def energy(self) -> float:
        """Resonance photon energy in eV."""
        return HC_EV_UM / self.lambda_res

    found = True


@dataclass(frozen=True)
class NoResonance:
    reason: str

    found = False


def stop_band(stack: LayerStack, lam0: float | None = None) -> tuple[float, float]:
    """Wavelength edges of the first-order quarter-wave stop band."""
    lam0 = stack.lambda_design if lam0 is None else lam0
    if lam0 is None:
        raise ValueError("stack has no design wavelength")
    mirror = [l for k, l in enumerate(stack.layers) if k != stack.cavity_index]
    if not mirror:
        return lam0, lam0
    indices = [l.material.index(lam0) for l in mirror]
    n_hi, n_lo = max(indices), min(indices)
    half = (2.0 / math.pi) * math.asin((n_hi - n_lo) / (n_hi + n_lo))
    # frequency band [1 - half, 1 + half] * f0
    return lam0 / (1.0 + half), lam0 / (1.0 - half) if half < 1 else math.inf


def _transmission(stack: LayerStack, lam) -> np.ndarray:
    return _coefficients(stack, np.asarray(lam, dtype=float), "from_top")[3]


def _lorentzian(e, amp, e0, fwhm):
    return amp / (1.0 + ((e - e0) / (fwhm / 2.0)) ** 2)


def cavity_resonance(stack: LayerStack, n_scan: int = 4001) -> CavityMode | NoResonance:
    """Locate the spacer resonance inside the stop band and fit its linewidth.

    Coarse scan of the transmission, golden-section refinement of the peak,
    then a Lorentzian least-squares fit (in photon energy) over +-3
    preliminary half-widths.
    """
    if stack.cavity_index is None:
        raise ValueError("stack has no cavity layer")
    lam_lo, lam_hi = stop_band(stack)
    if not lam_hi > lam_lo:
        return NoResonance("no mirror layers: no stop band")
    # stay clear of the band edges where the transmission rises again
    span = lam_hi - lam_lo
    lam_lo, lam_hi = lam_lo + 0.1 * span, lam_hi - 0.1 * span
    grid = np.linspace(lam_lo, lam_hi, n_scan)
    T = _transmission(stack, grid)
    interior = np.flatnonzero((T[1:-1] > T[:-2]) & (T[1:-1] >= T[2:])) + 1
    if interior.size == 0:
        return NoResonance("no transmission peak inside the stop band")
    lam0 = stack.lambda_design
    k = interior[np.argmin(np.abs(grid[interior] - lam0))]

    res = minimize_scalar(
        lambda x: -float(_transmission(stack, x)),
        bracket=(grid[k - 1], grid[k], grid[k + 1]),
        method="golden",
        tol=1e-12,
        options={"xtol": 1e-12},
    )
    lam_peak = float(res.x)
    t_peak = float(_transmission(stack, lam_peak))

    # preliminary half width from the half-maximum crossings (in energy)
    e_peak = HC_EV_UM / lam_peak
    half_widths = []
    for sign in (-1.0, 1.0):
        step = 1e-6  # eV
        e = e_peak
        while True:
            e_next = e + sign * step
            if not (HC_EV_UM / lam_hi <= e_next <= HC_EV_UM / lam_lo):
                return NoResonance("transmission peak does not fall to half maximum inside the stop band")
            if float(_transmission(stack, HC_EV_UM / e_next)) < t_peak / 2:
                break
            e, step = e_next, step * 1.5
        # bisect the crossing
        a, b = e, e + sign * step
        for _ in range(60):
            mid = 0.5 * (a + b)
            if float(_transmission(stack, HC_EV_UM / mid)) >= t_peak / 2:
                a = mid
            else:
                b = mid
        half_widths.append(abs(0.5 * (a + b) - e_peak))
    hw = 0.5 * sum(half_widths)

    energies = np.linspace(e_peak - 3 * hw, e_peak + 3 * hw, 241)
    T_win = _transmission(stack, HC_EV_UM / energies)
    try:
        popt, _ = curve_fit(
            _lorentzian, energies - e_peak, T_win, p0=(t_peak, 0.0, 2 * hw), maxfev=20000
        )
    except RuntimeError:
        return NoResonance("Lorentzian fit did not converge")
    amp, de0, fwhm = popt
    fwhm = abs(fwhm)
    if not fwhm > 0 or not np.isfinite(fwhm):
        return NoResonance("degenerate Lorentzian fit")
    kappa_mev = fwhm * 1e3
    e_res = e_peak + de0
    return CavityMode(
        lambda_res=HC_EV_UM / e_res,
        kappa=kappa_mev,
        Q=e_res / fwhm,
        peak_transmission=t_peak,
    )


# --- directionality map -----------------------------------------------------


@dataclass(frozen=True)
class RatioMap:
    """T_top / T_bottom over a grid of mirror pair counts.

    ``ratio[i, j]`` belongs to ``n_bottom[i]`` and ``n_top[j]``.
    """

    n_top: tuple[float, ...]
    n_bottom: tuple[float, ...]
    lambda_um: float
    t_top: np.ndarray
    t_bottom: np.ndarray
    ratio: np.ndarray

    @property
    def upward(self) -> np.ndarray:
        return self.ratio > 1.0

    def classify(self, n_top: float, n_bottom: float) -> str:
        i = self.n_bottom.index(n_bottom)
        j = self.n_top.index(n_top)
        return "upward" if self.ratio[i, j] > 1.0 else "downward"


def transmissivity_ratio_map(
    n_top_range: Sequence[float],
    n_bottom_range: Sequence[float],
    lambda_um: float | None = None,
    design: PillarDesign | None = None,
) -> RatioMap:
    """Single-pass mirror transmissions at the design wavelength."""
    design = design or PillarDesign()
    if lambda_um is not None and lambda_um != design.lambda_design:
        design = design.with_(lambda_design=lambda_um)
    tops = tuple(n_top_range)
    bottoms = tuple(n_bottom_range)
    if not tops or not bottoms:
        raise ValueError("empty pair-count range")
    lam = design.lambda_design
    t_top = np.array([mirror_transmission(design.with_(n_top=n), "top", lam) for n in tops])
    t_bot = np.array([mirror_transmission(design.with_(n_bottom=n), "bottom", lam) for n in bottoms])
    ratio = t_top[None, :] / t_bot[:, None]
    return RatioMap(tops, bottoms, lam, t_top, t_bot, ratio)


# --- CSV surfaces -----------------------------------------------------------

SPECTRUM_COLUMNS = ("wavelength_um", "R", "T", "phase_r_rad")


def write_spectrum_csv(spectrum: StackSpectrum, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SPECTRUM_COLUMNS)
        for lam, R, T, ph in zip(spectrum.wavelength, spectrum.R, spectrum.T, spectrum.phase_r):
            w.writerow([repr(float(lam)), repr(float(R)), repr(float(T)), repr(float(ph))])


def read_spectrum_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(SPECTRUM_COLUMNS) - set(rows[0].keys() if rows else SPECTRUM_COLUMNS)
    if missing:
        raise ValueError(f"missing columns: {sorted(missing)}")
    return {c: np.array([float(r[c]) for r in rows]) for c in SPECTRUM_COLUMNS}


def write_ratio_map_csv(ratio_map: RatioMap, path) -> None:
    """Matrix CSV: first row holds N_top values, first column N_bottom values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_bottom\\n_top"] + [f"{n:g}" for n in ratio_map.n_top])
        for nb, row in zip(ratio_map.n_bottom, ratio_map.ratio):
            w.writerow([f"{nb:g}"] + [repr(float(v)) for v in row])


def design_resonance(design: PillarDesign) -> CavityMode | NoResonance:
    return cavity_resonance(build_stack(design))
