"""Phonon-sideband emission spectra and the ZPL-weight figure-of-merit chain.

Spectra live on a photon-detuning grid (meV, relative to the zero-phonon
line). A phonon of angular frequency omega > 0 emitted during the optical
transition red-shifts the photon, so the sideband density at detuning delta
is proportional to the phonon spectral density at omega = -delta / hbar:
the red side is the heavier one at low temperature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import constants
from scipy.integrate import quad_vec

from .channels import ChannelSpectra, PurcellCurve, purcell_lorentzian
from .tmm import HC_EV_UM

__all__ = [
    "PhononParams",
    "EmissionSpectrum",
    "PhononFigures",
    "phonon_dos",
    "detuning_to_omega",
    "detuning_grid",
    "build_bulk_spectrum",
    "zpl_weight",
    "apply_cavity",
    "apply_top_filter",
    "funneling",
    "xi_phonon",
    "indistinguishability",
    "psb_suppression",
    "phonon_figures",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

HBAR = constants.hbar
KB = constants.k
EV = constants.e
ZPL_WINDOW_LINEWIDTHS = 50.0


@dataclass(frozen=True)
class PhononParams:
    """Deformation-potential coupling of a dot to bulk LA phonons.

    Energies in eV, density kg/m^3, sound speed m/s, wavefunction lengths nm.
    """

    D_e: float = -14.6
    D_g: float = -4.8
    density: float = 5370.0
    c_l: float = 4780.0
    L_e_xy: float = 4.5
    L_e_z: float = 1.5
    L_g_xy: float = 4.5
    L_g_z: float = 1.5
    temperature: float = 4.0

    def __post_init__(self) -> None:
        for name in ("density", "c_l", "L_e_xy", "L_e_z", "L_g_xy", "L_g_z", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


def detuning_to_omega(delta_mev):
    """Phonon angular frequency (rad/s) for a photon detuning in meV."""
    return -np.asarray(delta_mev, dtype=float) * 1e-3 * EV / HBAR


def _coupling_integral(omega: np.ndarray, p: PhononParams, epsrel: float) -> np.ndarray:
    # omega-tilde^2 for each length, w~ = omega L / (2 c_l)
    w2 = (omega / (2.0 * p.c_l)) ** 2
    exy, ez = w2 * (p.L_e_xy * 1e-9) ** 2, w2 * (p.L_e_z * 1e-9) ** 2
    gxy, gz = w2 * (p.L_g_xy * 1e-9) ** 2, w2 * (p.L_g_z * 1e-9) ** 2

    def integrand(u):
        u2 = u * u
        bracket = p.D_e * np.exp(exy * (u2 - 1.0) - ez * u2) - p.D_g * np.exp(gxy * (u2 - 1.0) - gz * u2)
        return bracket * bracket

    value, err, info = quad_vec(integrand, 0.0, 1.0, epsrel=epsrel, epsabs=0.0, full_output=True)
    if not info.success:
        raise ArithmeticError(f"phonon coupling quadrature did not converge: {info.message}")
    return value


def phonon_dos(omega, params: PhononParams | None = None, epsrel: float = 1e-10):
    """Phonon spectral density at angular frequency ``omega`` (rad/s).

    The thermal factor omega^3 / (1 - exp(-hbar omega / kT)) makes the
    absorption side (omega < 0) smaller by exp(-hbar |omega| / kT). The
    deformation coupling enters squared, so the density is never negative.
    """
    p = params or PhononParams()
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    integral = _coupling_integral(w, p, epsrel) * EV**2
    x = HBAR * w / (KB * p.temperature)
    thermal = np.zeros_like(w)
    nz = w != 0
    thermal[nz] = w[nz] ** 3 / (-np.expm1(-x[nz]))
    out = HBAR / (4.0 * np.pi * p.density * p.c_l**5) * thermal * integral
    return float(out[0]) if np.ndim(omega) == 0 else out


# --- spectra ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmissionSpectrum:
    """Emission density (1/meV) split into zero-phonon and sideband parts."""

    detuning: np.ndarray
    zpl: np.ndarray
    psb: np.ndarray
    gamma0_uev: float = 0.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        d = np.asarray(self.detuning, dtype=float)
        z = np.asarray(self.zpl, dtype=float)
        s = np.asarray(self.psb, dtype=float)
        if d.ndim != 1 or d.size < 2 or np.any(np.diff(d) <= 0):
            raise ValueError("detuning grid must be strictly increasing")
        if z.shape != d.shape or s.shape != d.shape:
            raise ValueError("spectral components must share the detuning grid")
        if np.any(z < 0) or np.any(s < 0):
            raise ValueError("spectral density must be >= 0")
        for name, a in (("detuning", d), ("zpl", z), ("psb", s)):
            object.__setattr__(self, name, a)

    @property
    def density(self) -> np.ndarray:
        return self.zpl + self.psb

    @property
    def zpl_partition(self) -> np.ndarray:
        """Window |delta| <= 50 linewidths flagged as the ZPL for export."""
        return np.abs(self.detuning) <= ZPL_WINDOW_LINEWIDTHS * self.gamma0_uev * 1e-3

    def total(self) -> float:
        return float(np.trapezoid(self.density, self.detuning))

    def scaled(self, factor) -> EmissionSpectrum:
        return EmissionSpectrum(self.detuning, self.zpl * factor, self.psb * factor, self.gamma0_uev, dict(self.meta))


def detuning_grid(
    gamma0_uev: float = 0.5,
    span_mev: float = 15.0,
    fine_step_uev: float = 0.02,
    coarse_step_mev: float = 0.01,
    density: float = 1.0,
    growth: float = 1.1,
) -> np.ndarray:
    """Symmetric grid: uniform core of +-10 linewidths, geometric hand-off, uniform wings.

    ``density`` multiplies the number of points (steps are divided by it).
    """
    fine = fine_step_uev * 1e-3 / density
    coarse = coarse_step_mev / density
    core_edge = 10.0 * gamma0_uev * 1e-3
    n_core = int(round(core_edge / fine))
    pos = list(np.arange(1, n_core + 1) * fine)
    step = fine
    x = pos[-1]
    g = growth ** (1.0 / density)
    while step * g < coarse:
        step *= g
        x += step
        pos.append(x)
    n_wing = int(math.floor((span_mev - x) / coarse + 1e-9))
    pos.extend(x + np.arange(1, n_wing + 1) * coarse)
    if pos[-1] < span_mev - 1e-12:
        pos.append(span_mev)
    pos = np.array(pos)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _lorentzian(delta_mev: np.ndarray, fwhm_mev: float) -> np.ndarray:
    h = fwhm_mev / 2.0
    return (h / np.pi) / (delta_mev**2 + h**2)


def build_bulk_spectrum(
    gamma0_linewidth: float = 0.5,
    w_target: float = 0.9,
    params: PhononParams | None = None,
    grid: np.ndarray | None = None,
    tail_tolerance: float = 0.005,
) -> EmissionSpectrum:
    """Bulk emission: Lorentzian ZPL (FWHM in ueV) plus a sideband scaled to ``w_target``."""
    if not 0.0 < w_target <= 1.0:
        raise ValueError("w_target must lie in (0, 1]")
    if not gamma0_linewidth > 0:
        raise ValueError("linewidth must be > 0")
    params = params or PhononParams()
    d = detuning_grid(gamma0_linewidth) if grid is None else np.asarray(grid, dtype=float)
    zpl = _lorentzian(d, gamma0_linewidth * 1e-3)
    if w_target == 1.0:
        return EmissionSpectrum(d, zpl, np.zeros_like(d), gamma0_linewidth, {"w_target": 1.0})
    shape = phonon_dos(detuning_to_omega(d), params)
    _check_tail(d, shape, params, tail_tolerance)
    z_int = np.trapezoid(zpl, d)
    s_int = np.trapezoid(shape, d)
    psb = shape * (z_int * (1.0 / w_target - 1.0) / s_int)
    return EmissionSpectrum(d, zpl, psb, gamma0_linewidth, {"w_target": w_target})


def _check_tail(d: np.ndarray, shape: np.ndarray, params: PhononParams, tol: float) -> None:
    lo, hi = d[0], d[-1]
    span = max(abs(lo), abs(hi))
    outer = np.linspace(span, 4.0 * span, 600)
    tail_r = phonon_dos(detuning_to_omega(-outer), params)
    tail_b = phonon_dos(detuning_to_omega(outer), params)
    inside = np.trapezoid(shape, d)
    outside = np.trapezoid(tail_r + tail_b, outer)
    if inside <= 0 or outside / (inside + outside) > tol:
        raise ValueError(
            f"detuning grid +-{span:g} meV misses {outside / (inside + outside):.2%} of the phonon sideband"
        )


def zpl_weight(s: EmissionSpectrum) -> float:
    total = s.total()
    if total <= 0:
        raise ArithmeticError("spectrum integrates to zero")
    return float(np.trapezoid(s.zpl, s.detuning)) / total


FPSource = Union[PurcellCurve, ChannelSpectra, Callable[[np.ndarray], np.ndarray], tuple]


def _zpl_energy(s: EmissionSpectrum, ch: ChannelSpectra, e_zpl: float | None) -> float:
    if e_zpl is not None:
        return e_zpl
    if "e_zpl" in s.meta:
        return s.meta["e_zpl"]
    if "lambda_res" in ch.meta:
        return HC_EV_UM / ch.meta["lambda_res"]
    return float(ch.energy[np.argmax(ch.gamma_cavity)])


def _purcell_on_grid(s: EmissionSpectrum, fp: FPSource, e_zpl: float | None) -> np.ndarray:
    d = s.detuning
    if isinstance(fp, PurcellCurve):
        return purcell_lorentzian(fp, d)
    if isinstance(fp, ChannelSpectra):
        e0 = _zpl_energy(s, fp, e_zpl)
        grid = fp.energy[::-1]
        e = e0 + d * 1e-3
        if e[0] < grid[0] * (1 - 1e-12) or e[-1] > grid[-1] * (1 + 1e-12):
            raise ValueError("channel spectra do not cover the emission grid")
        return np.interp(e, grid, fp.purcell[::-1])
    if isinstance(fp, tuple):
        x, y = (np.asarray(a, dtype=float) for a in fp)
        if d[0] < x[0] or d[-1] > x[-1]:
            raise ValueError("tabulated Purcell factor does not cover the emission grid")
        return np.interp(d, x, y)
    return np.asarray(fp(d), dtype=float)


def apply_cavity(s: EmissionSpectrum, fp: FPSource, e_zpl: float | None = None) -> EmissionSpectrum:
    """Reweight the emission by the detuning-dependent Purcell factor."""
    f = _purcell_on_grid(s, fp, e_zpl)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("Purcell factor must be finite and >= 0")
    out = s.scaled(f)
    if e_zpl is not None:
        out.meta["e_zpl"] = e_zpl
    return out


def _xi_on_grid(s: EmissionSpectrum, ch: ChannelSpectra, e_zpl: float | None) -> np.ndarray:
    e0 = _zpl_energy(s, ch, e_zpl)
    xi = ch.xi_at_energy(e0 + s.detuning * 1e-3)
    if np.any(np.isnan(xi)):
        raise ValueError("top-collection efficiency undefined somewhere on the emission grid")
    return xi


def apply_top_filter(s: EmissionSpectrum, ch: ChannelSpectra, e_zpl: float | None = None) -> EmissionSpectrum:
    """Keep only the part of the emission leaving through the top facet."""
    return s.scaled(_xi_on_grid(s, ch, e_zpl))


def xi_on_resonance(s: EmissionSpectrum, ch: ChannelSpectra, e_zpl: float | None = None) -> float:
    e0 = _zpl_energy(s, ch, e_zpl)
    return float(ch.xi_at_energy(np.array([e0]))[0])


def funneling(s_4pi: EmissionSpectrum, ch: ChannelSpectra, e_zpl: float | None = None) -> float:
    """Top-collected fraction of the emission relative to on-resonance collection."""
    total = s_4pi.total()
    if total <= 0:
        raise ArithmeticError("spectrum integrates to zero")
    xi = _xi_on_grid(s_4pi, ch, e_zpl)
    xi0 = xi_on_resonance(s_4pi, ch, e_zpl)
    return float(np.trapezoid(s_4pi.density * xi, s_4pi.detuning)) / (xi0 * total)


def xi_phonon(s_top: EmissionSpectrum, s_4pi: EmissionSpectrum, xi_res: float) -> float:
    den = xi_res * s_4pi.total()
    if den <= 0:
        raise ArithmeticError("zero denominator")
    return s_top.total() / den


def indistinguishability(w_top: float) -> float:
    if not 0.0 <= w_top <= 1.0:
        raise ValueError("ZPL weight must lie in [0, 1]")
    return w_top * w_top


def psb_suppression(w_bulk: float, w_out: float) -> float:
    """(1 - W_bulk) / (1 - W_out); infinite when the sideband vanishes."""
    if w_out >= 1.0:
        return math.inf
    return (1.0 - w_bulk) / (1.0 - w_out)


@dataclass(frozen=True)
class PhononFigures:
    w_bulk: float
    w_4pi: float
    w_top: float
    funneling: float
    xi_res: float
    xi_phonon: float
    epsilon: float
    indistinguishability: float
    psb_suppression: float


def phonon_figures(
    ch: ChannelSpectra,
    bulk: EmissionSpectrum | None = None,
    fp: FPSource | None = None,
    e_zpl: float | None = None,
) -> tuple[PhononFigures, dict[str, EmissionSpectrum]]:
    """Bulk -> cavity -> top-facet chain for a dot resonant with the cavity.

    ``fp`` defaults to the channels' own Purcell factor.
    """
    bulk = bulk or build_bulk_spectrum()
    e0 = _zpl_energy(bulk, ch, e_zpl)
    s_4pi = apply_cavity(bulk, ch if fp is None else fp, e0)
    s_top = apply_top_filter(s_4pi, ch, e0)
    w_bulk = zpl_weight(bulk)
    w_4pi = zpl_weight(s_4pi)
    w_top = zpl_weight(s_top)
    xi0 = xi_on_resonance(s_4pi, ch, e0)
    xph = xi_phonon(s_top, s_4pi, xi0)
    figs = PhononFigures(
        w_bulk=w_bulk,
        w_4pi=w_4pi,
        w_top=w_top,
        funneling=funneling(s_4pi, ch, e0),
        xi_res=xi0,
        xi_phonon=xph,
        epsilon=xi0 * xph,
        indistinguishability=indistinguishability(w_top),
        psb_suppression=psb_suppression(w_bulk, w_4pi),
    )
    return figs, {"bulk": bulk, "4pi": s_4pi, "top": s_top}


# --- CSV ------------------------------------------------------------------------

SPECTRUM_COLUMNS = ("detuning_meV", "density_per_meV", "is_zpl")


def write_spectrum_csv(s: EmissionSpectrum, path) -> None:
    """Three documented columns plus the ZPL component so weights survive a round trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SPECTRUM_COLUMNS + ("zpl_density_per_meV",))
        for d, dens, flag, z in zip(s.detuning, s.density, s.zpl_partition, s.zpl):
            w.writerow([repr(float(d)), repr(float(dens)), int(flag), repr(float(z))])


def read_spectrum_csv(path, gamma0_uev: float = 0.5) -> EmissionSpectrum:
    """Inverse of :func:`write_spectrum_csv`.

    Without the ZPL component column the flagged window is taken as the ZPL.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty spectrum file")
    missing = [c for c in SPECTRUM_COLUMNS if c not in rows[0]]
    if missing:
        raise ValueError(f"missing columns {missing}")
    d = np.array([float(r["detuning_meV"]) for r in rows])
    dens = np.array([float(r["density_per_meV"]) for r in rows])
    if "zpl_density_per_meV" in rows[0]:
        z = np.array([float(r["zpl_density_per_meV"]) for r in rows])
    else:
        z = np.where(np.array([int(r["is_zpl"]) for r in rows]) == 1, dens, 0.0)
    return EmissionSpectrum(d, z, np.clip(dens - z, 0.0, None), gamma0_uev)
