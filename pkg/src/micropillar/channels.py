"""Decay-channel ledger and the cavity-QED efficiency algebra.

All rates are in units of the bulk decay rate Gamma_0. The cavity channel
is the vertical mode, Gamma_cavity = Gamma_top + Gamma_bottom.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .geometry import PillarDesign, build_stack
from .sidemode import SideResonator, gamma_side_model
from .tmm import HC_EV_UM, CavityMode, cavity_resonance, mirror_transmission

__all__ = [
    "ChannelSpectra",
    "PurcellCurve",
    "UndefinedRatioError",
    "NoResonanceError",
    "ChannelFileError",
    "DEFAULT_F_PEAK",
    "synthesize_channels",
    "channels_from_curve",
    "ingest_channels",
    "write_channels_csv",
    "purcell_factor",
    "beta_factor",
    "eta_factor",
    "xi_factor",
    "beta_atom",
    "purcell_lorentzian",
    "fit_g",
    "xi_bandwidth",
]

# on-resonance Purcell factor: peak-to-baseline ratio ~55 over an off-resonant floor of 0.3
DEFAULT_F_PEAK = 16.5

CHANNEL_COLUMNS = ("lambda_um", "gamma_top", "gamma_bottom", "gamma_side")


class UndefinedRatioError(ArithmeticError):
    """A 0/0 efficiency ratio; never silently mapped to 0 or 1."""


class NoResonanceError(RuntimeError):
    pass


class ChannelFileError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True, eq=False)
class ChannelSpectra:
    wavelength: np.ndarray
    gamma_top: np.ndarray
    gamma_bottom: np.ndarray
    gamma_side: np.ndarray
    provenance: Literal["model", "ingested"] = "model"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        arrays = []
        for name in ("wavelength", "gamma_top", "gamma_bottom", "gamma_side"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrays.append(a)
        lam = arrays[0]
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("wavelength grid must be a non-empty 1-D array")
        if any(a.shape != lam.shape for a in arrays[1:]):
            raise ValueError("all channels must share the wavelength grid")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")
        for name, a in zip(("gamma_top", "gamma_bottom", "gamma_side"), arrays[1:]):
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite and >= 0")
        if self.provenance not in ("model", "ingested"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def energy(self) -> np.ndarray:
        """Photon energy of each grid point, eV (decreasing)."""
        return HC_EV_UM / self.wavelength

    @property
    def gamma_cavity(self) -> np.ndarray:
        return self.gamma_top + self.gamma_bottom

    @property
    def gamma_total(self) -> np.ndarray:
        return self.gamma_top + self.gamma_bottom + self.gamma_side

    @property
    def purcell(self) -> np.ndarray:
        return self.gamma_total

    @property
    def beta(self) -> np.ndarray:
        return _ratio(self.gamma_cavity, self.gamma_total)

    @property
    def eta(self) -> np.ndarray:
        return _ratio(self.gamma_top, self.gamma_cavity)

    @property
    def xi(self) -> np.ndarray:
        """Gamma_top / Gamma_total; NaN where undefined."""
        return _ratio(self.gamma_top, self.gamma_total)

    def at(self, lam: float) -> tuple[float, float, float]:
        """(top, bottom, side) at ``lam`` by linear interpolation."""
        lo, hi = self.wavelength[0], self.wavelength[-1]
        if not lo <= lam <= hi:
            raise ValueError(f"wavelength {lam} um outside channel grid [{lo}, {hi}]")
        return (
            float(np.interp(lam, self.wavelength, self.gamma_top)),
            float(np.interp(lam, self.wavelength, self.gamma_bottom)),
            float(np.interp(lam, self.wavelength, self.gamma_side)),
        )

    def xi_at_energy(self, energy_ev) -> np.ndarray:
        """Interpolated Gamma_top / Gamma_total at photon energies (eV)."""
        e = np.asarray(energy_ev, dtype=float)
        grid = self.energy[::-1]
        tol = 1e-12 * grid[-1]
        if np.any(e < grid[0] - tol) or np.any(e > grid[-1] + tol):
            raise ValueError("energies outside the channel grid")
        e = np.clip(e, grid[0], grid[-1])
        top = np.interp(e, grid, self.gamma_top[::-1])
        tot = np.interp(e, grid, self.gamma_total[::-1])
        return _ratio(top, tot)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(np.shape(num), np.nan)
    ok = den > 0
    np.divide(num, den, out=out, where=ok)
    return out


def _checked(num: float, den: float, what: str) -> float:
    if den == 0.0:
        raise UndefinedRatioError(f"{what} undefined: zero denominator")
    return num / den


def purcell_factor(ch: ChannelSpectra, lam: float) -> float:
    top, bottom, side = ch.at(lam)
    return top + bottom + side


def beta_factor(ch: ChannelSpectra, lam: float) -> float:
    top, bottom, side = ch.at(lam)
    return _checked(top + bottom, top + bottom + side, "beta")


def eta_factor(ch: ChannelSpectra, lam: float) -> float:
    top, bottom, _ = ch.at(lam)
    return _checked(top, top + bottom, "eta")


def xi_factor(ch: ChannelSpectra, lam: float) -> float:
    top, bottom, side = ch.at(lam)
    return _checked(top, top + bottom + side, "xi")


def beta_atom(purcell: float) -> float:
    """Small-solid-angle estimate F_P / (F_P + 1)."""
    if purcell < 0:
        raise ValueError("Purcell factor must be >= 0")
    if math.isinf(purcell):
        return 1.0
    return purcell / (purcell + 1.0)


# --- Lorentzian Purcell curve -----------------------------------------------


@dataclass(frozen=True)
class PurcellCurve:
    """F_P(delta) = B + 4 g^2 / (kappa Gamma_0) * L(delta), L(0) = 1.

    ``g`` and ``gamma0`` in ueV, ``kappa`` in meV, ``center_energy`` in eV.
    """

    g: float
    kappa: float
    gamma0: float = 0.5
    background: float = 1.0
    center_energy: float = HC_EV_UM / 1.3

    def __post_init__(self) -> None:
        if not (self.g >= 0 and self.kappa > 0 and self.gamma0 > 0):
            raise ValueError("g must be >= 0, kappa and gamma0 > 0")
        if self.background < 0:
            raise ValueError("background must be >= 0")

    @classmethod
    def from_peak(
        cls,
        f_peak: float,
        kappa: float,
        gamma0: float = 0.5,
        background: float = 1.0,
        center_energy: float = HC_EV_UM / 1.3,
    ) -> PurcellCurve:
        return cls(fit_g(f_peak, kappa, gamma0, background), kappa, gamma0, background, center_energy)

    @property
    def peak_excess(self) -> float:
        return 4.0 * self.g**2 / (self.kappa * 1e3 * self.gamma0)

    @property
    def peak(self) -> float:
        return self.background + self.peak_excess

    def __call__(self, delta_mev):
        return purcell_lorentzian(self, delta_mev)


def purcell_lorentzian(curve: PurcellCurve, delta):
    """Purcell factor at detuning ``delta`` (meV)."""
    half = curve.kappa / 2.0
    d = np.asarray(delta, dtype=float)
    out = curve.background + curve.peak_excess * half**2 / (half**2 + d**2)
    return float(out) if out.ndim == 0 else out


def fit_g(f_peak: float, kappa: float, gamma0: float, background: float) -> float:
    """Coupling g (ueV) giving on-resonance Purcell factor ``f_peak``."""
    if f_peak < background:
        raise ValueError("peak Purcell factor must not lie below the background")
    return math.sqrt((f_peak - background) * kappa * 1e3 * gamma0) / 2.0


# --- channel spectra sources --------------------------------------------------


def _energy_grid(e_center: float, half_span_ev: float, n_points: int) -> np.ndarray:
    e = np.linspace(e_center - half_span_ev, e_center + half_span_ev, n_points)
    return e


def synthesize_channels(
    design: PillarDesign,
    f_peak: float = DEFAULT_F_PEAK,
    n_points: int = 2001,
    mode: CavityMode | None = None,
) -> ChannelSpectra:
    """Model spectra: Airy side channel plus a Lorentzian vertical mode.

    The vertical mode has the TMM linewidth, reaches ``f_peak`` in total on
    resonance and is shared between top and bottom in proportion to the
    single-pass mirror transmissions.
    """
    if mode is None:
        found = cavity_resonance(build_stack(design))
        if not found.found:
            raise NoResonanceError(found.reason)
        mode = found
    e_res = mode.energy
    kappa_ev = mode.kappa * 1e-3
    half_span = max(15e-3, 10 * kappa_ev)
    energies = _energy_grid(e_res, half_span, n_points)
    lam = (HC_EV_UM / energies)[::-1]
    energies = energies[::-1]

    side_model = SideResonator(design.d_cavity, design.n_cavity, design.background.index(design.lambda_design))
    side = gamma_side_model(side_model, lam)
    side_at_res = float(gamma_side_model(side_model, np.array([mode.lambda_res]))[0])
    excess = f_peak - side_at_res
    if excess < 0:
        raise ValueError(f"f_peak {f_peak} lies below the side-channel floor {side_at_res:.4g}")
    half = kappa_ev / 2.0
    cavity = excess * half**2 / (half**2 + (energies - e_res) ** 2)

    t_top = mirror_transmission(design, "top", lam)
    t_bot = mirror_transmission(design, "bottom", lam)
    share = t_top / (t_top + t_bot)
    return ChannelSpectra(
        lam,
        cavity * share,
        cavity * (1.0 - share),
        side,
        "model",
        {"lambda_res": mode.lambda_res, "kappa_mev": mode.kappa, "Q": mode.Q, "f_peak": f_peak},
    )


def channels_from_curve(
    curve: PurcellCurve,
    eta: float = 1.0,
    half_span_mev: float | None = None,
    n_points: int = 4001,
) -> ChannelSpectra:
    """Spectra whose total is exactly ``curve``: a flat side floor equal to the
    curve background and the Lorentzian excess split ``eta : 1 - eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    half_span = (half_span_mev if half_span_mev is not None else max(15.0, 10 * curve.kappa)) * 1e-3
    energies = _energy_grid(curve.center_energy, half_span, n_points)[::-1]
    lam = HC_EV_UM / energies
    excess = purcell_lorentzian(curve, (energies - curve.center_energy) * 1e3) - curve.background
    side = np.full_like(lam, curve.background)
    return ChannelSpectra(
        lam, excess * eta, excess * (1.0 - eta), side, "model",
        {"kappa_mev": curve.kappa, "f_peak": curve.peak, "lambda_res": HC_EV_UM / curve.center_energy},
    )


def ingest_channels(path) -> ChannelSpectra:
    """Load a channel CSV exported by an external solver (or by this package)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ChannelFileError("empty file", 1) from None
        missing = [c for c in CHANNEL_COLUMNS if c not in header]
        if missing:
            raise ChannelFileError(f"missing columns {missing}", 1)
        cols = [header.index(c) for c in CHANNEL_COLUMNS]
        data = []
        prev = -math.inf
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(row[c]) for c in cols]
            except (IndexError, ValueError):
                raise ChannelFileError("unparseable or short row", row_no) from None
            if any(not math.isfinite(v) for v in values):
                raise ChannelFileError("non-finite value", row_no)
            if any(v < 0 for v in values[1:]):
                raise ChannelFileError("negative decay rate", row_no)
            if values[0] <= prev:
                raise ChannelFileError("wavelength not strictly increasing", row_no)
            prev = values[0]
            data.append(values)
    if not data:
        raise ChannelFileError("no data rows", 2)
    arr = np.array(data)
    return ChannelSpectra(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], "ingested", {"source": str(path)})


def write_channels_csv(ch: ChannelSpectra, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CHANNEL_COLUMNS)
        for row in zip(ch.wavelength, ch.gamma_top, ch.gamma_bottom, ch.gamma_side):
            w.writerow([repr(float(v)) for v in row])


def xi_bandwidth(ch: ChannelSpectra) -> float:
    """FWHM (meV) of the top-collection efficiency around its maximum."""
    xi = ch.xi
    if np.all(np.isnan(xi)):
        raise UndefinedRatioError("xi undefined on the whole grid")
    finite = np.nan_to_num(xi, nan=-np.inf)
    k = int(np.argmax(finite))
    peak = xi[k]
    valid = xi[np.isfinite(xi)]
    if peak <= 0 or np.ptp(valid) <= 1e-12 * max(peak, 1e-300):
        raise UndefinedRatioError("xi is flat: no bandwidth")
    if k == 0 or k == xi.size - 1:
        raise ValueError("xi has no interior maximum on this grid")
    e = ch.energy
    half = peak / 2.0

    def crossing(step: int) -> float:
        j = k
        while 0 <= j + step < xi.size:
            nxt = j + step
            if not xi[nxt] > half:
                # linear interpolation between j and nxt
                f = (xi[j] - half) / (xi[j] - xi[nxt])
                return e[j] + f * (e[nxt] - e[j])
            j = nxt
        raise UndefinedRatioError("xi does not fall to half maximum inside the grid")

    return abs(crossing(-1) - crossing(1)) * 1e3
