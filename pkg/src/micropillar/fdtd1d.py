"""One-dimensional Yee FDTD used as an independent check of the TMM engine.

Normalised units: lengths in micrometres, c = 1 (time in um/c), free-space
impedance 1. A rightward wave obeys H = n E, so the Poynting flux is E * H.
Layout along +x: ambient | stack | substrate, with first-order Mur absorbing
boundaries at both ends, a soft Gaussian source in the ambient and two
monitor planes (reflection in the ambient, transmission in the substrate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .geometry import LayerStack
from .tmm import reflectivity_spectrum, stop_band

__all__ = [
    "Pulse",
    "Grid1D",
    "FluxRecord",
    "FDTDConvergenceError",
    "simulate_stack",
    "convergence_sweep",
    "ConvergenceRow",
    "compare_with_tmm",
    "stop_band_mask",
    "observed_order",
    "DEFAULT_RESOLUTION",
    "MIN_RESOLUTION",
]

MIN_RESOLUTION = 40  # cells per shortest material wavelength
DEFAULT_RESOLUTION = 80
COURANT = 0.99


class FDTDConvergenceError(RuntimeError):
    def __init__(self, residual: float, steps: int):
        super().__init__(f"field energy did not decay: residual {residual:.3e} of peak after {steps} steps")
        self.residual = residual
        self.steps = steps


@dataclass(frozen=True)
class Pulse:
    """Gaussian-enveloped carrier whose 20 dB power band is ``center_um +- bandwidth_um / 2``."""

    center_um: float = 1.3
    bandwidth_um: float = 0.4

    def __post_init__(self) -> None:
        if not 0 < self.bandwidth_um < 2 * self.center_um:
            raise ValueError("bandwidth must be positive and smaller than twice the centre wavelength")

    @property
    def lambda_min(self) -> float:
        return self.center_um - self.bandwidth_um / 2

    @property
    def lambda_max(self) -> float:
        return self.center_um + self.bandwidth_um / 2

    @property
    def omega0(self) -> float:
        return math.pi * (1 / self.lambda_min + 1 / self.lambda_max)

    @property
    def tau(self) -> float:
        # |S(w)|^2 ~ exp(-(dw tau)^2 / 2) drops by 20 dB at the band edge
        half_band = math.pi * (1 / self.lambda_min - 1 / self.lambda_max)
        return math.sqrt(2 * math.log(100.0)) / half_band

    def waveform(self, t: np.ndarray) -> np.ndarray:
        t0 = 4.0 * self.tau
        return np.exp(-(((t - t0) / self.tau) ** 2)) * np.sin(self.omega0 * (t - t0))


@dataclass(frozen=True)
class Grid1D:
    cell_size: float
    n_cells: int
    index: np.ndarray = field(repr=False)
    dt: float
    x0: float  # position of the first stack interface
    stack_length: float
    source_cell: int
    reflection_cell: int
    transmission_cell: int
    resolution: float

    def __post_init__(self) -> None:
        if self.dt > COURANT * self.cell_size * (1 + 1e-12):
            raise ValueError("time step exceeds 0.99 of the 1-D Courant limit")

    @classmethod
    def for_stack(
        cls,
        stack: LayerStack,
        pulse: Pulse,
        resolution: float = DEFAULT_RESOLUTION,
        pad: float | None = None,
    ) -> Grid1D:
        """Uniform grid with ``resolution`` cells per shortest material wavelength.

        Split cells get the volume-weighted average of the indices they cover.
        """
        if resolution < MIN_RESOLUTION:
            raise ValueError(f"resolution must be >= {MIN_RESOLUTION} cells per wavelength")
        lam = pulse.center_um
        n_layers = [float(l.material.index(lam)) for l in stack.layers]
        n_amb = float(stack.ambient.index(lam))
        n_sub = float(stack.substrate.index(lam))
        n_max = max(n_layers + [n_amb, n_sub])
        dx = pulse.lambda_min / n_max / resolution
        if stack.layers:
            thinnest = min(l.thickness for l in stack.layers)
            if thinnest < 8 * dx:
                raise ValueError(
                    f"thinnest layer ({thinnest:.4g} um) spans fewer than 8 cells; raise the resolution"
                )
        pad = pulse.lambda_max if pad is None else pad
        edges = np.concatenate([[0.0], np.cumsum([l.thickness for l in stack.layers])]) + pad
        total = edges[-1] + pad
        n_cells = int(math.ceil(total / dx)) + 1
        x = np.arange(n_cells) * dx
        lo, hi = x - dx / 2, x + dx / 2
        segments = [(-math.inf, edges[0], n_amb)]
        segments += [(edges[k], edges[k + 1], n) for k, n in enumerate(n_layers)]
        segments += [(edges[-1], math.inf, n_sub)]
        acc = np.zeros(n_cells)
        for a, b, n in segments:
            acc += np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None) * n
        index = acc / dx
        return cls(
            cell_size=dx,
            n_cells=n_cells,
            index=index,
            dt=COURANT * dx,
            x0=pad,
            stack_length=float(edges[-1] - edges[0]),
            source_cell=int(round(0.25 * pad / dx)),
            reflection_cell=int(round(0.6 * pad / dx)),
            transmission_cell=n_cells - 1 - int(round(0.5 * pad / dx)),
            resolution=resolution,
        )


@numba.njit(cache=True)
def _run(eps, source_cell, source, max_steps, mon_r, mon_t, n_left, n_right, courant, check_every, tol):
    n = eps.size
    e = np.zeros(n)
    h = np.zeros(n - 1)
    er = np.zeros(max_steps)
    hr = np.zeros(max_steps)
    et = np.zeros(max_steps)
    ht = np.zeros(max_steps)
    c_left = (courant / n_left - 1.0) / (courant / n_left + 1.0)
    c_right = (courant / n_right - 1.0) / (courant / n_right + 1.0)
    peak = 0.0
    residual = 1.0
    steps = max_steps
    for step in range(max_steps):
        for i in range(n - 1):
            h[i] -= courant * (e[i + 1] - e[i])
        e1_old = e[1]
        en2_old = e[n - 2]
        e0_old = e[0]
        en1_old = e[n - 1]
        for i in range(1, n - 1):
            e[i] -= courant / eps[i] * (h[i] - h[i - 1])
        if step < source.size:
            e[source_cell] += source[step]
        e[0] = e1_old + c_left * (e[1] - e0_old)
        e[n - 1] = en2_old + c_right * (e[n - 2] - en1_old)
        er[step] = e[mon_r]
        hr[step] = 0.5 * (h[mon_r - 1] + h[mon_r])
        et[step] = e[mon_t]
        ht[step] = 0.5 * (h[mon_t - 1] + h[mon_t])
        if step % check_every == 0:
            energy = 0.0
            for i in range(n):
                energy += eps[i] * e[i] * e[i]
            for i in range(n - 1):
                energy += h[i] * h[i]
            if energy > peak:
                peak = energy
            if peak > 0.0:
                residual = energy / peak
            if step > source.size and residual < tol:
                steps = step + 1
                break
    return er[:steps], hr[:steps], et[:steps], ht[:steps], residual, steps


@numba.njit(cache=True)
def _dft(signal, omegas, dt):
    out = np.zeros(omegas.size, dtype=np.complex128)
    for k in range(omegas.size):
        rot = np.exp(-1j * omegas[k] * dt)
        p = 1.0 + 0.0j
        acc = 0.0 + 0.0j
        for m in range(signal.size):
            acc += signal[m] * p
            p *= rot
        out[k] = acc * dt
    return out


@dataclass(frozen=True)
class FluxRecord:
    """Monitor time series and the derived spectra.

    ``e_inc``/``h_inc`` come from the source-only reference run at the
    reflection plane; ``e_refl``/``h_refl`` are the scattered (reflected)
    fields there; ``e_trans``/``h_trans`` are sampled in the substrate.
    """

    dt: float
    e_inc: np.ndarray = field(repr=False)
    h_inc: np.ndarray = field(repr=False)
    e_refl: np.ndarray = field(repr=False)
    h_refl: np.ndarray = field(repr=False)
    e_trans: np.ndarray = field(repr=False)
    h_trans: np.ndarray = field(repr=False)
    wavelength: np.ndarray
    R: np.ndarray
    T: np.ndarray
    steps: int
    residual: float

    @property
    def injected_energy(self) -> float:
        return float(np.sum(self.e_inc * self.h_inc) * self.dt)

    @property
    def reflected_energy(self) -> float:
        return float(-np.sum(self.e_refl * self.h_refl) * self.dt)

    @property
    def transmitted_energy(self) -> float:
        return float(np.sum(self.e_trans * self.h_trans) * self.dt)

    @property
    def energy_balance(self) -> float:
        """(reflected + transmitted) / injected time-integrated flux."""
        return (self.reflected_energy + self.transmitted_energy) / self.injected_energy


def _band_grid(pulse: Pulse, n: int = 401) -> np.ndarray:
    # stay a little inside the 20 dB band
    lo = pulse.lambda_min + 0.05 * pulse.bandwidth_um
    hi = pulse.lambda_max - 0.05 * pulse.bandwidth_um
    return np.linspace(lo, hi, n)


def simulate_stack(
    stack: LayerStack,
    grid: Grid1D | None = None,
    pulse: Pulse | None = None,
    wavelengths=None,
    tol: float = 1e-12,
    max_steps: int = 5_000_000,
) -> FluxRecord:
    """Inject a pulse from the ambient and return R(lambda), T(lambda).

    Spectra are normalised to a source-only run on the same grid filled with
    the ambient medium. Requested wavelengths must lie inside the pulse's
    20 dB band.
    """
    pulse = pulse or Pulse()
    grid = grid or Grid1D.for_stack(stack, pulse)
    lam = _band_grid(pulse) if wavelengths is None else np.asarray(wavelengths, dtype=float)
    if np.any(lam < pulse.lambda_min) or np.any(lam > pulse.lambda_max):
        raise ValueError("requested wavelengths fall outside the pulse's 20 dB band")

    n_amb = float(stack.ambient.index(pulse.center_um))
    n_sub = float(stack.substrate.index(pulse.center_um))
    t_src = np.arange(int(math.ceil(8 * pulse.tau / grid.dt)) + 1) * grid.dt
    source = pulse.waveform(t_src)
    check = 50

    eps = grid.index**2
    er, hr, et, ht, residual, steps = _run(
        eps, grid.source_cell, source, max_steps, grid.reflection_cell, grid.transmission_cell,
        n_amb, n_sub, COURANT, check, tol,
    )
    if residual >= tol:
        raise FDTDConvergenceError(residual, steps)
    eps_ref = np.full_like(eps, n_amb**2)
    ei, hi, _, _, res_ref, steps_ref = _run(
        eps_ref, grid.source_cell, source, max_steps, grid.reflection_cell, grid.transmission_cell,
        n_amb, n_amb, COURANT, check, tol,
    )
    if res_ref >= tol:
        raise FDTDConvergenceError(res_ref, steps_ref)

    m = max(steps, steps_ref)
    pad = lambda a: np.concatenate([a, np.zeros(m - a.size)])
    er, hr, et, ht, ei, hi = (pad(a) for a in (er, hr, et, ht, ei, hi))
    e_sc, h_sc = er - ei, hr - hi

    omegas = 2 * np.pi / lam
    inc = _dft(ei, omegas, grid.dt)
    refl = _dft(e_sc, omegas, grid.dt)
    trans = _dft(et, omegas, grid.dt)
    R = np.abs(refl / inc) ** 2
    T = (n_sub / n_amb) * np.abs(trans / inc) ** 2
    return FluxRecord(grid.dt, ei, hi, e_sc, h_sc, et, ht, lam, R, T, steps, float(residual))


@dataclass(frozen=True)
class ConvergenceRow:
    resolution: float
    cell_size: float
    max_error: float
    steps: int


def stop_band_mask(stack: LayerStack, wavelengths: np.ndarray) -> np.ndarray:
    lo, hi = stop_band(stack)
    return (wavelengths >= lo) & (wavelengths <= hi)


def compare_with_tmm(stack: LayerStack, record: FluxRecord, mask: np.ndarray | None = None) -> float:
    """Largest |R_fdtd - R_tmm| over ``mask``.

    The default mask is the quarter-wave stop band, or the whole band for
    stacks without a design wavelength.
    """
    ref = reflectivity_spectrum(stack, record.wavelength).R
    if mask is None:
        if stack.lambda_design is None:
            mask = np.ones(record.wavelength.shape, dtype=bool)
        else:
            mask = stop_band_mask(stack, record.wavelength)
    return float(np.max(np.abs(record.R - ref)[mask]))


def convergence_sweep(
    stack: LayerStack,
    resolutions,
    pulse: Pulse | None = None,
    wavelengths=None,
) -> list[ConvergenceRow]:
    resolutions = list(resolutions)
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    pulse = pulse or Pulse()
    rows = []
    for res in resolutions:
        grid = Grid1D.for_stack(stack, pulse, res)
        rec = simulate_stack(stack, grid, pulse, wavelengths)
        rows.append(ConvergenceRow(res, grid.cell_size, compare_with_tmm(stack, rec), rec.steps))
    return rows


def observed_order(rows: list[ConvergenceRow]) -> float:
    """Least-squares slope of log(error) against log(cell size)."""
    h = np.log([r.cell_size for r in rows])
    e = np.log([r.max_error for r in rows])
    return float(np.polyfit(h, e, 1)[0])
