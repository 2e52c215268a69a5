"""Materials, planar layer stacks and the diameter selection rules.

All lengths are in micrometres. Stacks are ordered top (ambient side) to
bottom (substrate side).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Material",
    "Layer",
    "LayerStack",
    "PillarDesign",
    "GAAS",
    "ALAS",
    "BCB",
    "AIR",
    "MATERIALS",
    "build_stack",
    "stack_from_indices",
    "mirror_layers",
    "full_wave_diameters",
    "half_wave_diameters",
    "default_design",
    "load_config",
]


@dataclass(frozen=True)
class Material:
    """A lossless dielectric.

    ``dispersion`` is an optional table of ``(wavelength_um, index)`` pairs,
    linearly interpolated; outside the table the call fails rather than
    extrapolating.
    """

    name: str
    refractive_index: float
    dispersion: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if not self.refractive_index >= 1.0:
            raise ValueError(f"{self.name}: refractive index must be >= 1, got {self.refractive_index}")
        if self.dispersion is not None:
            table = tuple((float(w), float(n)) for w, n in self.dispersion)
            if len(table) < 2:
                raise ValueError(f"{self.name}: dispersion table needs at least two rows")
            waves = [w for w, _ in table]
            if any(b <= a for a, b in zip(waves, waves[1:])):
                raise ValueError(f"{self.name}: dispersion wavelengths must be strictly increasing")
            if any(n < 1.0 for _, n in table):
                raise ValueError(f"{self.name}: dispersion indices must be >= 1")
            object.__setattr__(self, "dispersion", table)

    def index(self, wavelength):
        """Refractive index at ``wavelength`` (scalar or array, µm)."""
        if self.dispersion is None:
            if np.ndim(wavelength) == 0:
                return self.refractive_index
            return np.full(np.shape(wavelength), self.refractive_index)
        waves, indices = np.array(self.dispersion).T
        w = np.asarray(wavelength, dtype=float)
        if np.any(w < waves[0]) or np.any(w > waves[-1]):
            raise ValueError(
                f"{self.name}: wavelength outside tabulated range [{waves[0]}, {waves[-1]}] um"
            )
        out = np.interp(w, waves, indices)
        return float(out) if out.ndim == 0 else out

    @property
    def dispersive(self) -> bool:
        return self.dispersion is not None


# n_GaAs is pinned so that 6 * 1.3 / n = 2.25 um; n_AlAs reproduces the 1-D linewidths.
GAAS = Material("GaAs", 3.467)
ALAS = Material("AlAs", 2.96)
BCB = Material("BCB", 1.54)
AIR = Material("air", 1.0)

MATERIALS: dict[str, Material] = {m.name.lower(): m for m in (GAAS, ALAS, BCB, AIR)}


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float

    def __post_init__(self) -> None:
        if not self.thickness > 0:
            raise ValueError(f"layer thickness must be > 0, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Planar multilayer between a semi-infinite ambient and substrate.

    ``cavity_index`` points at the spacer layer inside ``layers`` (``None``
    for a plain mirror or arbitrary film stack).
    """

    layers: tuple[Layer, ...]
    ambient: Material = AIR
    substrate: Material = GAAS
    cavity_index: int | None = None
    lambda_design: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.cavity_index is not None and not 0 <= self.cavity_index < len(self.layers):
            raise ValueError("cavity_index outside the layer sequence")

    def __len__(self) -> int:
        return len(self.layers)

    def indices(self, wavelength) -> list:
        return [layer.material.index(wavelength) for layer in self.layers]

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers], dtype=float)

    @property
    def total_thickness(self) -> float:
        return float(self.thicknesses.sum())

    def optical_thickness(self, wavelength: float) -> float:
        return float(sum(layer.material.index(wavelength) * layer.thickness for layer in self.layers))

    @property
    def cavity(self) -> Layer | None:
        return None if self.cavity_index is None else self.layers[self.cavity_index]

    def reversed(self) -> LayerStack:
        """The same structure seen from the substrate side."""
        n = len(self.layers)
        cav = None if self.cavity_index is None else n - 1 - self.cavity_index
        return LayerStack(
            tuple(reversed(self.layers)), self.substrate, self.ambient, cav, self.lambda_design
        )

    @property
    def is_lossless(self) -> bool:
        # every material in this package is real-index
        return True


def _check_pair_count(label: str, count: float) -> float:
    doubled = 2 * count
    if count < 0 or not math.isclose(doubled, round(doubled), abs_tol=1e-9):
        raise ValueError(f"{label} must be a non-negative integer or half-integer, got {count}")
    return round(doubled) / 2


@dataclass(frozen=True)
class PillarDesign:
    """One point of the (diameter, top pairs, bottom pairs) design space."""

    lambda_design: float = 1.3
    d_cavity: float = 1.875
    n_top: float = 13
    n_bottom: float = 35.5
    high_index: Material = GAAS
    low_index: Material = ALAS
    cavity_material: Material = GAAS
    background: Material = AIR
    substrate: Material = GAAS

    def __post_init__(self) -> None:
        if not self.lambda_design > 0:
            raise ValueError("lambda_design must be > 0")
        if not self.d_cavity > 0:
            raise ValueError("d_cavity must be > 0")
        object.__setattr__(self, "n_top", _check_pair_count("n_top", self.n_top))
        object.__setattr__(self, "n_bottom", _check_pair_count("n_bottom", self.n_bottom))

    @property
    def n_cavity(self) -> float:
        return self.cavity_material.index(self.lambda_design)

    @property
    def label(self) -> str:
        return f"{_fmt_count(self.n_top)}/{_fmt_count(self.n_bottom)}@{self.d_cavity:.4g}um"

    def with_(self, **changes) -> PillarDesign:
        return replace(self, **changes)


def _fmt_count(count: float) -> str:
    return str(int(count)) if float(count).is_integer() else f"{count:g}"


def _quarter_wave(material: Material, lam: float) -> Layer:
    return Layer(material, lam / (4.0 * material.index(lam)))


def mirror_layers(design: PillarDesign, count: float) -> list[Layer]:
    """Quarter-wave layers of one mirror, ordered outward from the cavity.

    The sequence alternates low, high, low, ... starting next to the cavity,
    so ``count`` pairs give ``2 * count`` layers and a half-integer count ends
    on the extra layer at the exit side.
    """
    count = _check_pair_count("pair count", count)
    lam = design.lambda_design
    low = _quarter_wave(design.low_index, lam)
    high = _quarter_wave(design.high_index, lam)
    return [low if k % 2 == 0 else high for k in range(int(round(2 * count)))]


def build_stack(design: PillarDesign) -> LayerStack:
    """Vertical resonator: top mirror, one-wavelength spacer, bottom mirror."""
    lam = design.lambda_design
    top = list(reversed(mirror_layers(design, design.n_top)))
    bottom = mirror_layers(design, design.n_bottom)
    cavity = Layer(design.cavity_material, lam / design.cavity_material.index(lam))
    return LayerStack(
        layers=tuple(top + [cavity] + bottom),
        ambient=design.background,
        substrate=design.substrate,
        cavity_index=len(top),
        lambda_design=lam,
    )


def _integers(values: Iterable[int], minimum: int, label: str) -> list[int]:
    ints = sorted({int(v) for v in values})
    if not ints:
        raise ValueError(f"empty {label} range")
    if ints[0] < minimum:
        raise ValueError(f"{label} must be >= {minimum}")
    return ints


def full_wave_diameters(lam: float, n_cavity: float, m_range: Iterable[int]) -> list[float]:
    """Diameters ``m * lam / n`` where the side channel is off-resonance."""
    return [m * lam / n_cavity for m in _integers(m_range, 1, "m")]


def half_wave_diameters(lam: float, n_cavity: float, k_range: Iterable[int]) -> list[float]:
    """Diameters ``(k + 1/2) * lam / n`` where side leakage peaks."""
    return [(k + 0.5) * lam / n_cavity for k in _integers(k_range, 0, "k")]


def default_design(**overrides) -> PillarDesign:
    return PillarDesign(**overrides)


# --- plain-text configuration -------------------------------------------------

_FLOAT_KEYS = {
    "lambda_um",
    "d_cavity_um",
    "n_high",
    "n_low",
    "n_cavity",
    "n_background",
    "n_substrate",
    "f_peak",
    "temperature_k",
    "gamma0_uev",
    "w_bulk",
}


def load_config(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Numeric keys are converted to float, ``*_range`` keys accept ``a:b``
    (inclusive) or comma lists, everything else stays a string.
    """
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lower()
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key.endswith("range") or key in {"n_top", "n_bottom", "m"}:
                out[key] = parse_range(value)
            else:
                out[key] = value
    return out


def parse_range(text: str) -> list[float]:
    """``"9:13"`` -> [9, 10, ..., 13]; ``"9,11,13"`` -> [9, 11, 13]; ``"35.5"`` -> [35.5]."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            start, stop, step = parts[0], parts[1], 1.0
        elif len(parts) == 3:
            start, stop, step = parts
        else:
            raise ValueError(f"bad range {text!r}")
        if step <= 0:
            raise ValueError(f"bad range step in {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + k * step for k in range(max(n, 0))]
    else:
        values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError(f"empty range {text!r}")
    return [int(v) if float(v).is_integer() else v for v in values]


def stack_from_indices(
    indices: Sequence[float],
    thicknesses: Sequence[float],
    ambient: float = 1.0,
    substrate: float = 1.0,
) -> LayerStack:
    """Convenience constructor for arbitrary real-index film stacks."""
    if len(indices) != len(thicknesses):
        raise ValueError("indices and thicknesses differ in length")
    layers = tuple(
        Layer(Material(f"n={n:.6g}", float(n)), float(d)) for n, d in zip(indices, thicknesses)
    )
    return LayerStack(layers, Material(f"n={ambient:.6g}", ambient), Material(f"n={substrate:.6g}", substrate))
