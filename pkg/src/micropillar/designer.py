"""Design-space scan, ranking, reports and plot-ready figure tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channels import (
    DEFAULT_F_PEAK,
    ChannelSpectra,
    NoResonanceError,
    PurcellCurve,
    beta_atom,
    ingest_channels,
    purcell_lorentzian,
    synthesize_channels,
)
from .geometry import AIR, BCB, GAAS, PillarDesign, full_wave_diameters
from .phonon import PhononParams, build_bulk_spectrum, detuning_grid, phonon_figures
from .sidemode import SideResonator, gamma_side_model, side_resonance_wavelengths
from .tmm import HC_EV_UM, transmissivity_ratio_map, write_ratio_map_csv

__all__ = [
    "ScanConfig",
    "FigureOfMerit",
    "RANKINGS",
    "FIGURE_IDS",
    "evaluate_design",
    "evaluate_channels",
    "scan",
    "rank",
    "report",
    "read_report",
    "figure_data",
]

SCHEMA = "micropillar.scan/1"
CHAIN_LENGTH = 16
BACKGROUNDS = {"air": AIR, "bcb": BCB}


@dataclass(frozen=True)
class ScanConfig:
    lambda_um: float = 1.3
    m_range: tuple[int, ...] = (5,)
    diameters: tuple[float, ...] = ()  # explicit diameters override m_range
    n_top: tuple[float, ...] = (9, 11, 13)
    n_bottom: tuple[float, ...] = (35.5,)
    background: str = "air"
    f_peak: float = DEFAULT_F_PEAK
    temperature_k: float = 4.0
    gamma0_uev: float = 0.5
    w_bulk: float = 0.9
    channels_path: str | None = None
    rank: str = "eps-i"

    def __post_init__(self) -> None:
        for name in ("m_range", "diameters", "n_top", "n_bottom"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.background not in BACKGROUNDS:
            raise ValueError(f"background must be one of {sorted(BACKGROUNDS)}")
        if self.rank not in RANKINGS:
            raise ValueError(f"rank must be one of {sorted(RANKINGS)}")
        if not self.n_top or not self.n_bottom or not (self.m_range or self.diameters):
            raise ValueError("empty design range")
        if not self.lambda_um > 0:
            raise ValueError("lambda_um must be > 0")
        if not 0 < self.w_bulk <= 1:
            raise ValueError("w_bulk must lie in (0, 1]")

    @classmethod
    def from_mapping(cls, data: dict) -> ScanConfig:
        """Build from a ``load_config`` dictionary; unknown keys are rejected."""
        alias = {"m": "m_range", "d_cavity_um": "diameters", "diameter_range": "diameters"}
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in data.items():
            key = alias.get(key, key)
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if key in ("m_range", "diameters", "n_top", "n_bottom") and not isinstance(value, (list, tuple)):
                value = (value,)
            kw[key] = value
        return cls(**kw)

    def diameter_list(self) -> list[tuple[int | None, float]]:
        if self.diameters:
            return [(None, float(d)) for d in sorted(set(self.diameters))]
        n = GAAS.index(self.lambda_um)
        ms = sorted({int(m) for m in self.m_range})
        return list(zip(ms, full_wave_diameters(self.lambda_um, n, ms)))

    def designs(self) -> list[tuple[int | None, PillarDesign]]:
        out = []
        bg = BACKGROUNDS[self.background]
        for m, d in self.diameter_list():
            for nb in sorted(set(self.n_bottom)):
                for nt in sorted(set(self.n_top)):
                    out.append((m, PillarDesign(self.lambda_um, d, nt, nb, background=bg)))
        return out

    def phonon_params(self) -> PhononParams:
        return PhononParams(temperature=self.temperature_k)

    def echo(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class FigureOfMerit:
    """One row of the figure-of-merit table; metrics are None when the design failed."""

    label: str
    d_cavity: float
    m: int | None
    n_top: float
    n_bottom: float
    background: str
    provenance: str
    status: str = "ok"
    lambda_res: float | None = None
    Q: float | None = None
    kappa: float | None = None
    F_P_peak: float | None = None
    gamma_top: float | None = None
    beta: float | None = None
    eta: float | None = None
    xi: float | None = None
    W_4pi: float | None = None
    W_top: float | None = None
    funneling: float | None = None
    xi_phonon: float | None = None
    epsilon: float | None = None
    I: float | None = None
    epsilon_times_I: float | None = None
    chain16: float | None = None
    psb_suppression: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def check(self, tol: float = 1e-12) -> list[str]:
        """Row-level identities; returns the names of violated ones."""
        if not self.ok:
            return []
        bad = []
        if abs(self.beta * self.eta - self.xi) > tol:
            bad.append("xi = beta * eta")
        if abs(self.F_P_peak * self.xi - self.gamma_top) > tol * max(1.0, self.gamma_top):
            bad.append("F_P * xi = gamma_top")
        if abs(self.xi * self.xi_phonon - self.epsilon) > tol:
            bad.append("epsilon = xi * xi_phonon")
        if abs(self.W_top**2 - self.I) > tol:
            bad.append("I = W_top^2")
        if abs(self.epsilon * self.I - self.epsilon_times_I) > tol:
            bad.append("epsilon_times_I")
        for name in ("beta", "eta", "xi", "W_4pi", "W_top", "epsilon", "I"):
            v = getattr(self, name)
            if not -tol <= v <= 1 + tol:
                bad.append(f"{name} in [0, 1]")
        return bad


COLUMNS = tuple(f.name for f in fields(FigureOfMerit))
_INT_COLUMNS = {"m"}
_STR_COLUMNS = {"label", "background", "provenance", "status"}


def _design_row(m, design: PillarDesign, provenance: str) -> FigureOfMerit:
    return FigureOfMerit(
        label=design.label,
        d_cavity=design.d_cavity,
        m=m,
        n_top=float(design.n_top),
        n_bottom=float(design.n_bottom),
        background=design.background.name.lower(),
        provenance=provenance,
    )


def _fwhm_mev(ch: ChannelSpectra, i_peak: int) -> float | None:
    g = ch.gamma_cavity
    e = ch.energy
    half = g[i_peak] / 2.0
    lo = np.nonzero(g[:i_peak] < half)[0]
    hi = np.nonzero(g[i_peak:] < half)[0]
    if g[i_peak] <= 0 or lo.size == 0 or hi.size == 0:
        return None
    a, b = lo[-1], i_peak + hi[0]
    e_a = np.interp(half, [g[a], g[a + 1]], [e[a], e[a + 1]])
    e_b = np.interp(half, [g[b], g[b - 1]], [e[b], e[b - 1]])
    return abs(e_a - e_b) * 1e3


def evaluate_channels(row: FigureOfMerit, ch: ChannelSpectra, cfg: ScanConfig) -> FigureOfMerit:
    """Fill ``row`` from channel spectra: efficiency factors on resonance plus phonon metrics."""
    if "lambda_res" in ch.meta:
        lam = float(ch.meta["lambda_res"])
    else:
        lam = float(ch.wavelength[int(np.argmax(ch.gamma_cavity))])
    top, bottom, side = ch.at(lam)
    total = top + bottom + side
    cavity = top + bottom
    if total <= 0 or cavity <= 0:
        row.status = "undefined efficiency: no cavity emission"
        return row
    row.lambda_res = lam
    if "kappa_mev" in ch.meta:
        row.kappa = float(ch.meta["kappa_mev"])
    else:
        row.kappa = _fwhm_mev(ch, int(np.argmax(ch.gamma_cavity)))
    row.Q = (HC_EV_UM / lam) / (row.kappa * 1e-3) if row.kappa else None
    row.F_P_peak = total
    row.gamma_top = top
    row.beta = cavity / total
    row.eta = top / cavity
    row.xi = row.beta * row.eta
    bulk = build_bulk_spectrum(cfg.gamma0_uev, cfg.w_bulk, cfg.phonon_params(), detuning_grid(cfg.gamma0_uev))
    figs, _ = phonon_figures(ch, bulk, e_zpl=HC_EV_UM / lam)
    row.W_4pi = figs.w_4pi
    row.W_top = figs.w_top
    row.funneling = figs.funneling
    row.xi_phonon = figs.xi_phonon
    row.epsilon = row.xi * figs.xi_phonon
    row.I = row.W_top**2
    row.epsilon_times_I = row.epsilon * row.I
    row.chain16 = row.epsilon_times_I**CHAIN_LENGTH
    row.psb_suppression = figs.psb_suppression
    return row


def evaluate_design(design: PillarDesign, cfg: ScanConfig | None = None, m: int | None = None) -> FigureOfMerit:
    """Full model pipeline for one design; failures are recorded in the row."""
    cfg = cfg or ScanConfig()
    row = _design_row(m, design, "model")
    try:
        ch = synthesize_channels(design, cfg.f_peak)
    except NoResonanceError as exc:
        row.status = f"no resonance: {exc}"
        return row
    except (ValueError, ArithmeticError) as exc:
        row.status = f"failed: {exc}"
        return row
    try:
        return evaluate_channels(row, ch, cfg)
    except (ValueError, ArithmeticError) as exc:
        row.status = f"failed: {exc}"
        return row


def _sort_key(rank_by: str):
    def key(r: FigureOfMerit):
        tail = (r.n_top, r.n_bottom, r.d_cavity)
        if not r.ok:
            return (1, 0.0, 0.0) + tail
        if rank_by == "xi":
            return (0, -r.xi, -(r.kappa or 0.0)) + tail
        if rank_by == "bandwidth":
            return (0, -(r.kappa or 0.0), -r.epsilon_times_I) + tail
        return (0, -r.epsilon_times_I, -(r.kappa or 0.0)) + tail

    return key


RANKINGS = ("eps-i", "xi", "bandwidth")


def rank(rows: Iterable[FigureOfMerit], by: str = "eps-i") -> list[FigureOfMerit]:
    """Best first; failed rows trail in a fixed order."""
    if by not in RANKINGS:
        raise ValueError(f"unknown ranking {by!r}")
    return sorted(rows, key=_sort_key(by))


def scan(cfg: ScanConfig) -> list[FigureOfMerit]:
    if cfg.channels_path:
        # external spectra belong to one structure; the config only labels it
        designs = cfg.designs()
        if len(designs) != 1:
            raise ValueError("ingested channel spectra describe exactly one design; narrow the ranges")
        ch = ingest_channels(cfg.channels_path)
        m, design = designs[0]
        row = _design_row(m, design, ch.provenance)
        try:
            rows = [evaluate_channels(row, ch, cfg)]
        except (ValueError, ArithmeticError) as exc:
            row.status = f"failed: {exc}"
            rows = [row]
    else:
        rows = [evaluate_design(design, cfg, m) for m, design in cfg.designs()]
    return rank(rows, cfg.rank)


# --- reports --------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(name: str, text: str):
    if name in _STR_COLUMNS:
        return text
    if text == "":
        return None
    if name in _INT_COLUMNS:
        return int(text)
    return float(text)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def report(rows: Sequence[FigureOfMerit], path=None, fmt: str = "csv", config: ScanConfig | None = None) -> str:
    """Serialize rows; writes to ``path`` when given and returns the text.

    CSV carries the config echo as ``#`` comment lines ahead of the header.
    """
    if fmt == "json":
        doc = {
            "schema": SCHEMA,
            "config": config.echo() if config else None,
            "columns": list(COLUMNS),
            "rows": [{c: _plain(getattr(r, c)) for c in COLUMNS} for r in rows],
        }
        text = json.dumps(doc, indent=1) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        if config is not None:
            buf.write(f"# schema={SCHEMA}\n")
            buf.write("# config=" + json.dumps(config.echo(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(_plain(getattr(r, c))) for c in COLUMNS])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_report(path) -> list[FigureOfMerit]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
        out = []
        for d in doc["rows"]:
            d = {k: (float(v) if v in ("inf", "-inf") else v) for k, v in d.items()}
            out.append(FigureOfMerit(**d))
        return out
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError("report columns do not match this version")
    return [FigureOfMerit(**{c: _parse_cell(c, r[c]) for c in COLUMNS}) for r in reader]


# --- figure tables --------------------------------------------------------------

FIGURE_IDS = ("fig1c", "fig2hi", "fig3g", "fig4cde", "fig5abc")


def _write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> list[list]:
    rows = [list(r) for r in rows]
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(_plain(v)) for v in r])
    return rows


def _fig1c(cfg: ScanConfig, design: PillarDesign, path):
    """beta and its atomic estimate across diameters; the vertical channel is
    calibrated at the design diameter and held fixed."""
    lam = design.lambda_design
    n = design.n_cavity
    n_bg = design.background.index(lam)
    ref = SideResonator(design.d_cavity, n, n_bg)
    cavity = cfg.f_peak - float(gamma_side_model(ref, np.array([lam]))[0])
    rows = []
    for m in np.linspace(5.0, 10.0, 501):
        d = m * lam / n
        side = float(gamma_side_model(SideResonator(d, n, n_bg), np.array([lam]))[0])
        fp = cavity + side
        b = cavity / fp
        ba = beta_atom(fp)
        rows.append((d, fp, b, ba, abs(b - ba)))
    return ("d_cavity_um", "purcell", "beta", "beta_atom", "discrepancy"), rows


def _fig2hi(cfg: ScanConfig, design: PillarDesign, path):
    """Leaky side-resonance positions for air and BCB backgrounds."""
    lam = design.lambda_design
    n = design.n_cavity
    lo, hi = 0.8 * lam, 1.2 * lam
    rows = []
    for m in np.arange(5.0, 10.0 + 1e-9, 0.05):
        d = m * lam / n
        for bg in (AIR, BCB):
            res = SideResonator(d, n, bg.index(lam))
            k_max = int(n * d / lo)
            for k, lr in zip(range(k_max + 1), side_resonance_wavelengths(res, range(k_max + 1))):
                if lo <= lr <= hi:
                    rows.append((d, lr, bg.index(lam), k))
    return ("d_cavity_um", "lambda_resonance_um", "n_background", "k"), rows


def _fig4cde(cfg: ScanConfig, design: PillarDesign, path):
    """Purcell curves, emission spectra and the top-collection filter versus detuning."""
    ch = synthesize_channels(design, cfg.f_peak)
    lam = float(ch.meta["lambda_res"])
    e0 = HC_EV_UM / lam
    kappa = float(ch.meta["kappa_mev"])
    atom = PurcellCurve.from_peak(cfg.f_peak, kappa, cfg.gamma0_uev, 1.0, e0)
    bulk = build_bulk_spectrum(cfg.gamma0_uev, cfg.w_bulk, cfg.phonon_params(), detuning_grid(cfg.gamma0_uev))
    _, spectra = phonon_figures(ch, bulk, e_zpl=e0)
    d = bulk.detuning
    xi = ch.xi_at_energy(e0 + d * 1e-3)
    fp = np.interp(e0 + d * 1e-3, ch.energy[::-1], ch.purcell[::-1])
    rows = zip(d, fp, purcell_lorentzian(atom, d), bulk.density, spectra["4pi"].density, spectra["top"].density, xi)
    return ("detuning_meV", "F_P", "F_P_atom", "S_bulk", "S_4pi", "S_top", "xi"), rows


def figure_data(figure_id: str, cfg: ScanConfig | None = None, design: PillarDesign | None = None,
                results: Sequence[FigureOfMerit] | None = None, path=None,
                n_top_range: Sequence[float] | None = None, n_bottom_range: Sequence[float] | None = None):
    """Plot-ready table for one figure id; returns (columns, rows) and optionally writes CSV.

    fig1c   d_cavity_um, purcell, beta, beta_atom, discrepancy
    fig2hi  d_cavity_um, lambda_resonance_um, n_background, k
    fig3g   T_top / T_bottom matrix (rows N_bottom, columns N_top)
    fig4cde detuning_meV, F_P, F_P_atom, S_bulk, S_4pi, S_top, xi
    fig5abc m, d_cavity_um, n_top, n_bottom, beta, eta, xi, kappa_meV
    """
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")
    cfg = cfg or ScanConfig()
    if design is None:
        design = cfg.designs()[-1][1]
    if figure_id == "fig3g":
        tops = n_top_range or list(range(1, 41))
        bottoms = n_bottom_range or [n + 0.5 for n in range(10, 41)]
        rmap = transmissivity_ratio_map(tops, bottoms, design=design)
        if path is not None:
            write_ratio_map_csv(rmap, path)
        cols = ("n_bottom\\n_top",) + tuple(f"{n:g}" for n in rmap.n_top)
        return cols, [[nb, *row] for nb, row in zip(rmap.n_bottom, rmap.ratio.tolist())]
    if figure_id == "fig5abc":
        rows = results if results is not None else scan(cfg)
        data = sorted((r for r in rows if r.ok), key=lambda r: (r.n_top, r.n_bottom, r.d_cavity))
        cols = ("m", "d_cavity_um", "n_top", "n_bottom", "beta", "eta", "xi", "kappa_meV")
        table = [(r.m, r.d_cavity, r.n_top, r.n_bottom, r.beta, r.eta, r.xi, r.kappa) for r in data]
        return cols, _write_table(path, cols, table)
    builder = {"fig1c": _fig1c, "fig2hi": _fig2hi, "fig4cde": _fig4cde}[figure_id]
    cols, rows = builder(cfg, design, path)
    return cols, _write_table(path, cols, rows)
