import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants
from scipy.special import dawsn

from micropillar.channels import ChannelSpectra, PurcellCurve, channels_from_curve, synthesize_channels
from micropillar.geometry import PillarDesign, full_wave_diameters
from micropillar.phonon import (
    EmissionSpectrum,
    PhononParams,
    apply_cavity,
    apply_top_filter,
    build_bulk_spectrum,
    detuning_grid,
    detuning_to_omega,
    funneling,
    indistinguishability,
    phonon_dos,
    phonon_figures,
    psb_suppression,
    read_spectrum_csv,
    write_spectrum_csv,
    xi_phonon,
    zpl_weight,
)

P = PhononParams()
HBAR, KB, EV = constants.hbar, constants.k, constants.e


def dos_closed_form(omega, p=P):
    """Expand the squared bracket; each cross term integrates to a Dawson function."""
    w2 = (omega / (2 * p.c_l)) ** 2
    a = {"e": w2 * (p.L_e_xy * 1e-9) ** 2, "g": w2 * (p.L_g_xy * 1e-9) ** 2}
    b = {"e": w2 * (p.L_e_z * 1e-9) ** 2, "g": w2 * (p.L_g_z * 1e-9) ** 2}
    D = {"e": p.D_e * EV, "g": -p.D_g * EV}

    def term(i, j):
        beta = a[i] + a[j] - b[i] - b[j]
        pref = math.exp(-(b[i] + b[j]))
        if beta == 0:
            return math.exp(-(a[i] + a[j]))
        s = math.sqrt(beta)
        return pref * dawsn(s) / s

    integral = sum(D[i] * D[j] * term(i, j) for i in "eg" for j in "eg")
    x = HBAR * omega / (KB * p.temperature)
    return HBAR / (4 * math.pi * p.density * p.c_l**5) * omega**3 / (-math.expm1(-x)) * integral


@pytest.mark.parametrize("delta_mev", [-12.0, -3.0, -1.0, -0.05, 0.05, 1.0, 3.0, 12.0])
def test_dos_matches_closed_form(delta_mev):
    w = float(detuning_to_omega(delta_mev))
    assert phonon_dos(w) == pytest.approx(dos_closed_form(w), rel=1e-8)


def test_dos_vanishes_at_zero():
    assert phonon_dos(0.0) == 0.0
    small = [phonon_dos(float(detuning_to_omega(-d))) for d in (1e-2, 1e-3, 1e-4)]
    assert small[0] > small[1] > small[2] > 0


def test_detailed_balance_and_sign():
    d = np.linspace(0.01, 15.0, 1500)
    w = detuning_to_omega(-d)  # emission side, omega > 0
    plus = phonon_dos(w)
    minus = phonon_dos(-w)
    expected = np.exp(-HBAR * w / (KB * P.temperature))
    np.testing.assert_allclose(minus / plus, expected, rtol=1e-8)
    assert np.all(plus >= 0) and np.all(minus >= 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-14.0, -4.0), st.floats(-8.0, -1.0), st.floats(3.0, 8.0), st.floats(0.5, 3.0))
def test_dos_non_negative(de, dg, lxy, lz):
    p = PhononParams(D_e=de, D_g=dg, L_e_xy=lxy, L_g_xy=lxy * 1.2, L_e_z=lz, L_g_z=lz * 1.2)
    assert np.all(phonon_dos(detuning_to_omega(np.linspace(-15, 15, 61)), p) >= 0)


def test_params_validation():
    with pytest.raises(ValueError):
        PhononParams(temperature=0.0)


def test_grid_shape():
    g = detuning_grid()
    assert g[0] == -15.0 and g[-1] == 15.0
    assert np.all(np.diff(g) > 0)
    core = g[np.abs(g) <= 5e-3]
    assert np.allclose(np.diff(core), 2e-5)
    assert np.max(np.diff(g)) == pytest.approx(0.01, rel=1e-6)
    np.testing.assert_allclose(g, -g[::-1], atol=1e-15)


@pytest.fixture(scope="module")
def bulk():
    return build_bulk_spectrum()


def test_bulk_normalization(bulk):
    assert zpl_weight(bulk) == pytest.approx(0.9, abs=1e-3)
    pure = build_bulk_spectrum(w_target=1.0)
    assert zpl_weight(pure) == 1.0
    assert np.all(pure.psb == 0)
    with pytest.raises(ValueError):
        build_bulk_spectrum(w_target=0.0)


def test_red_side_heavier(bulk):
    d, s = bulk.detuning, bulk.psb
    red = np.trapezoid(np.where(d < 0, s, 0), d)
    blue = np.trapezoid(np.where(d > 0, s, 0), d)
    assert red > blue > 0


def test_narrow_grid_rejected():
    with pytest.raises(ValueError, match="misses"):
        build_bulk_spectrum(grid=np.linspace(-2.0, 2.0, 4001))


def test_weight_edge_cases():
    d = np.linspace(-1, 1, 11)
    z = np.zeros_like(d)
    assert zpl_weight(EmissionSpectrum(d, np.ones_like(d), z)) == 1.0
    assert zpl_weight(EmissionSpectrum(d, z, np.ones_like(d))) == 0.0
    with pytest.raises(ArithmeticError):
        zpl_weight(EmissionSpectrum(d, z, z))
    with pytest.raises(ValueError):
        EmissionSpectrum(d, -np.ones_like(d), z)


def test_cavity_identity_and_coverage(bulk):
    same = apply_cavity(bulk, lambda d: np.ones_like(d))
    assert np.array_equal(same.density, bulk.density)
    with pytest.raises(ValueError):
        apply_cavity(bulk, (np.linspace(-1, 1, 5), np.ones(5)))


# frozen outputs of the reference pipeline (default phonon parameters)
FROZEN_W_PILLAR = 0.996527858
FROZEN_W_ATOM = 0.991925094


def test_frozen_cavity_weights(bulk):
    pillar = PurcellCurve.from_peak(16.5, 0.37, 0.5, 0.3)
    atom = PurcellCurve.from_peak(16.5, 0.37, 0.5, 1.0)
    assert zpl_weight(apply_cavity(bulk, pillar)) == pytest.approx(FROZEN_W_PILLAR, abs=1e-8)
    assert zpl_weight(apply_cavity(bulk, atom)) == pytest.approx(FROZEN_W_ATOM, abs=1e-8)


def test_monotone_in_peak_and_background(bulk):
    peaks = [zpl_weight(apply_cavity(bulk, PurcellCurve.from_peak(f, 0.37, 0.5, 0.3))) for f in (2, 5, 10, 16.5, 30)]
    assert all(a < b for a, b in zip(peaks, peaks[1:]))
    floors = [zpl_weight(apply_cavity(bulk, PurcellCurve.from_peak(16.5, 0.37, 0.5, b))) for b in (1.0, 0.6, 0.3, 0.1)]
    assert all(a < b for a, b in zip(floors, floors[1:]))


def test_doubling_grid_density():
    fine = build_bulk_spectrum(grid=detuning_grid(density=2.0))
    coarse = build_bulk_spectrum()
    curve = PurcellCurve.from_peak(16.5, 0.37, 0.5, 0.3)
    ch = channels_from_curve(curve, eta=0.98)
    for spec_a, spec_b in ((coarse, fine),):
        fa, _ = phonon_figures(ch, spec_a, fp=curve)
        fb, _ = phonon_figures(ch, spec_b, fp=curve)
        for name in ("w_4pi", "w_top"):
            assert abs(getattr(fa, name) - getattr(fb, name)) < 1e-4


def _flat_xi(bulk, xi=0.8):
    lam = np.linspace(1.27, 1.33, 201)
    one = np.ones_like(lam)
    return ChannelSpectra(lam, xi * one, (1 - xi) * one, 0 * one, meta={"lambda_res": 1.3})


def test_flat_filter_is_neutral(bulk):
    ch = _flat_xi(bulk, 1.0)
    top = apply_top_filter(bulk, ch)
    np.testing.assert_allclose(top.density, bulk.density, rtol=1e-12)
    ch = _flat_xi(bulk, 0.8)
    assert funneling(bulk, ch) == pytest.approx(1.0, rel=1e-12)
    top = apply_top_filter(bulk, ch)
    assert xi_phonon(top, bulk, 0.8) == pytest.approx(1.0, rel=1e-12)


def test_funneling_drops_with_narrower_cavity(bulk):
    values = []
    for kappa in (1.31, 0.69, 0.37, 0.1):
        curve = PurcellCurve.from_peak(16.5, kappa, 0.5, 0.3)
        ch = channels_from_curve(curve, eta=0.99)
        figs, _ = phonon_figures(ch, bulk, fp=curve)
        values.append(figs.funneling)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_pipeline_ordering_and_epsilon(bulk):
    d5 = full_wave_diameters(1.3, 3.467, [5])[0]
    for nt in (9, 11, 13):
        ch = synthesize_channels(PillarDesign(d_cavity=d5, n_top=nt))
        figs, spectra = phonon_figures(ch, bulk)
        assert figs.w_top >= figs.w_4pi >= figs.w_bulk
        assert figs.epsilon <= figs.xi_res
        assert 5 <= figs.psb_suppression <= 40
        if nt == 13:
            assert 0.995 <= figs.funneling < 1.0
            assert figs.epsilon == pytest.approx(figs.xi_res, rel=0.01)


def test_indistinguishability_and_suppression():
    assert indistinguishability(1.0) == 1.0
    assert indistinguishability(0.9992) == pytest.approx(0.9984, abs=1e-4)
    assert indistinguishability(0.996) == pytest.approx(0.9920, abs=1e-4)
    with pytest.raises(ValueError):
        indistinguishability(1.2)
    assert psb_suppression(0.90, 0.9970) == pytest.approx(33.3, abs=0.05)
    assert psb_suppression(0.90, 0.98) == pytest.approx(5.0)
    assert psb_suppression(0.9, 0.9) == 1.0
    assert psb_suppression(0.9, 1.0) == math.inf


def test_spectrum_csv_round_trip(tmp_path, bulk):
    p = tmp_path / "s.csv"
    write_spectrum_csv(bulk, p)
    header = p.read_text().splitlines()[0]
    assert header.startswith("detuning_meV,density_per_meV,is_zpl")
    back = read_spectrum_csv(p)
    assert np.array_equal(back.detuning, bulk.detuning)
    assert zpl_weight(back) == pytest.approx(zpl_weight(bulk), abs=1e-12)
    # a three-column file falls back to the partition window
    lines = [",".join(l.split(",")[:3]) for l in p.read_text().splitlines()]
    p.write_text("\n".join(lines) + "\n")
    assert zpl_weight(read_spectrum_csv(p)) == pytest.approx(0.9, abs=0.01)
