import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from micropillar.geometry import GAAS, Layer, LayerStack, Material, PillarDesign, build_stack, stack_from_indices
from micropillar.tmm import (
    HC_EV_UM,
    layer_matrix,
    reflectivity_spectrum,
    read_spectrum_csv,
    stack_response,
    stop_band,
    cavity_resonance,
    mirror_transmission,
    transmissivity_ratio_map,
    write_ratio_map_csv,
    write_spectrum_csv,
)


def dbr_reflectivity_closed_form(n0, ns, nh, nl, pairs):
    # quarter-wave admittance transformation: each layer maps Y -> n_layer^2 / Y
    y = ns * (nh / nl) ** (2 * pairs)
    return ((n0 - y) / (n0 + y)) ** 2


def quarter_wave_stack(nh, nl, pairs, lam0, n0=1.0, ns=1.5):
    idx, thk = [], []
    for _ in range(pairs):
        idx += [nh, nl]
        thk += [lam0 / (4 * nh), lam0 / (4 * nl)]
    return stack_from_indices(idx, thk, n0, ns)


random_stacks = st.lists(
    st.tuples(st.floats(1.0, 4.0), st.floats(0.01, 0.6)), min_size=0, max_size=12
).map(lambda layers: stack_from_indices([n for n, _ in layers], [d for _, d in layers], 1.0, 3.0))


def test_quarter_and_half_wave_matrices():
    n = 2.5
    q = layer_matrix(Layer(Material("x", n), 1.3 / (4 * n)), 1.3)
    np.testing.assert_allclose(q, [[0, 1j / n], [1j * n, 0]], atol=1e-12)
    h = layer_matrix(Layer(Material("x", n), 1.3 / (2 * n)), 1.3)
    np.testing.assert_allclose(h, -np.eye(2), atol=1e-12)
    z = layer_matrix(Layer(GAAS, 1e-15), 1.3)
    np.testing.assert_allclose(z, np.eye(2), atol=1e-12)
    with pytest.raises(ValueError):
        layer_matrix(Layer(GAAS, 0.1), 0.0)


@given(st.floats(1.0, 4.0), st.floats(1e-3, 2.0), st.floats(0.3, 3.0))
def test_unimodular(n, d, lam):
    m = layer_matrix(Layer(Material("x", n), d), lam)
    assert abs(np.linalg.det(m)) == pytest.approx(1.0, rel=1e-10)


def test_single_interface_fresnel():
    s = LayerStack((), Material("air", 1.0), GAAS)
    assert stack_response(s, 1.3).R == pytest.approx(((3.467 - 1) / (3.467 + 1)) ** 2, rel=1e-12)
    assert stack_response(s, 1.3).R == pytest.approx(0.3050, abs=5e-5)


def test_empty_matched_stack():
    r = stack_response(stack_from_indices([], [], 1.5, 1.5), 1.0)
    assert r.R == pytest.approx(0.0, abs=1e-15)
    assert r.T == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("pairs", [1, 5, 20])
def test_dbr_closed_form(pairs):
    s = quarter_wave_stack(3.467, 2.96, pairs, 1.3)
    assert stack_response(s, 1.3).R == pytest.approx(
        dbr_reflectivity_closed_form(1.0, 1.5, 3.467, 2.96, pairs), rel=1e-10
    )


@settings(max_examples=60)
@given(random_stacks, st.floats(0.5, 2.0))
def test_energy_and_reciprocity(stack, lam):
    top = stack_response(stack, lam, "from_top")
    bot = stack_response(stack, lam, "from_bottom")
    assert top.R + top.T == pytest.approx(1.0, abs=1e-8)
    assert bot.R + bot.T == pytest.approx(1.0, abs=1e-8)
    assert top.T == pytest.approx(bot.T, abs=1e-10)
    assert 0 <= top.R <= 1 + 1e-12


def test_spectrum_symmetric_in_frequency():
    lam0 = 1.3
    s = quarter_wave_stack(3.0, 1.5, 6, lam0, n0=1.2, ns=1.2)
    f = np.linspace(0.6, 0.95, 30)
    lo = reflectivity_spectrum(s, lam0 / f).R
    hi = reflectivity_spectrum(s, lam0 / (2 - f)).R
    np.testing.assert_allclose(lo, hi, atol=1e-12)


def test_stop_band_centre_and_width():
    s = build_stack(PillarDesign(n_top=20, n_bottom=20.5))
    lo, hi = stop_band(s)
    f_lo, f_hi = 1.3 / hi, 1.3 / lo
    assert (f_lo + f_hi) / 2 == pytest.approx(1.0, rel=1e-12)
    assert (f_hi - f_lo) / 2 == pytest.approx(2 / math.pi * math.asin((3.467 - 2.96) / (3.467 + 2.96)))
    lam = np.linspace(1.2, 1.4, 801)
    R = reflectivity_spectrum(build_stack(PillarDesign(n_top=20, n_bottom=0)), lam).R
    assert lam[np.argmax(R)] == pytest.approx(1.3, abs=1e-3)
    with pytest.raises(ValueError):
        reflectivity_spectrum(s, [])


def test_adding_pair_raises_reflectivity():
    prev = 0.0
    for n in range(1, 15):
        R = 1 - mirror_transmission(PillarDesign(n_top=n), "top", 1.3)
        assert R > prev
        prev = R


# frozen from the current implementation (n_AlAs = 2.96)
FROZEN_KAPPA = {9: 1.33287, 11: 0.699637, 13: 0.369786}


@pytest.mark.parametrize("n_top", [9, 11, 13])
def test_frozen_linewidths(n_top):
    mode = cavity_resonance(build_stack(PillarDesign(n_top=n_top, n_bottom=35.5)))
    assert mode.found
    assert mode.kappa == pytest.approx(FROZEN_KAPPA[n_top], rel=1e-4)
    assert mode.lambda_res == pytest.approx(1.3, abs=1e-6)
    assert mode.Q == pytest.approx((HC_EV_UM / mode.lambda_res) / (mode.kappa * 1e-3), rel=1e-3)


def test_q_grows_with_weaker_mirror():
    qs = [cavity_resonance(build_stack(PillarDesign(n_top=n, n_bottom=n + 0.5, background=GAAS))).Q for n in (4, 6, 8, 10)]
    assert all(a < b for a, b in zip(qs, qs[1:]))


def test_symmetric_cavity_transmits_fully():
    d = PillarDesign(n_top=10, n_bottom=10, background=GAAS)
    mode = cavity_resonance(build_stack(d))
    r = stack_response(build_stack(d), mode.lambda_res)
    assert r.T == pytest.approx(1.0, abs=1e-6)
    assert r.R == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("nt,nb", [(0, 0), (0, 35.5)])
def test_no_resonance(nt, nb):
    res = cavity_resonance(build_stack(PillarDesign(n_top=nt, n_bottom=nb)))
    assert not res.found
    assert res.reason


def test_ratio_map_structure(tmp_path):
    m = transmissivity_ratio_map([5, 13, 20], [15.5, 35.5])
    assert m.classify(13, 35.5) == "upward"
    row = m.ratio[0]
    assert row[0] > 1 > row[-1]  # fixed 15.5 bottom: crosses 1 as the top grows
    p = tmp_path / "map.csv"
    write_ratio_map_csv(m, p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[1:] == ["5", "13", "20"]
    assert [l.split(",")[0] for l in lines[1:]] == ["15.5", "35.5"]


def test_spectrum_csv_round_trip(tmp_path):
    s = build_stack(PillarDesign(n_top=3, n_bottom=4.5))
    spec = reflectivity_spectrum(s, np.linspace(1.2, 1.4, 11))
    p = tmp_path / "spec.csv"
    write_spectrum_csv(spec, p)
    back = read_spectrum_csv(p)
    assert np.array_equal(back["R"], spec.R)
    assert np.array_equal(back["wavelength_um"], spec.wavelength)
