"""Regenerate the pilot channel fixtures: ``python tests/fixtures/make_fixtures.py``.

Each file holds a Lorentzian vertical mode on a flat side floor. Peak rates
(in Gamma_0 units) are exact decimals picked so the on-resonance factors
round to the published two-decimal values:

    pilot_a: beta = 4/5.02,  eta = 3.468/4, xi = 3.468/5.02  -> 0.80 / 0.87 / 0.69
    pilot_b: beta = 4/5.18,  eta = 3.09/4,  xi = 3.09/5.18   -> 0.77 / 0.77 / 0.60
"""

from pathlib import Path

import numpy as np

from micropillar.channels import ChannelSpectra, write_channels_csv
from micropillar.tmm import HC_EV_UM

HERE = Path(__file__).parent
PILOTS = {
    "pilot_a": {"top": 3.468, "bottom": 0.532, "side": 1.02},
    "pilot_b": {"top": 3.09, "bottom": 0.91, "side": 1.18},
}
KAPPA_MEV = 2.5
HALF_SPAN_MEV = 16.0
N_POINTS = 641  # odd: the resonance sits on a grid point


def pilot_spectra(top, bottom, side, lambda_res=1.3):
    k = np.arange(N_POINTS) - N_POINTS // 2
    step = 2 * HALF_SPAN_MEV / (N_POINTS - 1)
    shape = 1.0 / (1.0 + (k * step / (KAPPA_MEV / 2)) ** 2)
    energy = HC_EV_UM / lambda_res + k * step * 1e-3
    lam = HC_EV_UM / energy
    lam[N_POINTS // 2] = lambda_res
    order = np.argsort(lam)
    return ChannelSpectra(lam[order], (top * shape)[order], (bottom * shape)[order], np.full(N_POINTS, side))


if __name__ == "__main__":
    for name, rates in PILOTS.items():
        write_channels_csv(pilot_spectra(**rates), HERE / f"{name}.csv")
