"""
Feedback through a detuned cavity
=================================

Placing a cavity inside the loop filters the fed-back noise.  The loop
reshapes the cavity response into an effective Lorentzian with a modified
linewidth and detuning, while the unused output stays above shot noise.
"""
import numpy as np

from inloop.cavity import CavityLoop, effective_params, is_stable, outofloop_psd, photocurrent_psd_cavity
from inloop.laser import DetectorParams, LaserLoop
from inloop.spectral import CavityParams, FlatFilter

cav = CavityParams.symmetric(1.0, 10.0)
w = np.linspace(8.0, 12.0, 9)

for g in (-1.0, 0.0, 1.0):
    cl = CavityLoop(cav, LaserLoop(FlatFilter(g, 0.1), DetectorParams(1.0, 0.0)), "transmission")
    eff = effective_params(cl)
    print(f"g = {g:+.1f}  stable = {is_stable(cl)}  kappa_eff = {eff.kappa_eff:.4f}  "
          f"delta_eff = {eff.delta_eff:.4f}")
    print("   S_i   ", np.round(photocurrent_psd_cavity(w, cl), 4))
    print("   S_out ", np.round(outofloop_psd(w, 0.0, cl), 4))
