"""
Ponderomotive squeezing with feedback
=====================================

Radiation pressure squeezes the light leaving an optomechanical cavity.
Feeding one output back onto the drive lets the other output be squeezed
more deeply than without feedback, up to the single-sided bound.
"""
import numpy as np

from inloop.cavity import CavityLoop
from inloop.laser import DetectorParams, LaserLoop
from inloop.optomech import OmLoop, optimize_fixed_loop, squeeze_optimal_quadrature, squeeze_spectrum
from inloop.spectral import CavityParams, FlatFilter, MechanicalParams

cav = CavityParams.symmetric(1.0, 0.0)
cl = CavityLoop(cav, LaserLoop(FlatFilter(0.0, 0.1), DetectorParams(1.0, 0.0)), "transmission")
om = OmLoop(cl, MechanicalParams(1.0, 1e-4, 131.0, G=0.5))

w = np.linspace(0.2, 2.0, 7)
best = squeeze_optimal_quadrature(w, om)
print("omega          ", np.round(w, 3))
print("no feedback    ", np.round(best.baseline_psd, 4))
print("optimal kernel ", np.round(best.psd, 4))
print("single-sided   ", np.round(best.single_sided_psd, 4))

# one fixed loop tuned at 0.8 omega_m; away from the tuning point it can
# anti-squeeze, since a flat filter cannot follow the optimal kernel
fx = optimize_fixed_loop(0.8, om)
fixed = squeeze_spectrum(w, fx.theta_un, fx.om, "none")
print("fixed loop     ", np.round(fixed.psd, 4))
