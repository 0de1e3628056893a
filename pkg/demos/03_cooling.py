"""
Cooling a mechanical mode below the sideband limit
==================================================

With an unresolved-sideband cavity the Stokes scattering rate limits
cavity cooling.  A feedback loop that cancels the Stokes process removes
that limit; the loop gain needed for cancellation sits inside the stable
window.
"""
from inloop.cavity import CavityLoop
from inloop.laser import DetectorParams, LaserLoop
from inloop.optomech import OmLoop, bare_rates, phonon_steady, sideband_occupation, suppress_antistokes
from inloop.spectral import CavityParams, FlatFilter, MechanicalParams

cav = CavityParams(1.0, 0.0, 0.0, 1.0)
cl = CavityLoop(cav, LaserLoop(FlatFilter(0.0, 0.1), DetectorParams(1.0, 0.0)), "reflection")
om = OmLoop(cl, MechanicalParams(1.0, 1e-4, 131.0, G=0.2))

bare = bare_rates(om)
print(f"no feedback:  A+ = {bare.A_plus:.4f}  A- = {bare.A_minus:.4f}  n = {sideband_occupation(om):.4f}")

res = suppress_antistokes(om)
print(f"suppression:  A+ = {res.rates.A_plus:.2e}  A- = {res.rates.A_minus:.4f}  "
      f"gain = {res.gain:.4f} in {tuple(round(x, 4) for x in res.window)}")
print(f"phonon number with suppression: {phonon_steady(om, 'suppression_optimal'):.4f}")
