"""
Feedback on a laser beam
========================

A homodyne photocurrent is fed back onto the amplitude of the same beam
through a flat filter with a delay.  Inside the loop the photocurrent can
dip below shot noise; outside the loop it never does.
"""
import numpy as np

from inloop.laser import DetectorParams, LaserLoop, laser_stability, photocurrent_psd
from inloop.spectral import FlatFilter

w = np.linspace(0.0, 2 * np.pi, 9)

# a flat filter is stable while 2 sqrt(eta) |g cos(theta)| < 1
for g in (0.45, 0.55):
    rep = laser_stability(LaserLoop(FlatFilter(g, 1.0), DetectorParams(1.0, 0.0)))
    print(f"g = {g:.2f}  stable = {rep.stable}  margin = {rep.margin:.3f}")

for g in (-0.45, 0.0, 0.45):
    lp = LaserLoop(FlatFilter(g, 1.0), DetectorParams(1.0, 0.0))
    print(f"g = {g:+.2f}  S_i =", np.round(photocurrent_psd(w, lp), 4))

# negative gain squashes the in-loop photocurrent at multiples of 2 pi / delay
