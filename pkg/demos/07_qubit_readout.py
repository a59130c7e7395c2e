"""
Reading out a qubit with light
==============================

Fluorescence: only |g> scatters photons, so "no clicks" means |e> unless
every photon was missed.  Dispersive: each qubit state rotates a coherent
probe's phase, and the sign of the momentum quadrature tells them apart.
"""

import math

from stinespring.detectors import DispersiveConfig, FluorescenceConfig, dispersive_readout, fluorescence_measure

c_g = c_e = 1 / math.sqrt(2)
for n in (2, 8, 32):
    r = fluorescence_measure(c_g, c_e, FluorescenceConfig(p=0.5, n=n))
    print(f"fluorescence n={n:2d}: p_false_negative={r.p_false_negative:.3e}  dark g weight={r.dark_g_weight:.3e}")

for alpha in (0.5, 1.0, 2.0, 3.0):
    r = dispersive_readout(0.6, 0.8, DispersiveConfig(alpha=alpha, theta=math.pi / 2))
    print(f"dispersive alpha={alpha}: p_error={r.p_error:.3e}  P(g)={r.p_outcome[0]:.4f}")
