"""
A photon counter built from two-level absorbers
===============================================

A light pulse passes a row of N absorbers.  Each one may pick up a photon.
Keeping N g^2 tau^2 fixed while N grows, the count statistics become
binomial with click probability 1 - exp(-zeta).
"""

import math

import numpy as np

from stinespring.detectors import (
    PhotonCounterConfig,
    collective_commutator_defect,
    exact_count_distribution,
    photocount_distribution,
    photodetect_exact,
)

n, zeta = 3, 1.0
psi = np.zeros(n + 1)
psi[n] = 1.0
target = photocount_distribution(n, zeta)
print("binomial target:", np.round(target, 4))

for N in (3, 6, 9, 12):
    cfg = PhotonCounterConfig(N=N, g=1.0, tau=math.sqrt(zeta / N), cutoff=n)
    p = exact_count_distribution(photodetect_exact(psi, cfg))[: n + 1]
    tv = 0.5 * np.abs(p - target).sum()
    print(f"N={N:2d}  exact={np.round(p, 4)}  TV={tv:.4f}  2*zeta/N={2 * zeta / N:.4f}")

# The collective excitation behaves like a bosonic mode only on low sectors.
for N in (4, 16):
    d = collective_commutator_defect(N, 1.0, math.sqrt(zeta / N), max_count=4)
    print(f"N={N:2d}  |[B, B^dag] - 1| on sectors 0..4:", np.round(d, 4))
