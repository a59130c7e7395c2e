"""
Homodyne detection as photon counting
=====================================

Mixing the signal with a strong coherent oscillator on a beam splitter and
counting both ports measures a field quadrature.  The half-difference D of
the counts, rescaled by sqrt(2)/|beta|, samples the quadrature wavefunction.
"""

import math

import numpy as np

from stinespring.detectors import (
    HomodyneConfig,
    homodyne_amplitudes_exact,
    homodyne_matrix_element_asymptotic,
    quadrature_wavefunction,
)

beta = 8.0
psi = np.array([0.0, 1.0])  # a single photon
F = homodyne_amplitudes_exact(psi, beta, 170)
P = np.abs(F) ** 2
na, nb = np.indices(P.shape)
N = na + nb
D = (na - nb) / 2
print("total probability:", P.sum())
print("mean N:", (N * P).sum(), " var N:", (N**2 * P).sum() - (N * P).sum() ** 2)

# Exact vs large-oscillator amplitude at a few outcomes.
cfg = HomodyneConfig(beta)
for n_tot, d in ((64, 0), (64, 4), (60, -3)):
    exact = F[int(n_tot / 2 + d), int(n_tot / 2 - d)]
    approx, warn = homodyne_matrix_element_asymptotic(psi, cfg, n_tot, d)
    print(f"N={n_tot} D={d:+}: exact={exact.real:+.5f} asymptotic={approx.real:+.5f} warn={warn}")

# The D marginal against the single-photon quadrature density.
# D steps by 1/2 once odd and even N are pooled, so each bin spans sqrt(2)/(2|beta|) in x.
for d in (0, 2, 4, 6):
    pD = P[D == d].sum()
    x = d * math.sqrt(2) / beta
    dens = abs(quadrature_wavefunction(psi, 0.0, x)) ** 2 * math.sqrt(2) / (2 * beta)
    print(f"D={d}: p(D)={pD:.5f}  |psi(x)|^2 dx={dens:.5f}")
