"""
Random environments erase the difference between dilations
==========================================================

A measurement record stored in a big register can carry arbitrary internal
structure.  Scrambling the register with random unitaries that respect which
outcome is stored wipes that structure out.  The sampled average approaches
the exact block-dephased state like 1/sqrt(S).
"""

import numpy as np

from stinespring.decoherence import coherence_norm, dephase_exact, dephase_sampled, nonminimal_dilated
from stinespring.hilbert import trace_distance
from stinespring.spectral import PAULI, spectral_decompose

rng = np.random.default_rng(7)
rho = np.array([[1.0, 0.0], [0.0, 0.0]])
sd = spectral_decompose(PAULI["X"])
big, blocks = nonminimal_dilated(rho, sd, 3, rng)
exact = dephase_exact(big, blocks)
print("coherence between outcome blocks before:", round(coherence_norm(big, blocks), 4))
print("coherence after exact average:          ", coherence_norm(exact, blocks))

for S in (10, 100, 1000, 10000):
    mc = dephase_sampled(big, blocks, S, seed=S)
    print(f"S={S:6d}  trace distance={trace_distance(mc, exact):.4f}  5/sqrt(S)={5 / np.sqrt(S):.4f}")
