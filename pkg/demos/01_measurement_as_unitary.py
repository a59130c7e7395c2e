"""
A measurement is a unitary
==========================

Measuring an observable copies its eigenvalue label into a fresh register.
That copy is a unitary on system plus register, and Born probabilities are
just the register populations afterwards.
"""

import numpy as np

from stinespring.hilbert import Ket, RegisterLayout, apply_local, partial_trace
from stinespring.spectral import PAULI, measurement_unitary, spectral_decompose

# Measuring Z on a qubit: the dilation is a CNOT with the system as control.
sd = spectral_decompose(PAULI["Z"])
mu = measurement_unitary(sd)
print("eigenvalues (outcome order):", sd.eigenvalues)
print("U for Z:\n", mu.unitary.data.real.astype(int))

# Now an observable with a degenerate eigenvalue on a qutrit.
O = np.diag([2.0, 2.0, -1.0])
sd = spectral_decompose(O)
mu = measurement_unitary(sd)
print("\nqutrit observable has", sd.n_outcomes, "outcomes")

psi = np.array([0.6, 0.0, 0.8])
layout = mu.unitary.layout
start = np.kron(psi, np.eye(sd.n_outcomes)[0])
out = Ket(layout, mu.unitary.data @ start)

# Born rule read off the register...
reg = partial_trace(out, ["M"])
print("register populations:", np.real(np.diag(reg.data)))
# ...agrees with tr(Pi_m rho).
print("tr(Pi_m rho):        ", [float(np.real(psi.conj() @ P @ psi)) for P in sd.projectors])

# The reduced system state has lost its coherence between outcome sectors.
print("system after measurement:\n", np.round(partial_trace(out, ["sys"]).data.real, 3))
