"""
Feedback without collapse
=========================

A protocol that measures, then acts on the result, compiles into one big
unitary: measurements become copies into outcome registers and feedback
becomes gates controlled by those registers.  Sampling trajectories with
collapse gives the same statistics.
"""

import numpy as np

from stinespring.hilbert import RegisterLayout, partial_trace
from stinespring.protocol import (
    GATES,
    Condition,
    Feedback,
    Measure,
    ProtocolSpec,
    Unitary,
    compiled_unitary,
    run_dilated,
    sample_outcomes,
)

# Active reset: measure Z and flip the qubit back if it was found in |1>.
spec = ProtocolSpec(
    RegisterLayout.of(("q", 2)),
    (
        Unitary(GATES["H"], ("q",)),
        Measure(GATES["Z"], ("q",), "M"),
        Feedback(Condition.outcome("M", 1), GATES["X"], ("q",)),
        Measure(GATES["Z"], ("q",), "check"),
    ),
)
print("layout:", spec.layout.labels, spec.layout.dims)
print("compiled unitary is unitary:", compiled_unitary(spec).is_unitary())

run = run_dilated(spec, np.array([1.0, 0.0]))
print("joint outcome distribution (M, check):")
for key, p in sorted(run.joint_outcomes().items()):
    print("  ", key, round(p, 6))
print("final qubit state:\n", np.round(partial_trace(run.final_state, ["q"]).data.real, 6))

# Trajectories with eager collapse, one Philox stream per (seed, shot, step).
rec = sample_outcomes(spec, np.array([1.0, 0.0]), seed=11, shots=5000)
print("sampled P(M=1):", rec[:, 0].mean(), " P(check=1):", rec[:, 1].mean())
