"""Measurement protocols compiled to a single unitary on system plus registers.

A protocol is a list of instructions acting on physical registers:

* :class:`Unitary` applies a gate.
* :class:`Measure` measures an observable and writes the outcome index into a
  fresh register.
* :class:`Feedback` applies a gate when a condition on earlier outcomes holds.
* :class:`CondMeasure` measures only when a condition holds.

Feedback and conditional measurement are compiled to controlled unitaries
``U (x) P + I (x) (I - P)``, where ``P`` projects the outcome registers onto the
assignments satisfying the condition.  :func:`run_dilated` evolves the whole
dilated state unitarily and only traces at the end; :func:`sample_trajectory`
collapses after every measurement instead.  Both give the same statistics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .hilbert import (
    DEFAULT_TOL,
    PHYSICAL,
    STINESPRING,
    DensityMatrix,
    Ket,
    LayoutError,
    Operator,
    Register,
    RegisterLayout,
    apply_local,
    embed,
    partial_trace,
)
from .spectral import PAULI, SpectralDecomposition, spectral_decompose, weyl_shift

GATES = {
    **PAULI,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


@dataclass(frozen=True)
class Condition:
    """Predicate over earlier outcomes.

    ``any_of`` is a disjunction of conjunctions, each a mapping from register
    label to required outcome index.  Alternatively pass ``labels`` and an
    arbitrary ``predicate`` taking a ``{label: outcome}`` dict.
    """

    any_of: tuple[Mapping[str, int], ...] = ()
    labels: tuple[str, ...] = ()
    predicate: Callable[[Mapping[str, int]], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        clauses = tuple(dict(c) for c in self.any_of)
        object.__setattr__(self, "any_of", clauses)
        labs = list(self.labels)
        for c in clauses:
            labs += [k for k in c if k not in labs]
        object.__setattr__(self, "labels", tuple(dict.fromkeys(labs)))
        if self.predicate is None and not clauses:
            raise ValueError("condition needs any_of clauses or a predicate")

    @classmethod
    def outcome(cls, label: str, value: int) -> "Condition":
        return cls(any_of=({label: value},))

    def holds(self, outcomes: Mapping[str, int]) -> bool:
        if self.predicate is not None:
            return bool(self.predicate({k: outcomes[k] for k in self.labels}))
        return any(all(outcomes[k] == v for k, v in c.items()) for c in self.any_of)


@dataclass(frozen=True)
class Unitary:
    op: np.ndarray = field(repr=False)
    targets: tuple[str, ...]


@dataclass(frozen=True)
class Measure:
    observable: np.ndarray = field(repr=False)
    targets: tuple[str, ...]
    ss_label: str


@dataclass(frozen=True)
class Feedback:
    condition: Condition
    op: np.ndarray = field(repr=False)
    targets: tuple[str, ...]


@dataclass(frozen=True)
class CondMeasure:
    condition: Condition
    observable: np.ndarray = field(repr=False)
    targets: tuple[str, ...]
    ss_label: str


Instruction = Union[Unitary, Measure, Feedback, CondMeasure]


@dataclass(frozen=True)
class _Step:
    matrix: np.ndarray
    targets: tuple[str, ...]


@dataclass(frozen=True)
class ProtocolSpec:
    """Physical registers plus an instruction list, validated on construction."""

    physical: RegisterLayout
    instructions: tuple[Instruction, ...]
    spectra: Mapping[str, SpectralDecomposition] = field(init=False, repr=False, compare=False)
    layout: RegisterLayout = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if any(r.kind != PHYSICAL for r in self.physical.registers):
            raise LayoutError("protocol registers must all be physical")
        spectra: dict[str, SpectralDecomposition] = {}
        regs = list(self.physical.registers)
        for i, ins in enumerate(self.instructions):
            for t in ins.targets:
                if t not in self.physical:
                    raise LayoutError(f"instruction {i}: unknown physical register {t!r}")
            d = int(np.prod([self.physical.register(t).dim for t in ins.targets]))
            mat = ins.op if isinstance(ins, (Unitary, Feedback)) else ins.observable
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (d, d):
                raise LayoutError(f"instruction {i}: matrix shape {mat.shape} does not match targets")
            if isinstance(ins, (Feedback, CondMeasure)):
                missing = [lab for lab in ins.condition.labels if lab not in spectra]
                if missing:
                    raise ValueError(f"instruction {i}: condition refers to unmeasured registers {missing}")
            if isinstance(ins, (Unitary, Feedback)):
                if np.max(np.abs(mat.conj().T @ mat - np.eye(d))) > DEFAULT_TOL.structural:
                    raise ValueError(f"instruction {i}: gate is not unitary")
            else:
                if ins.ss_label in spectra or ins.ss_label in self.physical:
                    raise LayoutError(f"instruction {i}: register label {ins.ss_label!r} already used")
                sd = spectral_decompose(mat)
                spectra[ins.ss_label] = sd
                regs.append(Register(ins.ss_label, sd.n_outcomes, STINESPRING))
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "layout", RegisterLayout(tuple(regs)))

    @property
    def ss_labels(self) -> tuple[str, ...]:
        return self.layout.stinespring_labels

    # serialisation -----------------------------------------------------

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ProtocolSpec":
        physical = RegisterLayout.of(*[(r["label"], int(r["dim"])) for r in doc["registers"]])
        out = []
        for ins in doc["instructions"]:
            kind = ins["type"]
            targets = tuple(ins["targets"])
            if kind in ("unitary", "feedback"):
                op = matrix_from_json(ins["gate"])
            else:
                op = matrix_from_json(ins["observable"])
            cond = Condition(any_of=tuple(ins["condition"]["any_of"])) if "condition" in ins else None
            if kind == "unitary":
                out.append(Unitary(op, targets))
            elif kind == "measure":
                out.append(Measure(op, targets, ins["ss_label"]))
            elif kind == "feedback":
                out.append(Feedback(cond, op, targets))
            elif kind == "cond_measure":
                out.append(CondMeasure(cond, op, targets, ins["ss_label"]))
            else:
                raise ValueError(f"unknown instruction type {kind!r}")
        return cls(physical, tuple(out))


def matrix_from_json(x) -> np.ndarray:
    if isinstance(x, str):
        if x not in GATES:
            raise ValueError(f"unknown named gate {x!r}")
        return GATES[x]
    if isinstance(x, list) and all(isinstance(s, str) for s in x):
        mats = [GATES[s] for s in x]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out
    re = np.asarray(x["re"], dtype=float)
    im = np.asarray(x.get("im", np.zeros_like(re)), dtype=float)
    return re + 1j * im


def _condition_projector(cond: Condition, layout: RegisterLayout) -> np.ndarray:
    dims = [layout.register(lab).dim for lab in cond.labels]
    diag = [
        1.0 if cond.holds(dict(zip(cond.labels, digits))) else 0.0
        for digits in itertools.product(*[range(d) for d in dims])
    ]
    return np.diag(np.asarray(diag, dtype=complex))


def _controlled(U: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.kron(U, P) + np.kron(np.eye(U.shape[0]), np.eye(P.shape[0]) - P)


def _measure_matrix(sd: SpectralDecomposition) -> np.ndarray:
    K = sd.n_outcomes
    return sum(np.kron(p, weyl_shift(K, m)) for m, p in enumerate(sd.projectors))


def compile_steps(spec: ProtocolSpec) -> list[_Step]:
    """Each instruction as one unitary on a subset of the dilated registers."""
    steps = []
    for ins in spec.instructions:
        if isinstance(ins, Unitary):
            steps.append(_Step(np.asarray(ins.op, dtype=complex), ins.targets))
        elif isinstance(ins, Measure):
            steps.append(_Step(_measure_matrix(spec.spectra[ins.ss_label]), ins.targets + (ins.ss_label,)))
        elif isinstance(ins, Feedback):
            P = _condition_projector(ins.condition, spec.layout)
            steps.append(_Step(_controlled(np.asarray(ins.op, dtype=complex), P), ins.targets + ins.condition.labels))
        else:
            U = _measure_matrix(spec.spectra[ins.ss_label])
            P = _condition_projector(ins.condition, spec.layout)
            steps.append(_Step(_controlled(U, P), ins.targets + (ins.ss_label,) + ins.condition.labels))
    return steps


def compiled_unitary(spec: ProtocolSpec) -> Operator:
    """The whole protocol as one dense unitary on the dilated layout."""
    W = Operator.identity(spec.layout)
    for st in compile_steps(spec):
        W = embed(st.matrix, st.targets, spec.layout) @ W
    return W


def _initial_dilated(spec: ProtocolSpec, state):
    anc = RegisterLayout(tuple(spec.layout.registers[len(spec.physical) :]))
    e0 = np.zeros(anc.total_dim, dtype=complex)
    e0[0] = 1.0
    if isinstance(state, DensityMatrix) or (not isinstance(state, Ket) and np.ndim(state) == 2):
        r = state.data if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)
        return DensityMatrix(spec.layout, np.kron(r, np.outer(e0, e0)))
    v = state.data if isinstance(state, Ket) else np.asarray(state, dtype=complex)
    return Ket(spec.layout, np.kron(v, e0))


@dataclass(frozen=True)
class DilatedRun:
    """Final dilated state of a protocol and the per-register outcome marginals."""

    spec: ProtocolSpec = field(repr=False)
    final_state: DensityMatrix = field(repr=False)
    outcome_marginals: Mapping[str, np.ndarray]

    def joint_outcomes(self) -> dict[tuple[int, ...], float]:
        """Joint distribution of all register outcomes, keyed in layout order."""
        rho = partial_trace(self.final_state, self.spec.ss_labels)
        dims = rho.layout.dims
        probs = np.real(np.diag(rho.data))
        return {digits: float(p) for digits, p in zip(itertools.product(*[range(d) for d in dims]), probs)}


def run_dilated(spec: ProtocolSpec, rho0) -> DilatedRun:
    """Evolve ``rho0 (x) |0...0><0...0|`` through the compiled protocol."""
    state = _initial_dilated(spec, rho0)
    for st in compile_steps(spec):
        state = apply_local(st.matrix, st.targets, state)
    final = state.to_density() if isinstance(state, Ket) else state
    marg = {}
    for lab in spec.ss_labels:
        marg[lab] = np.real(np.diag(partial_trace(final, [lab]).data))
    return DilatedRun(spec, final, marg)


def marginal_given(run: DilatedRun, assignment: Mapping[str, int]) -> tuple[float, DensityMatrix | None]:
    """Probability of a (partial) outcome assignment and the conditional physical state.

    Registers not named in ``assignment`` are summed over.  The state is
    ``None`` when the probability is below the trace tolerance.
    """
    layout = run.spec.layout
    for lab in assignment:
        if lab not in run.spec.ss_labels:
            raise LayoutError(f"{lab!r} is not an outcome register")
    ops = [(np.diag(np.eye(layout.register(lab).dim)[v]).astype(complex), lab) for lab, v in assignment.items()]
    state = run.final_state
    for P, lab in ops:
        state = apply_local(P, [lab], state)
    p = float(np.real(state.trace()))
    if p < DEFAULT_TOL.trace:
        return p, None
    reduced = partial_trace(state, run.spec.physical.labels)
    return p, DensityMatrix(reduced.layout, reduced.data / p)


def born_from_dilated(run: DilatedRun, ss_label: str, m: int) -> float:
    """``tr(rho_final (I (x) |m><m|))`` on a single outcome register."""
    return float(run.outcome_marginals[ss_label][m])


@dataclass(frozen=True)
class Trajectory:
    outcomes: Mapping[str, int]
    measured: Mapping[str, bool]
    state: Union[Ket, DensityMatrix] = field(repr=False)


def _rng(seed: int, shot: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(shot), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def _collapse(sd: SpectralDecomposition, targets, state, rng: np.random.Generator):
    branches = [apply_local(P, targets, state) for P in sd.projectors]
    if isinstance(state, Ket):
        probs = np.array([b.norm() ** 2 for b in branches])
    else:
        probs = np.array([np.real(b.trace()) for b in branches])
    probs = probs / probs.sum()
    m = min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")), len(probs) - 1)
    b = branches[m]
    if isinstance(b, Ket):
        return m, b.normalized()
    return m, DensityMatrix(b.layout, b.data / np.real(b.trace()))


def sample_trajectory(spec: ProtocolSpec, psi0, seed: int, shot: int = 0) -> Trajectory:
    """Sample one run with eager collapse after each measurement.

    Randomness for instruction ``i`` of shot ``shot`` comes from an independent
    Philox stream keyed by ``(seed, shot, i)``, so shots can be drawn in any
    order or in parallel.  Registers whose conditional measurement did not
    fire report outcome 0.
    """
    if isinstance(psi0, (Ket, DensityMatrix)):
        state = type(psi0)(spec.physical, psi0.data)
    elif np.ndim(psi0) == 2:
        state = DensityMatrix(spec.physical, psi0)
    else:
        state = Ket(spec.physical, psi0)
    outcomes = {lab: 0 for lab in spec.ss_labels}
    measured = {lab: False for lab in spec.ss_labels}
    for i, ins in enumerate(spec.instructions):
        if isinstance(ins, Unitary):
            state = apply_local(ins.op, ins.targets, state)
        elif isinstance(ins, Feedback):
            if ins.condition.holds(outcomes):
                state = apply_local(ins.op, ins.targets, state)
        else:
            if isinstance(ins, CondMeasure) and not ins.condition.holds(outcomes):
                continue
            m, state = _collapse(spec.spectra[ins.ss_label], ins.targets, state, _rng(seed, shot, i))
            outcomes[ins.ss_label] = m
            measured[ins.ss_label] = True
    return Trajectory(outcomes, measured, state)


def sample_outcomes(spec: ProtocolSpec, psi0, seed: int, shots: int) -> np.ndarray:
    """Outcome records of ``shots`` trajectories, one row per shot in layout order."""
    labels = spec.ss_labels
    out = np.empty((shots, len(labels)), dtype=np.int64)
    for s in range(shots):
        tr = sample_trajectory(spec, psi0, seed, shot=s)
        out[s] = [tr.outcomes[lab] for lab in labels]
    return out
