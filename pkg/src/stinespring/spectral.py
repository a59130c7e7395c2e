"""Spectral projectors, Kraus sets and their unitary dilations.

A projective measurement of an observable ``O = sum_m lambda_m Pi_m`` is
realised as a unitary on ``system (x) register``::

    U = sum_m Pi_m (x) S^m,     S^m |k> = |k + m mod K>

so that the register, prepared in ``|0>``, ends up holding the outcome index.
Generalised measurements given by Kraus operators are dilated the same way,
``U (psi (x) |i>) = sum_k (K_k psi) (x) |k>``, with the remaining columns of
``U`` filled in by a deterministic Gram-Schmidt completion.

Outcome indices follow descending eigenvalue order by default, so for Pauli Z
outcome 0 is the ``+1`` eigenvalue (``|0>``) and the dilation is a CNOT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .hilbert import (
    DEFAULT_TOL,
    STINESPRING,
    DensityMatrix,
    LayoutError,
    NumericalGuardError,
    Operator,
    Register,
    RegisterLayout,
    partial_trace,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues and the matching orthogonal projectors."""

    eigenvalues: np.ndarray
    projectors: tuple[np.ndarray, ...] = field(repr=False)
    layout: RegisterLayout | None = None

    @property
    def n_outcomes(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))

    def probabilities(self, rho) -> np.ndarray:
        r = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
        if r.ndim == 1:
            r = np.outer(r, r.conj())
        return np.array([np.real(np.trace(p @ r)) for p in self.projectors])


def _as_matrix(obs) -> tuple[np.ndarray, RegisterLayout | None]:
    if isinstance(obs, Operator):
        return obs.data, obs.layout
    mat = np.asarray(obs, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"observable must be a square matrix, got shape {mat.shape}")
    return mat, None


def spectral_decompose(
    obs,
    degeneracy_tol: float | None = None,
    order: str = "descending",
    tol: float = DEFAULT_TOL.structural,
) -> SpectralDecomposition:
    """Group the eigenvectors of a Hermitian operator into spectral projectors.

    Sorted eigenvalues closer than ``degeneracy_tol`` are chained into one
    cluster (single linkage) whose eigenvalue is the cluster mean.  The default
    tolerance is ``1e-8`` times the spectral range, with a floor at a few ulps
    of the largest eigenvalue so that multiples of the identity stay in one
    cluster.

    ``order`` is ``"descending"`` (default) or ``"ascending"`` and fixes how
    outcome indices are assigned to eigenvalues.
    """
    mat, layout = _as_matrix(obs)
    scale = max(1.0, float(np.max(np.abs(mat), initial=0.0)))
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > tol * scale:
        raise ValueError("observable is not Hermitian")
    if order not in ("ascending", "descending"):
        raise ValueError("order must be 'ascending' or 'descending'")
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if degeneracy_tol is None:
        spread = float(w[-1] - w[0])
        degeneracy_tol = max(1e-8 * spread, 64 * np.finfo(float).eps * float(np.max(np.abs(w))))
    breaks = np.flatnonzero(np.diff(w) > degeneracy_tol) + 1
    groups = np.split(np.arange(len(w)), breaks)
    lams = [float(w[g].mean()) for g in groups]
    projs = [v[:, g] @ v[:, g].conj().T for g in groups]
    if order == "descending":
        lams, projs = lams[::-1], projs[::-1]
    for p in projs:
        p.setflags(write=False)
    return SpectralDecomposition(np.array(lams), tuple(projs), layout)


def qubit_observable_involution(obs) -> tuple[np.ndarray, float, float]:
    """Return ``(Obar, lambda0, lambda1)`` for a non-degenerate 2x2 observable.

    ``Obar = sum_nu tr(O sigma_nu) sigma_nu / (lambda0 - lambda1)`` squares to
    the identity and gives the projectors ``Pi_m = (I + (-1)^m Obar) / 2`` with
    ``lambda0 > lambda1``.
    """
    mat, _ = _as_matrix(obs)
    if mat.shape != (2, 2):
        raise ValueError("qubit observable must be 2x2")
    if np.max(np.abs(mat - mat.conj().T)) > DEFAULT_TOL.structural * max(1.0, np.abs(mat).max()):
        raise ValueError("observable is not Hermitian")
    w = np.linalg.eigvalsh(mat)
    lam1, lam0 = float(w[0]), float(w[1])
    if lam0 - lam1 <= 1e-8 * max(1.0, abs(lam0), abs(lam1)):
        raise ValueError("degenerate qubit observable has no involution")
    obar = sum(np.trace(mat @ PAULI[k]) * PAULI[k] for k in "XYZ") / (lam0 - lam1)
    return obar, lam0, lam1


def weyl_shift(K: int, m: int = 1) -> np.ndarray:
    """Cyclic shift ``S^m |k> = |k + m mod K>`` on a K-dimensional register."""
    if K < 1:
        raise ValueError("K must be positive")
    if not 0 <= m < K:
        raise ValueError(f"shift {m} out of range for K={K}")
    return np.roll(np.eye(K, dtype=complex), m, axis=0)


@dataclass(frozen=True)
class MeasurementUnitary:
    """A unitary on ``system (x) register`` together with its outcome labelling.

    ``outcome_map[k]`` is the measurement outcome recorded when the register is
    found in basis state ``k``; ``default_index`` is the register's initial
    state.
    """

    unitary: Operator
    outcome_map: tuple[int, ...]
    default_index: int = 0
    ss_label: str = "M"

    @property
    def physical_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.unitary.layout.labels if lab != self.ss_label)

    @property
    def ss_dim(self) -> int:
        return self.unitary.layout.register(self.ss_label).dim

    @property
    def n_outcomes(self) -> int:
        return max(self.outcome_map) + 1

    def register_projector(self, m: int) -> np.ndarray:
        return np.diag([1.0 + 0j if o == m else 0.0 for o in self.outcome_map])


def _physical_layout(dim: int, layout: RegisterLayout | None) -> RegisterLayout:
    if layout is None:
        return RegisterLayout.of(("sys", dim))
    if layout.total_dim != dim:
        raise LayoutError(f"layout dimension {layout.total_dim} does not match operator dimension {dim}")
    return layout


def _with_register(phys: RegisterLayout, ss_label: str, K: int) -> RegisterLayout:
    if ss_label in phys:
        raise LayoutError(f"register label {ss_label!r} already used")
    return phys.concat(RegisterLayout((Register(ss_label, K, STINESPRING),)))


def measurement_unitary(
    sd: SpectralDecomposition,
    ss_label: str = "M",
    ss_dim: int | None = None,
    layout: RegisterLayout | None = None,
) -> MeasurementUnitary:
    """Dilation ``sum_m Pi_m (x) S^m`` of a projective measurement.

    The register dimension defaults to the number of outcomes; a larger
    ``ss_dim`` gives a register with unused basis states.
    """
    K = sd.n_outcomes if ss_dim is None else int(ss_dim)
    if K < sd.n_outcomes:
        raise ValueError(f"register dimension {K} is smaller than the number of outcomes {sd.n_outcomes}")
    phys = _physical_layout(sd.dim, layout if layout is not None else sd.layout)
    full = _with_register(phys, ss_label, K)
    U = sum(np.kron(p, weyl_shift(K, m)) for m, p in enumerate(sd.projectors))
    omap = tuple(range(K))
    return MeasurementUnitary(Operator(full, U), omap, 0, ss_label)


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators ``K_k`` with an outcome label per operator.

    ``kind`` is ``"channel"`` when ``sum K^dagger K = I`` and ``"operation"``
    when the sum is strictly below the identity.
    """

    operators: tuple[np.ndarray, ...] = field(repr=False)
    outcome_map: tuple[int, ...] | None = None
    tol: float = DEFAULT_TOL.structural
    kind: str = field(init=False)

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("empty Kraus set")
        d_out, d_in = ops[0].shape
        if d_out != d_in or any(k.shape != (d_out, d_in) for k in ops):
            raise ValueError("Kraus operators must be square and share one shape")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        omap = tuple(range(len(ops))) if self.outcome_map is None else tuple(int(o) for o in self.outcome_map)
        if len(omap) != len(ops):
            raise ValueError("outcome_map needs one entry per Kraus operator")
        object.__setattr__(self, "outcome_map", omap)
        defect = np.eye(d_in) - self.gram()
        if np.max(np.abs(defect)) <= self.tol:
            kind = "channel"
        elif np.linalg.eigvalsh(0.5 * (defect + defect.conj().T)).min() >= -self.tol:
            kind = "operation"
        else:
            raise ValueError("sum of K^dagger K exceeds the identity")
        object.__setattr__(self, "kind", kind)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def gram(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.operators)

    def completed(self) -> "KrausSet":
        """Append ``sqrt(I - sum K^dagger K)`` as a fresh outcome when incomplete."""
        if self.kind == "channel":
            return self
        defect = np.eye(self.dim) - self.gram()
        w, v = np.linalg.eigh(0.5 * (defect + defect.conj().T))
        root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        return KrausSet(self.operators + (root,), self.outcome_map + (max(self.outcome_map) + 1,), self.tol)


def kraus_from_observable(sd: SpectralDecomposition) -> KrausSet:
    return KrausSet(tuple(sd.projectors))


def complete_unitary(columns: Mapping[int, np.ndarray], dim: int, tol: float = 1e-9) -> np.ndarray:
    """Extend orthonormal columns at fixed positions to a full unitary.

    Missing columns are filled, in increasing position order, by Gram-Schmidt
    on the canonical basis vectors ``e_0, e_1, ...``.  The result is therefore
    deterministic.
    """
    U = np.zeros((dim, dim), dtype=complex)
    fixed = sorted(columns)
    for j in fixed:
        U[:, j] = columns[j]
    V = U[:, fixed]
    if np.max(np.abs(V.conj().T @ V - np.eye(len(fixed))), initial=0.0) > tol:
        raise ValueError("prescribed columns are not orthonormal")
    basis = [U[:, j] for j in fixed]
    free = [j for j in range(dim) if j not in columns]
    e = 0
    for j in free:
        while True:
            if e >= dim:
                raise RuntimeError("basis completion ran out of candidates")
            v = np.zeros(dim, dtype=complex)
            v[e] = 1.0
            e += 1
            for _ in range(2):
                for b in basis:
                    v = v - np.vdot(b, v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                v = v / nv
                break
        U[:, j] = v
        basis.append(v)
    return U


def unitary_from_kraus(
    ks: KrausSet,
    default_index: int = 0,
    ss_label: str = "M",
    layout: RegisterLayout | None = None,
) -> MeasurementUnitary:
    """Stinespring unitary with ``U (psi (x) |i>) = sum_k (K_k psi) (x) |k>``.

    ``i`` is ``default_index``.  Incomplete Kraus sets are rejected; call
    :meth:`KrausSet.completed` first.
    """
    if ks.kind != "channel":
        raise ValueError("Kraus set is incomplete; complete it with KrausSet.completed()")
    K = len(ks.operators)
    if not 0 <= default_index < K:
        raise ValueError("default_index out of range")
    d = ks.dim
    V = sum(np.kron(k, np.eye(K)[:, [s]]) for s, k in enumerate(ks.operators))  # (d*K, d)
    cols = {j * K + default_index: V[:, j] for j in range(d)}
    U = complete_unitary(cols, d * K)
    full = _with_register(_physical_layout(d, layout), ss_label, K)
    return MeasurementUnitary(Operator(full, U), ks.outcome_map, default_index, ss_label)


def _dilate(mu: MeasurementUnitary, rho) -> tuple[np.ndarray, RegisterLayout]:
    r = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.ndim == 1:
        r = np.outer(r, r.conj())
    K = mu.ss_dim
    anc = np.zeros((K, K), dtype=complex)
    anc[mu.default_index, mu.default_index] = 1.0
    U = mu.unitary.data
    if U.shape[0] != r.shape[0] * K:
        raise LayoutError("state dimension does not match the measurement unitary")
    return U @ np.kron(r, anc) @ U.conj().T, mu.unitary.layout


def apply_channel(mu: MeasurementUnitary, rho) -> DensityMatrix:
    """Non-selective update: trace the register out of ``U (rho (x) |i><i|) U^dagger``."""
    big, layout = _dilate(mu, rho)
    return partial_trace(DensityMatrix(layout, big), mu.physical_labels)


def apply_selective(mu: MeasurementUnitary, rho, m: int, p_floor: float = DEFAULT_TOL.trace):
    """Probability of outcome ``m`` and the conditional state.

    Returns ``(p, rho_m)``; ``rho_m`` is ``None`` when ``p`` is below
    ``p_floor``.
    """
    big, layout = _dilate(mu, rho)
    P = np.kron(np.eye(layout.total_dim // mu.ss_dim), mu.register_projector(m))
    proj = P @ big @ P
    p = float(np.real(np.trace(proj)))
    if p < p_floor:
        return p, None
    reduced = partial_trace(DensityMatrix(layout, proj / p), mu.physical_labels)
    return p, reduced


def number_measurement_unitary(cutoff: int) -> MeasurementUnitary:
    """Projective photon-number measurement on a mode truncated at ``cutoff``."""
    n = np.diag(np.arange(cutoff + 1, dtype=float))
    sd = spectral_decompose(n, order="ascending")
    return measurement_unitary(sd, ss_label="count", layout=RegisterLayout.of(("mode", cutoff + 1)))


def destructive_number_unitary(cutoff: int) -> MeasurementUnitary:
    """Counting measurement that also absorbs the photons: ``|n>|0> -> |0>|n>``."""
    d = cutoff + 1
    cols = {}
    for n in range(d):
        v = np.zeros(d * d, dtype=complex)
        v[n] = 1.0  # |0>_mode (x) |n>_count
        cols[n * d] = v
    U = complete_unitary(cols, d * d)
    layout = RegisterLayout.of(("mode", d), ("count", d, STINESPRING))
    return MeasurementUnitary(Operator(layout, U), tuple(range(d)), 0, "count")


@dataclass(frozen=True)
class PointerPacket:
    """Gaussian pointer ``(2 pi sigma^2)^(-1/4) exp(-(x - x0)^2 / (4 sigma^2))`` on a grid."""

    x0: float
    sigma: float
    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 3 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be a strictly increasing 1-D array")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "grid", g)

    def amplitude(self, shift: float = 0.0) -> np.ndarray:
        x = self.grid
        phi = np.exp(-((x - self.x0 - shift) ** 2) / (4 * self.sigma**2))
        return phi / np.sqrt(np.trapezoid(phi**2, x))


@dataclass(frozen=True)
class PointerState:
    """Joint amplitude ``psi[j, x]`` of system basis state ``j`` and pointer position ``x``."""

    grid: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    def norm_squared(self) -> float:
        return float(np.trapezoid(np.sum(np.abs(self.amplitudes) ** 2, axis=0), self.grid))

    def pointer_density(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    def mean_position(self) -> float:
        return float(np.trapezoid(self.grid * self.pointer_density(), self.grid) / self.norm_squared())


def pointer_evolve(
    sd: SpectralDecomposition,
    packet: PointerPacket,
    coupling: float,
    t: float,
    psi,
    n_sigma: float = 8.0,
) -> PointerState:
    """Premeasurement by a continuous pointer, ``exp(-i coupling t O (x) p)``.

    The outcome-``m`` component of ``psi`` drags the pointer to
    ``x0 + coupling * t * lambda_m``.  Raises :class:`NumericalGuardError` if a
    populated branch would come within ``n_sigma`` widths of the grid edge.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != sd.dim:
        raise ValueError("state dimension does not match the observable")
    g = packet.grid
    out = np.zeros((sd.dim, g.size), dtype=complex)
    for lam, P in zip(sd.eigenvalues, sd.projectors):
        branch = P @ psi
        if np.linalg.norm(branch) == 0:
            continue
        shift = coupling * t * lam
        c = packet.x0 + shift
        if c - n_sigma * packet.sigma < g[0] or c + n_sigma * packet.sigma > g[-1]:
            raise NumericalGuardError(f"pointer branch centred at {c:.6g} leaves the grid")
        out += np.outer(branch, packet.amplitude(shift))
    return PointerState(g, out)
