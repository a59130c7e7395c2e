"""Labelled tensor-product Hilbert spaces.

Every state and operator carries a :class:`RegisterLayout`, an ordered list of
registers.  A register is either *physical* (the system being measured) or
*stinespring* (an auxiliary register that stores measurement outcomes).  All
other modules in the package build their dilated states on top of the types
defined here.

Basis ordering is row-major over the layout: the first register is the most
significant digit of the flat index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

PHYSICAL = "physical"
STINESPRING = "stinespring"
_KINDS = (PHYSICAL, STINESPRING)


class LayoutError(ValueError):
    """Raised when labels, dimensions or register kinds do not line up."""


class NumericalGuardError(RuntimeError):
    """Raised when a numerical guard trips (grid escape, cutoff overflow, ...)."""


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances.

    ``structural`` is used for unitarity, hermiticity, completeness and
    orthogonality checks; ``trace`` for trace and normalisation checks.
    Functions that perform checks accept a ``tol`` argument to override these.
    """

    structural: float = 1e-10
    trace: float = 1e-12


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Register:
    label: str
    dim: int
    kind: str = PHYSICAL

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise LayoutError("register label must be a non-empty string")
        if int(self.dim) != self.dim or self.dim < 1:
            raise LayoutError(f"register {self.label!r}: dim must be a positive integer")
        if self.kind not in _KINDS:
            raise LayoutError(f"register {self.label!r}: kind must be one of {_KINDS}")


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered collection of uniquely labelled registers."""

    registers: tuple[Register, ...]

    def __post_init__(self):
        regs = tuple(self.registers)
        object.__setattr__(self, "registers", regs)
        labels = [r.label for r in regs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate register labels in {labels}")

    @classmethod
    def of(cls, *specs: Union[Register, tuple]) -> "RegisterLayout":
        """Build a layout from ``Register`` objects or ``(label, dim[, kind])`` tuples."""
        regs = [s if isinstance(s, Register) else Register(*s) for s in specs]
        return cls(tuple(regs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def __len__(self):
        return len(self.registers)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown register label {label!r}") from None

    def register(self, label: str) -> Register:
        return self.registers[self.index(label)]

    def labels_of_kind(self, kind: str) -> tuple[str, ...]:
        return tuple(r.label for r in self.registers if r.kind == kind)

    @property
    def physical_labels(self) -> tuple[str, ...]:
        return self.labels_of_kind(PHYSICAL)

    @property
    def stinespring_labels(self) -> tuple[str, ...]:
        return self.labels_of_kind(STINESPRING)

    def sub(self, labels: Iterable[str]) -> "RegisterLayout":
        """Layout restricted to ``labels``, in the order given."""
        return RegisterLayout(tuple(self.register(lab) for lab in labels))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def flat_index(self, digits: Mapping[str, int]) -> int:
        """Flat basis index of the product basis state with the given digits.

        Registers missing from ``digits`` are taken to be in state 0.
        """
        unknown = set(digits) - set(self.labels)
        if unknown:
            raise LayoutError(f"unknown register labels {sorted(unknown)}")
        idx = 0
        for r in self.registers:
            d = int(digits.get(r.label, 0))
            if not 0 <= d < r.dim:
                raise LayoutError(f"digit {d} out of range for register {r.label!r}")
            idx = idx * r.dim + d
        return idx

    def to_list(self) -> list[dict]:
        return [{"label": r.label, "dim": r.dim, "kind": r.kind} for r in self.registers]

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "RegisterLayout":
        return cls(tuple(Register(it["label"], int(it["dim"]), it.get("kind", PHYSICAL)) for it in items))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Ket:
    """State vector over a layout.  Not forced to be normalised."""

    layout: RegisterLayout
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen(self.data).reshape(-1)
        if arr.size != self.layout.total_dim:
            raise LayoutError(f"ket has {arr.size} amplitudes, layout needs {self.layout.total_dim}")
        object.__setattr__(self, "data", arr)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalise the zero vector")
        return Ket(self.layout, self.data / n)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.data, self.data.conj()))

    def as_tensor(self) -> np.ndarray:
        return self.data.reshape(self.layout.dims)

    @classmethod
    def basis(cls, layout: RegisterLayout, digits: Mapping[str, int] | None = None) -> "Ket":
        v = np.zeros(layout.total_dim, dtype=complex)
        v[layout.flat_index(digits or {})] = 1.0
        return cls(layout, v)


class _Matrix:
    layout: RegisterLayout
    data: np.ndarray

    def _check(self):
        arr = _frozen(self.data)
        d = self.layout.total_dim
        if arr.shape != (d, d):
            raise LayoutError(f"matrix shape {arr.shape} does not match layout dimension {d}")
        object.__setattr__(self, "data", arr)

    def is_hermitian(self, tol: float = DEFAULT_TOL.structural) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def trace(self) -> complex:
        return complex(np.trace(self.data))


@dataclass(frozen=True)
class DensityMatrix(_Matrix):
    layout: RegisterLayout
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._check()

    def is_valid(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        """Hermitian, unit trace and positive semidefinite within ``tol``."""
        if not self.is_hermitian(tol.structural):
            return False
        if abs(self.trace() - 1.0) > tol.trace * max(1, self.layout.total_dim):
            return False
        w = np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))
        return bool(w.min(initial=0.0) >= -tol.structural)

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))


@dataclass(frozen=True)
class Operator(_Matrix):
    layout: RegisterLayout
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._check()

    @classmethod
    def identity(cls, layout: RegisterLayout) -> "Operator":
        return cls(layout, np.eye(layout.total_dim))

    def is_unitary(self, tol: float = DEFAULT_TOL.structural) -> bool:
        d = self.layout.total_dim
        return bool(np.max(np.abs(self.data.conj().T @ self.data - np.eye(d))) <= tol)

    def dagger(self) -> "Operator":
        return Operator(self.layout, self.data.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.layout, self.data @ other.data)


State = Union[Ket, DensityMatrix]


def tensor(*items):
    """Tensor product of kets, density matrices or operators of one kind."""
    if not items:
        raise ValueError("tensor() needs at least one argument")
    kind = type(items[0])
    if any(type(x) is not kind for x in items):
        raise TypeError("tensor() arguments must all be of the same type")
    layout = reduce(lambda a, b: a.concat(b), (x.layout for x in items))
    data = reduce(np.kron, (x.data for x in items))
    return kind(layout, data)


def _permuted_kron(op: np.ndarray, targets: Sequence[str], layout: RegisterLayout) -> np.ndarray:
    targets = list(targets)
    rest = [lab for lab in layout.labels if lab not in targets]
    order = targets + rest
    dims = [layout.register(lab).dim for lab in order]
    d_rest = int(np.prod([layout.register(lab).dim for lab in rest], dtype=np.int64)) if rest else 1
    full = np.kron(op, np.eye(d_rest)).reshape(dims + dims)
    n = len(order)
    perm = [order.index(lab) for lab in layout.labels]
    return full.transpose(perm + [p + n for p in perm]).reshape(layout.total_dim, layout.total_dim)


def _target_dims(targets: Sequence[str], layout: RegisterLayout) -> list[int]:
    if len(set(targets)) != len(targets):
        raise LayoutError(f"repeated target labels {list(targets)}")
    return [layout.register(lab).dim for lab in targets]


def embed(op, targets: Sequence[str], layout: RegisterLayout) -> Operator:
    """Lift an operator acting on ``targets`` to the whole of ``layout``.

    ``op`` may be an :class:`Operator` (its register dimensions must match the
    targets) or a bare square matrix.
    """
    mat = op.data if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    tdims = _target_dims(targets, layout)
    if isinstance(op, Operator) and list(op.layout.dims) != tdims:
        raise LayoutError(f"operator dims {op.layout.dims} do not match target dims {tdims}")
    d = int(np.prod(tdims))
    if mat.shape != (d, d):
        raise LayoutError(f"operator shape {mat.shape} does not match target dimension {d}")
    return Operator(layout, _permuted_kron(mat, targets, layout))


def apply_local(op, targets: Sequence[str], state: State) -> State:
    """Apply an operator on ``targets`` without forming the full matrix.

    Kets are mapped to ``op |psi>`` and density matrices to ``op rho op^dagger``.
    """
    layout = state.layout
    mat = op.data if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    tdims = _target_dims(targets, layout)
    k = len(targets)
    axes = [layout.index(lab) for lab in targets]
    opt = mat.reshape(tdims + tdims)
    n = len(layout)

    def on_axes(t: np.ndarray, ax: list[int], m: np.ndarray) -> np.ndarray:
        out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), ax))
        return np.moveaxis(out, list(range(k)), ax)

    if isinstance(state, Ket):
        out = on_axes(state.as_tensor(), axes, opt)
        return Ket(layout, out.reshape(-1))
    t = state.data.reshape(layout.dims + layout.dims)
    t = on_axes(t, axes, opt)
    t = on_axes(t, [a + n for a in axes], opt.conj())
    return type(state)(layout, t.reshape(layout.total_dim, layout.total_dim))


def partial_trace(state: State, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix on ``keep``.  Kept registers stay in layout order."""
    layout = state.layout
    keep = set(keep)
    unknown = keep - set(layout.labels)
    if unknown:
        raise LayoutError(f"unknown register labels {sorted(unknown)}")
    kept = [lab for lab in layout.labels if lab in keep]
    sub = layout.sub(kept)
    n = len(layout)
    kidx = [layout.index(lab) for lab in kept]
    tidx = [i for i in range(n) if layout.labels[i] not in keep]
    if isinstance(state, Ket):
        psi = state.as_tensor()
        m = np.tensordot(psi, psi.conj(), axes=(tidx, tidx))
        return DensityMatrix(sub, m.reshape(sub.total_dim, sub.total_dim))
    t = state.data.reshape(layout.dims + layout.dims)
    row = list(range(n))
    col = [i + n if i in kidx else i for i in range(n)]
    out = kidx + [i + n for i in kidx]
    m = np.einsum(t, row + col, out)
    return DensityMatrix(sub, m.reshape(sub.total_dim, sub.total_dim))


def reorder(state: State, labels: Sequence[str]) -> State:
    """Same state with its registers permuted into the order ``labels``."""
    layout = state.layout
    if sorted(labels) != sorted(layout.labels):
        raise LayoutError(f"{list(labels)} is not a permutation of {list(layout.labels)}")
    new = layout.sub(labels)
    perm = [layout.index(lab) for lab in labels]
    if isinstance(state, Ket):
        return Ket(new, state.as_tensor().transpose(perm).reshape(-1))
    n = len(layout)
    t = state.data.reshape(layout.dims + layout.dims).transpose(perm + [p + n for p in perm])
    return type(state)(new, t.reshape(new.total_dim, new.total_dim))


def expectation(obs, state: State) -> complex:
    """``<psi|O|psi>`` or ``tr(O rho)``.  ``obs`` must span the state's layout."""
    mat = obs.data if isinstance(obs, Operator) else np.asarray(obs, dtype=complex)
    if isinstance(obs, Operator) and obs.layout != state.layout:
        raise LayoutError("observable layout differs from state layout")
    if isinstance(state, Ket):
        return complex(np.vdot(state.data, mat @ state.data))
    return complex(np.trace(mat @ state.data))


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b`` for Hermitian arrays or density matrices."""
    da = a.data if isinstance(a, DensityMatrix) else np.asarray(a)
    db = b.data if isinstance(b, DensityMatrix) else np.asarray(b)
    diff = da - db
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


_TYPES = {"ket": Ket, "density": DensityMatrix, "operator": Operator}


def to_json(obj) -> str:
    """Serialise a ket, density matrix or operator to ``{type, layout, re, im}``.

    Entries are flattened row-major.
    """
    name = next(k for k, v in _TYPES.items() if isinstance(obj, v))
    flat = obj.data.reshape(-1)
    return json.dumps(
        {"type": name, "layout": obj.layout.to_list(), "re": flat.real.tolist(), "im": flat.imag.tolist()}
    )


def from_json(text: str):
    doc = json.loads(text)
    layout = RegisterLayout.from_list(doc["layout"])
    cls = _TYPES[doc.get("type", "density")]
    flat = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    if cls is Ket:
        return Ket(layout, flat)
    d = layout.total_dim
    if flat.size != d * d:
        raise LayoutError(f"expected {d * d} entries, got {flat.size}")
    return cls(layout, flat.reshape(d, d))
