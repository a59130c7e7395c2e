"""Stern-Gerlach measurement of a spin-1/2 along z.

The atom moves through a field ``B0 + b z`` during a transit time
``t = L / v``.  The effective Hamiltonian for the z motion is::

    H = p^2 / (2 M) + mu_B (B0 + b z) sigma_z

so the spin-``s`` component feels the constant force ``-s mu_B b``.  Each
branch is a freely spreading Gaussian carried along a parabola::

    <z>_s(t)   = z0 - s mu_B b t^2 / (2 M)
    Var_s(t)   = delta^2 (1 + (t / (2 M delta^2))^2)

The position of the atom then acts as the register that records ``s``.
Units have hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .hilbert import NumericalGuardError

SPINS = (1, -1)


@dataclass(frozen=True)
class SGConfig:
    M: float = 1.0
    b: float = 0.5
    mu_B: float = 1.0
    B0: float = 10.0
    delta: float = 0.2
    z0: float = 0.0
    v: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        if self.M <= 0 or self.delta <= 0 or self.v <= 0 or self.L < 0:
            raise ValueError("M, delta and v must be positive and L non-negative")

    @property
    def transit_time(self) -> float:
        return self.L / self.v

    def force(self, s: int) -> float:
        return -s * self.mu_B * self.b

    def width(self, t: float) -> float:
        """Standard deviation of ``|psi_s(z, t)|^2``."""
        return self.delta * math.sqrt(1.0 + (t / (2 * self.M * self.delta**2)) ** 2)


def _check_spin(s: int) -> None:
    if s not in SPINS:
        raise ValueError("spin label must be +1 or -1")


def sg_heisenberg_z(cfg: SGConfig, t: float, s: int, order: int = 2, delta_y: float = 0.0) -> float:
    """Mean z position of the spin-``s`` branch.

    ``order=4`` adds the transverse-field correction
    ``s mu_B^3 b^3 t^4 delta_y^2 / (6 M)`` for a beam of transverse width
    ``delta_y``.
    """
    _check_spin(s)
    z = cfg.z0 - cfg.b * cfg.mu_B * s * t**2 / (2 * cfg.M)
    if order == 2:
        return z
    if order == 4:
        return z + cfg.mu_B**3 * cfg.b**3 * t**4 * delta_y**2 * s / (6 * cfg.M)
    raise ValueError("order must be 2 or 4")


def sg_validity_time(cfg: SGConfig, delta_y: float, tol: float = 1e-3) -> float:
    """Transit time at which the fourth-order correction reaches ``tol`` of the drift."""

    def excess(t):
        z2 = sg_heisenberg_z(cfg, t, 1, 2)
        z4 = sg_heisenberg_z(cfg, t, 1, 4, delta_y)
        return abs(z4 - z2) / abs(z2 - cfg.z0) - tol

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2
        if hi > 1e12:
            raise ValueError("no validity boundary found")
    return brentq(excess, 1e-12 * hi, hi, xtol=1e-14, rtol=1e-13)


def sg_analytic(cfg: SGConfig, z, t: float, s: int, c_s: complex = 1.0) -> np.ndarray:
    """Exact spin-``s`` wavefunction at time ``t``.

    A Gaussian in a linear potential stays Gaussian: it is the freely spread
    packet, displaced by ``force t^2 / (2 M)`` and boosted by ``force t``.
    """
    _check_spin(s)
    z = np.asarray(z, dtype=float)
    M, d = cfg.M, cfg.delta
    kappa = s * cfg.mu_B * cfg.b
    xi = z + kappa * t**2 / (2 * M) - cfg.z0
    w = 1.0 + 1j * t / (2 * M * d**2)
    free = (2 * np.pi * d**2) ** -0.25 / np.sqrt(w) * np.exp(-(xi**2) / (4 * d**2 * w))
    phase = np.exp(-1j * (s * cfg.mu_B * cfg.B0 * t + kappa * t * z + kappa**2 * t**3 / (6 * M)))
    return c_s * phase * free


@dataclass(frozen=True)
class SplitStepResult:
    z: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)  # rows: s = +1, -1
    t: float
    n_steps: int

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def branch_probability(self, s: int) -> float:
        return float(np.sum(np.abs(self.psi[SPINS.index(s)]) ** 2) * self.dz)

    def branch_mean(self, s: int) -> float:
        rho = np.abs(self.psi[SPINS.index(s)]) ** 2
        return float(np.sum(self.z * rho) / np.sum(rho))

    def branch_variance(self, s: int) -> float:
        rho = np.abs(self.psi[SPINS.index(s)]) ** 2
        mu = np.sum(self.z * rho) / np.sum(rho)
        return float(np.sum((self.z - mu) ** 2 * rho) / np.sum(rho))

    def side_probability(self, s: int, below: bool, z_cut: float) -> float:
        rho = np.abs(self.psi[SPINS.index(s)]) ** 2
        # each sample owns the cell z +- dz/2; the cell cut by z_cut counts fractionally
        above = np.clip((self.z + self.dz / 2 - z_cut) / self.dz, 0.0, 1.0)
        w = 1.0 - above if below else above
        return float(np.sum(rho * w) * self.dz)


def _auto_grid(cfg: SGConfig, t: float, guard: float) -> np.ndarray:
    centers = [sg_heisenberg_z(cfg, t, s) for s in SPINS]
    w = cfg.width(t)
    lo = min(centers + [cfg.z0]) - 8 * w - guard
    hi = max(centers + [cfg.z0]) + 8 * w + guard
    dz_max = cfg.delta / 8
    # momentum band must hold the kick plus 12 momentum widths
    k_need = abs(cfg.mu_B * cfg.b) * t + 12 / (2 * cfg.delta)
    dz_max = min(dz_max, math.pi / k_need)
    n = 1 << math.ceil(math.log2((hi - lo) / dz_max))
    return lo + (hi - lo) * np.arange(n) / n


def sg_split_step(
    cfg: SGConfig,
    c: tuple[complex, complex],
    t: float | None = None,
    n_steps: int = 200,
    z=None,
    escape_tol: float = 1e-6,
) -> SplitStepResult:
    """Strang split-step Fourier propagation of both spin components.

    The uniform periodic grid ``z`` defaults to one covering both branches
    with guard bands of ``10 delta`` (or the spread width, if larger) and
    spacing at most ``delta / 8``.  If more than ``escape_tol`` probability
    ends up in the guard bands the run is rejected with
    :class:`NumericalGuardError`.
    """
    t = cfg.transit_time if t is None else float(t)
    guard = 10 * max(cfg.delta, cfg.width(t))
    z = _auto_grid(cfg, t, guard) if z is None else np.asarray(z, dtype=float)
    n = z.size
    dz = z[1] - z[0]
    k = 2 * np.pi * np.fft.fftfreq(n, d=dz)
    h = t / n_steps
    kin = np.exp(-1j * k**2 * h / (2 * cfg.M))
    psi = np.array([sg_analytic(cfg, z, 0.0, s, cs) for s, cs in zip(SPINS, c)])
    half = np.array([np.exp(-0.5j * h * s * cfg.mu_B * (cfg.B0 + cfg.b * z)) for s in SPINS])
    for _ in range(n_steps):
        psi = half * psi
        psi = np.fft.ifft(kin * np.fft.fft(psi, axis=1), axis=1)
        psi = half * psi
    band = (z < z[0] + guard) | (z > z[-1] - guard)
    leak = float(np.sum(np.abs(psi[:, band]) ** 2) * dz)
    if leak > escape_tol:
        raise NumericalGuardError(f"{leak:.3g} of the probability reached the grid guard bands")
    return SplitStepResult(z, psi, t, n_steps)


@dataclass(frozen=True)
class SGOutcome:
    probabilities: tuple[float, float]
    means: tuple[float, float]
    variance: float
    misbinning: float


def sg_outcome_distribution(cfg: SGConfig, c: tuple[complex, complex], t: float | None = None) -> SGOutcome:
    """Branch weights, positions and the chance that position misreports the spin.

    A detection at ``z`` is assigned the spin whose branch drifts toward that
    side of ``z0``.  A branch is misbinned when it is found on the other side,
    which for a Gaussian of width ``sigma`` and drift ``Delta`` happens with
    probability ``erfc(|Delta| / (sigma sqrt 2)) / 2``.
    """
    t = cfg.transit_time if t is None else float(t)
    probs = tuple(abs(cs) ** 2 for cs in c)
    if abs(sum(probs) - 1) > 1e-10:
        raise ValueError("spin amplitudes must be normalised")
    means = tuple(sg_heisenberg_z(cfg, t, s) for s in SPINS)
    sigma = cfg.width(t)
    drift = abs(means[0] - cfg.z0)
    tail = 0.5 * float(erfc(drift / (sigma * math.sqrt(2)))) if drift > 0 else 0.5
    return SGOutcome(probs, means, sigma**2, tail)
