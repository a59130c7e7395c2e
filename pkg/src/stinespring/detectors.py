"""Stinespring models of concrete detectors.

Photon counting
    A light mode sweeps past ``N`` two-level absorbers.  Each absorber couples
    for a time ``tau`` via ``exp(g tau (a s+_k - a^dagger s-_k))``.  With
    ``zeta = N g^2 tau^2`` held fixed, the number of excited absorbers given
    ``n`` input photons tends to ``Binomial(n, 1 - exp(-zeta))``.

Homodyne detection
    The signal mode meets a coherent local oscillator ``|beta>`` on a balanced
    beam splitter and both output ports are counted.  Outcomes are labelled by
    the total count ``N`` and half the difference ``D``.  For large ``|beta|``
    the amplitude factorises into a Gaussian in ``N`` times the signal's
    quadrature wavefunction at ``x = D sqrt(2) / |beta|``.

Qubit readout
    Fluorescence: a photon stream scatters off the ``g`` state only.
    Dispersive: the cavity field picks up a state-dependent phase and is read
    out by homodyne detection of the momentum quadrature.

Units have hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import erfc, gammaln

from .hilbert import STINESPRING, Ket, NumericalGuardError, Register, RegisterLayout


# --------------------------------------------------------------------------
# photon counting


@dataclass(frozen=True)
class PhotonCounterConfig:
    N: int
    g: float
    tau: float
    cutoff: int = 8

    def __post_init__(self):
        if self.N < 1 or self.cutoff < 0:
            raise ValueError("N must be >= 1 and cutoff >= 0")
        if self.g < 0 or self.tau < 0:
            raise ValueError("g and tau must be non-negative")

    @property
    def zeta(self) -> float:
        return self.N * self.g**2 * self.tau**2


EXACT_MAX_ABSORBERS = 12


def photodetect_exact(psi, cfg: PhotonCounterConfig) -> Ket:
    """Apply the ordered absorber couplings to ``psi (x) |0...0>``.

    ``psi`` holds Fock amplitudes up to ``cfg.cutoff``.  The result lives on the
    layout ``mode, q1, ..., qN``; absorber registers are outcome registers.
    Limited to ``N <= 12`` absorbers.
    """
    if cfg.N > EXACT_MAX_ABSORBERS:
        raise ValueError(f"exact model supports at most {EXACT_MAX_ABSORBERS} absorbers")
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    d = cfg.cutoff + 1
    if psi.size > d:
        if np.any(np.abs(psi[d:]) > 0):
            raise NumericalGuardError("input state exceeds the Fock cutoff")
        psi = psi[:d]
    psi = np.pad(psi, (0, d - psi.size))
    state = np.zeros((d,) + (2,) * cfg.N, dtype=complex)
    state[(slice(None),) + (0,) * cfg.N] = psi
    # rotation on span{|n, 0_k>, |n-1, 1_k>} by angle g tau sqrt(n)
    ang = cfg.g * cfg.tau * np.sqrt(np.arange(1, d))
    c = np.cos(ang).reshape((d - 1,) + (1,) * (cfg.N - 1))
    s = np.sin(ang).reshape((d - 1,) + (1,) * (cfg.N - 1))
    for k in range(1, cfg.N + 1):
        ground = np.take(state, 0, axis=k)
        excited = np.take(state, 1, axis=k)
        new_g = ground.copy()
        new_e = excited.copy()
        new_g[1:] = c * ground[1:] - s * excited[:-1]
        new_e[:-1] = s * ground[1:] + c * excited[:-1]
        state = np.stack([new_g, new_e], axis=k)
    regs = (Register("mode", d),) + tuple(Register(f"q{k}", 2, STINESPRING) for k in range(1, cfg.N + 1))
    return Ket(RegisterLayout(regs), state.reshape(-1))


def exact_count_distribution(ket: Ket) -> np.ndarray:
    """Distribution of the number of excited absorbers in a photodetection ket."""
    N = len(ket.layout) - 1
    probs = np.abs(ket.as_tensor()) ** 2
    per_config = probs.sum(axis=0)
    weight = np.indices((2,) * N).sum(axis=0)
    return np.bincount(weight.reshape(-1), weights=per_config.reshape(-1), minlength=N + 1)


def _click_probability(zeta: float) -> float:
    return -math.expm1(-zeta)


def photocount_distribution(n: int, zeta: float) -> np.ndarray:
    """``P(k counts | n photons) = C(n, k) p^k (1 - p)^(n - k)``, ``p = 1 - exp(-zeta)``."""
    if n < 0 or zeta < 0:
        raise ValueError("n and zeta must be non-negative")
    p = _click_probability(zeta)
    q = math.exp(-zeta)
    return np.array([math.comb(n, k) * p**k * q ** (n - k) for k in range(n + 1)])


def photodetect_closed_form(psi, zeta: float) -> np.ndarray:
    """Magnitudes of the continuum-limit joint amplitudes.

    Entry ``[r, m]`` is the magnitude of the component with ``r`` photons left
    in the mode and ``m`` counts recorded:
    ``|c_(r+m)| sqrt(C(r+m, m)) (1 - e^-zeta)^(m/2) e^(-zeta r / 2)``.
    Phases depend on the absorber details and are not modelled.
    """
    c = np.abs(np.asarray(psi, dtype=complex).reshape(-1))
    d = c.size
    p = _click_probability(zeta)
    out = np.zeros((d, d))
    for n in range(d):
        for m in range(n + 1):
            out[n - m, m] = c[n] * math.sqrt(math.comb(n, m) * p**m) * math.exp(-zeta * (n - m) / 2)
    return out


def collective_commutator_defect(N: int, g: float, tau: float, max_count: int | None = None) -> np.ndarray:
    """Deviation of ``[B, B^dagger]`` from 1 on each excitation sector.

    ``B^dagger`` is the normalised collective absorber excitation that the
    detector writes a single photon into.  On the state with the first ``n``
    absorbers excited the commutator takes the value
    ``x / (e^x - 1) * (1 - 2 (1 - e^(-n x)) / (1 - e^(-N x)))`` with
    ``x = g^2 tau^2``.  Entry ``n`` of the result is ``|value - 1|`` for
    ``n = 0..max_count`` (default ``N``).
    """
    x = g**2 * tau**2
    if x <= 0:
        raise ValueError("g * tau must be positive")
    top = N if max_count is None else min(int(max_count), N)
    n = np.arange(top + 1)
    pref = x / math.expm1(x)
    val = pref * (1.0 - 2.0 * (-np.expm1(-n * x)) / (-math.expm1(-N * x)))
    return np.abs(val - 1.0)


# --------------------------------------------------------------------------
# homodyne detection


@dataclass(frozen=True)
class HomodyneConfig:
    """Local oscillator ``beta = |beta| exp(-i phi)``."""

    beta_abs: float
    phi: float = 0.0

    @property
    def beta(self) -> complex:
        return self.beta_abs * np.exp(-1j * self.phi)


@lru_cache(maxsize=None)
def _bs_block(N: int) -> np.ndarray:
    # generator a^dag b - a b^dag on span{|k, N-k>}
    G = np.zeros((N + 1, N + 1))
    for k in range(N):
        amp = math.sqrt((k + 1) * (N - k))
        G[k + 1, k] = amp
        G[k, k + 1] = -amp
    U = expm(np.pi / 4 * G)
    U.setflags(write=False)
    return U


def beam_splitter(state, tol: float = 1e-12) -> np.ndarray:
    """Balanced beam splitter ``exp(pi/4 (a^dag b - a b^dag))`` on two modes.

    ``state[n_a, n_b]`` are two-mode Fock amplitudes.  The map conserves total
    photon number and is applied block by block.  Amplitude above the joint
    cutoff ``n_a + n_b <= shape - 1`` raises :class:`NumericalGuardError`.
    """
    amp = np.asarray(state, dtype=complex)
    if amp.ndim != 2 or amp.shape[0] != amp.shape[1]:
        raise ValueError("two-mode state must be a square array")
    c = amp.shape[0] - 1
    na, nb = np.indices(amp.shape)
    if np.any(np.abs(amp[na + nb > c]) > tol):
        raise NumericalGuardError("two-mode state exceeds the joint excitation cutoff")
    out = np.zeros_like(amp)
    for N in range(c + 1):
        k = np.arange(N + 1)
        out[k, N - k] = _bs_block(N) @ amp[k, N - k]
    return out


def _coeff_table(na: int, nb: int, kmax: int) -> list[int]:
    """Integer coefficients of ``x^k`` in ``(1 + x)^na (1 - x)^nb`` for ``k <= kmax``."""
    return [
        sum(math.comb(na, i) * math.comb(nb, k - i) * (-1) ** (k - i) for i in range(max(0, k - nb), min(k, na) + 1))
        for k in range(kmax + 1)
    ]


def _exact_element(c: np.ndarray, beta: complex, na: int, nb: int, coeffs) -> complex:
    N = na + nb
    b_abs = abs(beta)
    b_arg = np.angle(beta)
    kk = np.arange(min(N, c.size - 1) + 1)
    K = np.array([float(coeffs[k]) for k in kk])
    ck = c[kk]
    keep = (K != 0) & (ck != 0)
    if b_abs == 0:
        keep &= kk == N
    if not np.any(keep):
        return 0j
    kk, K, ck = kk[keep], K[keep], ck[keep]
    base = -0.5 * b_abs**2 - 0.5 * (N * math.log(2) + gammaln(na + 1) + gammaln(nb + 1))
    logpow = np.where(kk == N, 0.0, (N - kk) * (math.log(b_abs) if b_abs > 0 else 0.0))
    logmag = base + logpow + 0.5 * gammaln(kk + 1) + np.log(np.abs(K)) + np.log(np.abs(ck))
    phase = np.angle(ck) + (N - kk) * b_arg + np.where(K < 0, np.pi, 0.0)
    return complex(np.sum(np.exp(logmag + 1j * phase)))


def homodyne_matrix_element_exact(psi, beta: complex, N: int, D: float) -> complex:
    """``<N, D| U_BS |psi, beta>`` for a truncated signal state ``psi``.

    Uses ``e^(-|beta|^2/2) <0|(beta + a)^(N/2+D) (beta - a)^(N/2-D)|psi>``
    divided by ``sqrt(2^N (N/2+D)! (N/2-D)!)``, expanded in powers of ``a``
    with integer coefficients and summed in the log domain.
    """
    na2 = N + 2 * D
    if na2 != int(na2) or int(na2) % 2 or not 0 <= na2 <= 2 * N:
        raise ValueError("N/2 + D must be an integer between 0 and N")
    na = int(na2) // 2
    nb = N - na
    c = np.asarray(psi, dtype=complex).reshape(-1)
    return _exact_element(c, complex(beta), na, nb, _coeff_table(na, nb, min(N, c.size - 1)))


def homodyne_amplitudes_exact(psi, beta: complex, n_max: int) -> np.ndarray:
    """Table ``F[n_a, n_b]`` of exact output amplitudes with ``n_a + n_b <= n_max``."""
    c = np.asarray(psi, dtype=complex).reshape(-1)
    kmax = c.size - 1
    F = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    # coefficient lists built incrementally: (1+x)^na (1-x)^nb
    row = [[1] + [0] * kmax]  # na = 0, nb = 0
    for N in range(n_max + 1):
        if N > 0:
            prev = row
            row = []
            for na in range(N + 1):
                if na == 0:
                    p = prev[0]
                    row.append([p[k] - (p[k - 1] if k else 0) for k in range(kmax + 1)])
                else:
                    p = prev[na - 1]
                    row.append([p[k] + (p[k - 1] if k else 0) for k in range(kmax + 1)])
        for na in range(N + 1):
            F[na, N - na] = _exact_element(c, complex(beta), na, N - na, row[na])
    return F


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0..h_n_max`` at ``x``, by recurrence."""
    x = np.asarray(x, dtype=float)
    h = np.zeros((n_max + 1,) + x.shape)
    h[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if n_max >= 1:
        h[1] = math.sqrt(2.0) * x * h[0]
    for n in range(1, n_max):
        h[n + 1] = math.sqrt(2.0 / (n + 1)) * x * h[n] - math.sqrt(n / (n + 1)) * h[n - 1]
    return h


def quadrature_wavefunction(psi, phi: float, x) -> np.ndarray:
    """``<x_phi|psi> = sum_n e^(-i n phi) h_n(x) <n|psi>``.

    ``x_phi = (e^(-i phi) a + e^(i phi) a^dagger) / sqrt 2``.
    """
    c = np.asarray(psi, dtype=complex).reshape(-1)
    h = hermite_functions(c.size - 1, x)
    ph = np.exp(-1j * phi * np.arange(c.size)) * c
    return np.tensordot(ph, h, axes=(0, 0))


def homodyne_regime_ok(beta_abs: float, N: float, D: float) -> bool:
    """Whether ``(N, D)`` sits where the large-oscillator asymptotics apply."""
    b2 = beta_abs**2
    return beta_abs >= 4 and abs(N - b2) <= 4 * beta_abs and abs(D) <= b2 / 8


def homodyne_matrix_element_asymptotic(psi, cfg: HomodyneConfig, N: float, D: float) -> tuple[complex, bool]:
    """Large-``|beta|`` approximation of the output amplitude.

    Returns ``(value, warning)``; ``warning`` is true when ``(N, D)`` is outside
    the regime ``|D| << |beta|^2``, ``N ~ |beta|^2`` where the formula holds.

    With ``beta = |beta| e^(-i phi)`` the detector resolves the quadrature
    ``x_(-phi)``, so the signal wavefunction is taken at angle ``-phi``.
    """
    b = cfg.beta_abs
    if b <= 0:
        raise ValueError("asymptotic element needs a non-zero local oscillator")
    x = D * math.sqrt(2.0) / b
    amp = (
        np.exp(-1j * N * cfg.phi)
        * np.pi**-0.25
        / b
        * math.exp(-((N - b**2) ** 2) / (4 * b**2))
        * quadrature_wavefunction(psi, -cfg.phi, x)
    )
    return complex(amp), not homodyne_regime_ok(b, N, D)


def homodyne_distributions(psi, cfg: HomodyneConfig, N_grid=None, D_grid=None):
    """Asymptotic marginals of the total count ``N`` and half-difference ``D``.

    ``p(N)`` is the Gaussian with mean and variance ``|beta|^2``; ``p(D)`` is
    ``|psi(D sqrt 2 / |beta|)|^2``.  Both are normalised on their grids.
    Returns ``(N_grid, pN, D_grid, pD)``.
    """
    b = cfg.beta_abs
    if b <= 0:
        raise ValueError("beta must be non-zero")
    if N_grid is None:
        N_grid = np.arange(max(0, math.floor(b**2 - 12 * b)), math.ceil(b**2 + 12 * b) + 1)
    if D_grid is None:
        R = math.ceil(8 * b)
        D_grid = np.arange(-R, R + 1)
    N_grid = np.asarray(N_grid, dtype=float)
    D_grid = np.asarray(D_grid, dtype=float)
    pN = np.exp(-((N_grid - b**2) ** 2) / (2 * b**2))
    pN /= pN.sum()
    pD = np.abs(quadrature_wavefunction(psi, -cfg.phi, D_grid * math.sqrt(2.0) / b)) ** 2
    pD /= pD.sum()
    return N_grid, pN, D_grid, pD


# --------------------------------------------------------------------------
# qubit readout


@dataclass(frozen=True)
class FluorescenceConfig:
    """``n`` probe photons, each scattered by ``g`` with probability ``p``."""

    p: float
    n: int

    def __post_init__(self):
        if not 0 <= self.p <= 1 or self.n < 0:
            raise ValueError("need 0 <= p <= 1 and n >= 0")


@dataclass(frozen=True)
class FluorescenceResult:
    """Outcome summary for fluorescence readout.

    ``count_amplitudes_g[m]`` is the amplitude for ``m`` detected photons on the
    ``g`` branch; the ``e`` branch only contributes to ``m = 0``.  The binned
    state has outcome register value 0 for ``g`` (at least one count) and 1
    for ``e`` (no counts).
    """

    count_amplitudes_g: np.ndarray = field(repr=False)
    count_distribution: np.ndarray = field(repr=False)
    p_false_negative: float
    dark_g_weight: float
    binned_state: Ket = field(repr=False)


def fluorescence_measure(c_g: complex, c_e: complex, cfg: FluorescenceConfig) -> FluorescenceResult:
    """Readout of ``c_g |g> + c_e |e>`` by counting scattered photons.

    ``p_false_negative`` is reported as ``|c_g|^2 (1 - p)^(n/2)``.  The squared
    norm of the no-count component of the ``g`` branch is reported separately
    as ``dark_g_weight = |c_g|^2 (1 - p)^n``.
    """
    norm = abs(c_g) ** 2 + abs(c_e) ** 2
    if abs(norm - 1) > 1e-10:
        raise ValueError("qubit amplitudes must be normalised")
    n, p = cfg.n, cfg.p
    m = np.arange(n + 1)
    binom = np.array([math.comb(n, k) for k in m], dtype=float)
    amps = c_g * np.sqrt(binom * p**m * (1 - p) ** (n - m))
    dist = np.abs(amps) ** 2
    dist[0] += abs(c_e) ** 2
    dark = abs(c_g) ** 2 * (1 - p) ** n
    layout = RegisterLayout.of(("qubit", 2), ("R", 2, STINESPRING))
    # qubit basis: 0 = g, 1 = e
    v = np.zeros(4, dtype=complex)
    v[layout.flat_index({"qubit": 0, "R": 0})] = c_g * math.sqrt(max(0.0, 1 - (1 - p) ** n))
    v[layout.flat_index({"qubit": 0, "R": 1})] = c_g * (1 - p) ** (n / 2)
    v[layout.flat_index({"qubit": 1, "R": 1})] = c_e
    return FluorescenceResult(amps, dist, abs(c_g) ** 2 * (1 - p) ** (n / 2), dark, Ket(layout, v))


@dataclass(frozen=True)
class DispersiveConfig:
    """Coherent probe amplitude ``alpha`` (real, >= 0) and dispersive phase ``theta``."""

    alpha: float
    theta: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if math.sin(self.theta) == 0:
            raise ValueError("theta must not be a multiple of pi: the branches would coincide")


@dataclass(frozen=True)
class DispersiveResult:
    branch_amplitudes: tuple[complex, complex]
    p_error: float
    p_outcome: tuple[float, float]


def dispersive_error(alpha: float, theta: float) -> float:
    """``erfc(alpha sqrt 2 sin theta) / 2``: chance the momentum sign misassigns a branch."""
    return 0.5 * float(erfc(alpha * math.sqrt(2.0) * abs(math.sin(theta))))


def dispersive_readout(c_g: complex, c_e: complex, cfg: DispersiveConfig) -> DispersiveResult:
    """Dispersive readout with momentum-sign binning (``p > 0`` means ``g``).

    The cavity branches are ``|alpha e^(2 i theta)>`` for ``g`` and
    ``|alpha e^(-2 i theta)>`` for ``e``.
    """
    norm = abs(c_g) ** 2 + abs(c_e) ** 2
    if abs(norm - 1) > 1e-10:
        raise ValueError("qubit amplitudes must be normalised")
    a, th = cfg.alpha, cfg.theta
    err = dispersive_error(a, th)
    pg = abs(c_g) ** 2 * (1 - err) + abs(c_e) ** 2 * err
    pe = abs(c_e) ** 2 * (1 - err) + abs(c_g) ** 2 * err
    return DispersiveResult((a * np.exp(2j * th), a * np.exp(-2j * th)), err, (pg, pe))
