"""Acceptance checks shared by the test suite and the ``suite`` CLI command.

Each check returns a :class:`CriterionResult`.  Oracles used here are kept
independent of the code they check: binomial weights come from
``scipy.stats``, the error function from a hand-written series and continued
fraction, the beam splitter from a direct Fock-space evolution, and feedback
from explicit matrix products.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binom

from . import decoherence as dec
from . import detectors as det
from . import sterngerlach as sg
from .hilbert import RegisterLayout, partial_trace, reorder, trace_distance
from .protocol import (
    Condition,
    CondMeasure,
    Feedback,
    Measure,
    ProtocolSpec,
    Unitary,
    compiled_unitary,
    run_dilated,
    sample_outcomes,
)
from .spectral import (
    PAULI,
    apply_channel,
    apply_selective,
    kraus_from_observable,
    measurement_unitary,
    spectral_decompose,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.2f} s) {self.detail}"


def _timed(number: int, name: str, limit: float | None, fn: Callable[[], tuple[bool, str]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt >= limit:
        ok = False
        detail += f"; runtime {dt:.1f} s exceeds {limit:.0f} s"
    return CriterionResult(number, name, ok, detail, dt)


def _coherent(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    logf = np.array([math.lgamma(k + 1) for k in n])
    return np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logf) * alpha**n


# -- 1 ---------------------------------------------------------------------


def check_photodetection() -> tuple[bool, str]:
    worst = 0.0
    for n in range(1, 6):
        for zeta in (0.5, 2.0, 50.0):
            ref = binom.pmf(np.arange(n + 1), n, -math.expm1(-zeta))
            worst = max(worst, float(np.abs(det.photocount_distribution(n, zeta) - ref).max()))
    ok = worst <= 1e-12
    tvs, bounds = [], []
    for N, gt in ((4, 0.1), (8, 0.0707), (12, 0.0577)):
        cfg = det.PhotonCounterConfig(N, gt, 1.0, cutoff=3)
        tv = 0.0
        for n in (1, 2, 3):
            psi = np.zeros(4)
            psi[n] = 1.0
            pe = det.exact_count_distribution(det.photodetect_exact(psi, cfg))[: n + 1]
            tv = max(tv, 0.5 * float(np.abs(pe - det.photocount_distribution(n, cfg.zeta)).sum()))
        tvs.append(tv)
        bounds.append(5 * N * gt**3)
    ok = ok and all(t <= b for t, b in zip(tvs, bounds)) and tvs[0] > tvs[1] > tvs[2]
    return ok, f"max|p-binom|={worst:.1e}; TV={['%.2e' % t for t in tvs]} vs bound={['%.2e' % b for b in bounds]}"


# -- 2 ---------------------------------------------------------------------


def check_homodyne() -> tuple[bool, str]:
    b = 8.0
    n_max = 170
    vac = np.array([1.0 + 0j])
    F = det.homodyne_amplitudes_exact(vac, b, n_max)
    tot = np.add.outer(np.arange(n_max + 1), np.arange(n_max + 1))
    pN = np.bincount(tot.ravel(), weights=(np.abs(F) ** 2).ravel())[: n_max + 1]
    n = np.arange(n_max + 1)
    mean = float(n @ pN / pN.sum())
    var = float(((n - mean) ** 2) @ pN / pN.sum())
    Ng, pNg, _, _ = det.homodyne_distributions(vac, det.HomodyneConfig(b))
    mean_g = float(Ng @ pNg)
    var_g = float(((Ng - mean_g) ** 2) @ pNg)
    moments_ok = max(abs(mean - b**2), abs(var - b**2), abs(mean_g - b**2), abs(var_g - b**2)) <= 1e-6

    psi = _coherent(1.0, 20)
    Fc = det.homodyne_amplitudes_exact(psi, b, n_max)
    comp_vac = float((np.abs(F) ** 2).sum())
    comp_coh = float((np.abs(Fc) ** 2).sum())
    comp_ok = abs(comp_vac - 1) <= 1e-6 and abs(comp_coh - 1) <= 1e-6
    na, nb = np.unravel_index(np.argmax(np.abs(Fc)), Fc.shape)
    asym, _ = det.homodyne_matrix_element_asymptotic(psi, det.HomodyneConfig(b), na + nb, (na - nb) / 2)
    rel = abs(asym - Fc[na, nb]) / abs(Fc[na, nb])
    ok = moments_ok and comp_ok and rel < 0.05
    return ok, (
        f"vacuum pN mean/var exact={mean:.9f}/{var:.9f} gaussian={mean_g:.9f}/{var_g:.9f}; "
        f"completeness={comp_vac:.10f},{comp_coh:.10f}; asymptotic rel err at peak={rel:.2%}"
    )


# -- 3 ---------------------------------------------------------------------


def random_observable(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Random Hermitian matrix whose spectrum usually has degeneracies."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(z)
    n_levels = int(rng.integers(1, dim + 1))
    levels = rng.normal(size=n_levels) * 3
    w = levels[rng.integers(0, n_levels, size=dim)]
    return (q * w) @ q.conj().T


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    r = g @ g.conj().T
    return r / np.trace(r)


def check_algebra(n_obs: int = 200, seed: int = 2024) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    err = dict.fromkeys(["proj", "kraus", "unitary", "channel", "sum_p", "repeat"], 0.0)
    for _ in range(n_obs):
        d = int(rng.integers(1, 9))
        O = random_observable(rng, d)
        sd = spectral_decompose(O)
        I = np.eye(d)
        P = sd.projectors
        e = np.abs(sum(P) - I).max()
        for i, a in enumerate(P):
            for j, bb in enumerate(P):
                e = max(e, np.abs(a @ bb - (a if i == j else 0)).max())
        e = max(e, np.abs(sd.reconstruct() - O).max())
        err["proj"] = max(err["proj"], e)
        ks = kraus_from_observable(sd)
        err["kraus"] = max(err["kraus"], np.abs(ks.gram() - I).max())
        mu = measurement_unitary(sd)
        U = mu.unitary.data
        err["unitary"] = max(err["unitary"], np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())
        rho = random_density(rng, d)
        oracle = sum(k @ rho @ k.conj().T for k in ks.operators)
        err["channel"] = max(err["channel"], np.abs(apply_channel(mu, rho).data - oracle).max())
        ps = []
        for m in range(sd.n_outcomes):
            p, rho_m = apply_selective(mu, rho, m)
            ps.append(p)
            if rho_m is not None:
                p2, _ = apply_selective(mu, rho_m, m)
                err["repeat"] = max(err["repeat"], abs(p2 - 1))
        err["sum_p"] = max(err["sum_p"], abs(sum(ps) - 1))
    limits = {"proj": 1e-9, "kraus": 1e-9, "unitary": 1e-9, "channel": 1e-10, "sum_p": 1e-10, "repeat": 1e-10}
    ok = all(err[k] <= limits[k] for k in limits)
    return ok, ", ".join(f"{k}={v:.1e}" for k, v in err.items())


# -- 4 ---------------------------------------------------------------------

BELL = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
_PHYS2 = RegisterLayout.of(("a", 2), ("b", 2))


def bell_protocol(obs_a: str, obs_b: str, b_first: bool = False) -> ProtocolSpec:
    ma = Measure(PAULI[obs_a], ("a",), "A")
    mb = Measure(PAULI[obs_b], ("b",), "B")
    return ProtocolSpec(_PHYS2, (mb, ma) if b_first else (ma, mb))


def bell_expected(obs_b: str) -> np.ndarray:
    """Expected dilated state on ``a, b, A, B`` after measuring Z on a and ``obs_b`` on b."""
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    e = np.eye(2)
    if obs_b == "Z":
        return (np.kron(np.kron(e[0], e[0]), np.kron(e[0], e[0])) + np.kron(np.kron(e[1], e[1]), np.kron(e[1], e[1]))) / math.sqrt(2)
    # register B holds 0 for |+> and 1 for |->
    terms = [
        (1, e[0], plus, 0, 0),
        (1, e[0], minus, 0, 1),
        (1, e[1], plus, 1, 0),
        (-1, e[1], minus, 1, 1),
    ]
    return 0.5 * sum(s * np.kron(np.kron(a, b), np.kron(e[A], e[B])) for s, a, b, A, B in terms)


def check_bell() -> tuple[bool, str]:
    details = []
    ok = True
    for obs_b in ("Z", "X"):
        run = run_dilated(bell_protocol("Z", obs_b), BELL)
        exp = bell_expected(obs_b)
        dev = float(np.abs(run.final_state.data - np.outer(exp, exp.conj())).max())
        marg = max(
            float(np.abs(partial_trace(run.final_state, [lab]).data - np.eye(2) / 2).max()) for lab in ("a", "b", "A", "B")
        )
        swapped = run_dilated(bell_protocol("Z", obs_b, b_first=True), BELL)
        perm = float(np.abs(reorder(swapped.final_state, run.spec.layout.labels).data - run.final_state.data).max())
        ok = ok and dev <= 1e-12 and marg <= 1e-12 and perm < 1e-10
        details.append(f"Z{obs_b}: state dev={dev:.1e} marginals={marg:.1e} order={perm:.1e}")
        if obs_b == "Z":
            joint = run.joint_outcomes()
            corr = joint[(0, 0)] + joint[(1, 1)]
            ok = ok and abs(corr - 1) <= 1e-12
            details.append(f"P(A=B)={corr:.15f}")
    return ok, "; ".join(details)


# -- 5 ---------------------------------------------------------------------


def check_decoherence(seed: int = 7) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    O = np.diag([1.0, 1.0, -2.0]).astype(complex)
    sd = spectral_decompose(O)
    rho = random_density(rng, 3)
    # minimal register from an actual dilated run
    spec = ProtocolSpec(RegisterLayout.of(("sys", 3)), (Measure(O, ("sys",), "M"),))
    run = run_dilated(spec, rho)
    minimal_blocks = dec.SymmetryBlocks.uniform(sd.n_outcomes, 1)
    exact_min = dec.dephase_exact(run.final_state, minimal_blocks)
    oracle_min = sum(np.kron(P @ rho @ P, np.diag(np.eye(sd.n_outcomes)[m])) for m, P in enumerate(sd.projectors))
    err_min = float(np.abs(exact_min.data - oracle_min).max())
    # register with two states per outcome
    big, blocks = dec.nonminimal_dilated(rho, sd, 2, rng)
    exact = dec.dephase_exact(big, blocks)
    oracle = sum(np.kron(P @ rho @ P, blocks.projector(m) / 2) for m, P in enumerate(sd.projectors))
    err = float(np.abs(exact.data - oracle).max())
    phys_before = partial_trace(big, ["sys"]).data
    inv = float(np.abs(partial_trace(exact, ["sys"]).data - phys_before).max())
    tds = []
    inv_mc = 0.0
    for S in (100, 1000, 10000):
        mc = dec.dephase_sampled(big, blocks, S, seed=S)
        tds.append(trace_distance(mc, exact))
        inv_mc = max(inv_mc, float(np.abs(partial_trace(mc, ["sys"]).data - phys_before).max()))
    mc_ok = all(td < 5 / math.sqrt(S) for td, S in zip(tds, (100, 1000, 10000)))
    ok = err_min <= 1e-10 and err <= 1e-10 and inv <= 1e-12 and inv_mc <= 1e-12 and mc_ok
    return ok, (
        f"exact vs mixture={max(err_min, err):.1e}; trace distances={['%.3g' % t for t in tds]} "
        f"vs {[round(5 / math.sqrt(S), 3) for S in (100, 1000, 10000)]}; physical invariance={max(inv, inv_mc):.1e}"
    )


# -- 6 ---------------------------------------------------------------------


def check_stern_gerlach() -> tuple[bool, str]:
    cfg = sg.SGConfig(M=1.0, b=0.5, mu_B=1.0, B0=10.0, delta=0.2, z0=0.0, v=1.0, L=1.0)
    c = (math.sqrt(0.3), math.sqrt(0.7) * np.exp(0.4j))
    t = cfg.transit_time
    r = sg.sg_split_step(cfg, c, n_steps=200)
    mean_err = prob_err = var_err = 0.0
    for i, s in enumerate(sg.SPINS):
        pred = sg.sg_heisenberg_z(cfg, t, s)
        mean_err = max(mean_err, abs(r.branch_mean(s) - pred) / abs(pred - cfg.z0))
        prob_err = max(prob_err, abs(r.branch_probability(s) - abs(c[i]) ** 2))
        var_err = max(var_err, abs(r.branch_variance(s) / cfg.width(t) ** 2 - 1))
    out = sg.sg_outcome_distribution(cfg, c)
    mis = max(
        abs(r.side_probability(1, False, cfg.z0) / abs(c[0]) ** 2 - out.misbinning),
        abs(r.side_probability(-1, True, cfg.z0) / abs(c[1]) ** 2 - out.misbinning),
    )
    runs = [sg.sg_split_step(cfg, c, n_steps=n).psi for n in (10, 20, 40)]
    ratio = float(np.linalg.norm(runs[0] - runs[1]) / np.linalg.norm(runs[1] - runs[2]))
    ok = mean_err <= 1e-4 and prob_err <= 1e-8 and mis <= 1e-4 and abs(ratio - 4) <= 0.3 and var_err <= 1e-6
    return ok, (
        f"<z> rel err={mean_err:.1e}; |c_s|^2 err={prob_err:.1e}; misbinning err={mis:.1e}; "
        f"Strang ratio={ratio:.4f}; variance vs delta^2(1+(t/2M delta^2)^2) rel err={var_err:.1e}"
    )


# -- 7 ---------------------------------------------------------------------


def erfc_oracle(x: float) -> float:
    """Complementary error function from a Taylor series (x < 2.5) or a continued fraction."""
    if x < 0:
        return 2.0 - erfc_oracle(-x)
    if x < 2.5:
        # erf(x) = 2/sqrt(pi) sum_n (-1)^n x^(2n+1) / (n! (2n+1))
        term = x
        total = x
        n = 0
        while abs(term) > 1e-17 * abs(total):
            n += 1
            term *= -x * x / n
            total += term / (2 * n + 1)
        return 1.0 - 2.0 / math.sqrt(math.pi) * total
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), evaluated by Lentz
    tiny = 1e-300
    f = x
    C = x
    D = 0.0
    k = 1
    while True:
        a = k / 2.0
        D = x + a * D
        D = 1.0 / (D if D != 0 else tiny)
        C = x + a / C
        delta = C * D
        f *= delta
        k += 1
        if abs(delta - 1.0) < 1e-16 or k > 10000:
            break
    return math.exp(-x * x) / math.sqrt(math.pi) / f


def check_qubit_readout() -> tuple[bool, str]:
    fl = det.fluorescence_measure(1.0, 0.0, det.FluorescenceConfig(p=0.5, n=10))
    fl_ok = fl.p_false_negative == 0.03125
    alphas = np.linspace(0.25, 2.5, 5)
    thetas = np.linspace(np.pi / 10, np.pi / 2, 4)
    worst = 0.0
    for a in alphas:
        for th in thetas:
            ref = 0.5 * erfc_oracle(a * math.sqrt(2) * math.sin(th))
            got = det.dispersive_readout(1.0, 0.0, det.DispersiveConfig(a, th)).p_error
            worst = max(worst, abs(got - ref) / ref)
    limit = det.dispersive_error(1e-9, np.pi / 2)
    xs = np.linspace(0.0, 4.0, 200)
    seq = [det.dispersive_error(x, np.pi / 2) for x in xs]
    mono = all(b < a for a, b in zip(seq, seq[1:]))
    ok = fl_ok and worst <= 1e-10 and abs(limit - 0.5) < 1e-8 and mono
    return ok, (
        f"p_false_negative={fl.p_false_negative!r}; max rel |p_error - oracle|={worst:.1e} on 20 points; "
        f"small-signal limit={limit:.10f}; monotone={mono}"
    )


# -- 8 ---------------------------------------------------------------------


def _ry(t: float) -> np.ndarray:
    return np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]], dtype=complex)


def feedback_protocol() -> ProtocolSpec:
    """Three measurements with two rounds of feedback on two qubits."""
    return ProtocolSpec(
        _PHYS2,
        (
            Unitary(_ry(1.1), ("a",)),
            Measure(PAULI["Z"], ("a",), "A"),
            Feedback(Condition.outcome("A", 1), _hadamard(), ("b",)),
            Measure(PAULI["X"], ("b",), "B"),
            Feedback(Condition(any_of=({"A": 0, "B": 1}, {"A": 1, "B": 0})), _ry(0.7), ("a",)),
            CondMeasure(Condition(any_of=({"B": 0},)), np.kron(PAULI["Z"], PAULI["Z"]), ("a", "b"), "C"),
        ),
    )


def _hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def check_adaptive(shots: int = 10_000, seed: int = 11) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    spec = feedback_protocol()
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi /= np.linalg.norm(psi)
    joint = run_dilated(spec, psi).joint_outcomes()
    rec = sample_outcomes(spec, psi, seed, shots)
    dims = spec.layout.sub(spec.ss_labels).dims
    idx = np.ravel_multi_index(rec.T, dims)
    freq = np.bincount(idx, minlength=int(np.prod(dims))) / shots
    p = np.array([joint[k] for k in sorted(joint)])
    tv = 0.5 * float(np.abs(freq - p).sum())

    # measure Z then apply X if the outcome was 1, against explicit matrix products
    one = ProtocolSpec(
        RegisterLayout.of(("q", 2)),
        (Measure(PAULI["Z"], ("q",), "A"), Feedback(Condition.outcome("A", 1), PAULI["X"], ("q",))),
    )
    P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    cnot = np.kron(P0, np.eye(2)) + np.kron(P1, PAULI["X"])
    fb = np.kron(np.eye(2), P0) + np.kron(PAULI["X"], P1)
    W_hand = fb @ cnot
    W = compiled_unitary(one).data
    err = float(np.abs(W - W_hand).max())
    for _ in range(20):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        out = W_hand @ np.kron(v, [1, 0])
        err = max(err, float(np.abs(run_dilated(one, v).final_state.data - np.outer(out, out.conj())).max()))
    ok = tv < 5 / math.sqrt(shots) and err <= 1e-10
    return ok, f"TV={tv:.4f} (limit {5 / math.sqrt(shots):.3f}, S={shots}); compilation vs hand oracle={err:.1e}"


CRITERIA = [
    (1, "binomial photodetection", 30.0, check_photodetection),
    (2, "homodyne detection", 60.0, check_homodyne),
    (3, "measurement algebra", 20.0, check_algebra),
    (4, "Bell scenarios", None, check_bell),
    (5, "decoherence", 60.0, check_decoherence),
    (6, "Stern-Gerlach", 60.0, check_stern_gerlach),
    (7, "fluorescence and dispersive readout", None, check_qubit_readout),
    (8, "adaptive engine equivalence", None, check_adaptive),
]


def run_criterion(number: int) -> CriterionResult:
    num, name, limit, fn = next(c for c in CRITERIA if c[0] == number)
    return _timed(num, name, limit, fn)


def run_all() -> list[CriterionResult]:
    return [run_criterion(c[0]) for c in CRITERIA]
