import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import eval_hermite

from stinespring.detectors import (
    DispersiveConfig,
    FluorescenceConfig,
    HomodyneConfig,
    PhotonCounterConfig,
    beam_splitter,
    collective_commutator_defect,
    dispersive_error,
    dispersive_readout,
    exact_count_distribution,
    fluorescence_measure,
    hermite_functions,
    homodyne_amplitudes_exact,
    homodyne_distributions,
    homodyne_matrix_element_asymptotic,
    homodyne_matrix_element_exact,
    homodyne_regime_ok,
    photocount_distribution,
    photodetect_closed_form,
    photodetect_exact,
    quadrature_wavefunction,
)
from stinespring.hilbert import NumericalGuardError


def fock(n, d):
    v = np.zeros(d, dtype=complex)
    v[n] = 1
    return v


def coherent(alpha, d):
    n = np.arange(d)
    logf = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - logf / 2)
    return mag * np.exp(1j * n * np.angle(alpha))


class TestPhotonCounting:
    def test_single_photon_no_click_probability(self):
        # one photon passes four absorbers unabsorbed: cos(g tau)^8
        ket = photodetect_exact(fock(1, 2), PhotonCounterConfig(N=4, g=1.0, tau=0.1, cutoff=1))
        assert exact_count_distribution(ket)[0] == pytest.approx(0.96072521734230394890751658913, rel=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 6))
    def test_exact_model_is_norm_preserving(self, seed, N):
        rng = np.random.default_rng(seed)
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        ket = photodetect_exact(psi, PhotonCounterConfig(N=N, g=0.7, tau=0.3, cutoff=3))
        assert ket.norm() == pytest.approx(1.0, abs=1e-12)
        assert exact_count_distribution(ket).sum() == pytest.approx(1.0, abs=1e-12)

    def test_photon_number_conserved_with_absorbers(self):
        ket = photodetect_exact(fock(3, 4), PhotonCounterConfig(N=5, g=1.0, tau=0.4, cutoff=3))
        t = ket.as_tensor()
        excit = np.indices(t.shape)
        total = excit[0] + excit[1:].sum(axis=0)
        assert np.all(np.abs(t[total != 3]) < 1e-15)

    def test_exact_approaches_binomial(self):
        zeta = 1.0
        tvs = []
        for N in (4, 8, 12):
            cfg = PhotonCounterConfig(N=N, g=1.0, tau=math.sqrt(zeta / N), cutoff=3)
            p = exact_count_distribution(photodetect_exact(fock(3, 4), cfg))[:4]
            tvs.append(0.5 * np.abs(p - photocount_distribution(3, zeta)).sum())
        assert tvs[0] > tvs[1] > tvs[2]

    def test_binomial_values(self):
        p = photocount_distribution(2, math.log(2))
        np.testing.assert_allclose(p, [0.25, 0.5, 0.25], atol=1e-15)
        with pytest.raises(ValueError):
            photocount_distribution(-1, 1.0)

    def test_closed_form_matches_binomial_mixture(self):
        c = np.array([0.5, 0.5, 0.5, 0.5])
        zeta = 0.8
        mags = photodetect_closed_form(c, zeta)
        counts = (mags**2).sum(axis=0)
        expected = sum(0.25 * np.pad(photocount_distribution(n, zeta), (0, 3 - n)) for n in range(4))
        np.testing.assert_allclose(counts, expected, atol=1e-14)

    def test_too_many_absorbers(self):
        with pytest.raises(ValueError):
            photodetect_exact(fock(0, 2), PhotonCounterConfig(N=13, g=1, tau=0.1, cutoff=1))

    def test_input_beyond_cutoff(self):
        with pytest.raises(NumericalGuardError):
            photodetect_exact(fock(3, 4), PhotonCounterConfig(N=2, g=1, tau=0.1, cutoff=2))


class TestCommutatorDefect:
    @staticmethod
    def dense_defect(N, x):
        # B = sum_k c_k sigma^-_k with |c_k|^2 = x e^(-k x) / (1 - e^(-N x))
        w = x * np.exp(-x * np.arange(1, N + 1)) / (1 - np.exp(-N * x))
        sm = np.array([[0, 1], [0, 0]])
        B = np.zeros((2**N, 2**N))
        for k in range(N):
            ops = [np.eye(2)] * N
            ops[k] = sm
            term = ops[0]
            for o in ops[1:]:
                term = np.kron(term, o)
            B += math.sqrt(w[k]) * term
        comm = B @ B.T - B.T @ B
        out = []
        for n in range(N + 1):
            idx = int("1" * n + "0" * (N - n), 2) if N else 0
            out.append(abs(comm[idx, idx] - 1))
        return np.array(out)

    @pytest.mark.parametrize("N,x", [(3, 0.2), (4, 0.05), (5, 0.5)])
    def test_matches_dense_construction(self, N, x):
        np.testing.assert_allclose(collective_commutator_defect(N, 1.0, math.sqrt(x)), self.dense_defect(N, x), atol=1e-13)

    def test_frozen_vacuum_value(self):
        assert collective_commutator_defect(4, 0.1, 1.0)[0] == pytest.approx(0.00499166668055552248685515853022, rel=1e-12)

    def test_defect_shrinks_with_more_absorbers_on_shared_sectors(self):
        zeta = 1.0
        small = collective_commutator_defect(4, 1.0, math.sqrt(zeta / 4), max_count=4)
        large = collective_commutator_defect(16, 1.0, math.sqrt(zeta / 16), max_count=4)
        assert np.all(large[1:4] < small[1:4])
        assert large[0] < small[0]

    def test_rejects_zero_coupling(self):
        with pytest.raises(ValueError):
            collective_commutator_defect(3, 0.0, 1.0)


class TestBeamSplitter:
    def test_single_photon(self):
        s = np.zeros((2, 2))
        s[1, 0] = 1
        out = beam_splitter(s)
        assert out[1, 0] == pytest.approx(1 / math.sqrt(2))
        assert out[0, 1] == pytest.approx(-1 / math.sqrt(2))

    def test_hong_ou_mandel(self):
        s = np.zeros((3, 3))
        s[1, 1] = 1
        assert abs(beam_splitter(s)[1, 1]) < 1e-14

    def test_cutoff_guard(self):
        s = np.zeros((2, 2))
        s[1, 1] = 1
        with pytest.raises(NumericalGuardError):
            beam_splitter(s)


class TestHomodyne:
    def test_frozen_vacuum_element(self):
        assert homodyne_matrix_element_exact(fock(0, 1), 2.0, 4, 1) == pytest.approx(0.221001592083159318243732948278, rel=1e-13)

    def test_frozen_single_photon_element(self):
        assert homodyne_matrix_element_exact(fock(1, 3), 1.5, 3, 0.5) == pytest.approx(0.182617012889071723010850827328, rel=1e-13)

    def test_exact_matches_beam_splitter_evolution(self):
        cutoff = 30
        beta = 1.3 * np.exp(-0.6j)
        psi = np.array([0.6, 0.0, 0.8j])
        two = np.outer(np.pad(psi, (0, cutoff + 1 - 3)), coherent(beta, cutoff + 1))
        na, nb = np.indices(two.shape)
        two[na + nb > cutoff] = 0
        out = beam_splitter(two, tol=1.0)
        F = homodyne_amplitudes_exact(psi, beta, 12)
        for N in range(13):
            for a in range(N + 1):
                np.testing.assert_allclose(F[a, N - a], out[a, N - a], atol=1e-10)
                assert homodyne_matrix_element_exact(psi, beta, N, a - N / 2) == pytest.approx(F[a, N - a], abs=1e-14)

    def test_exact_table_is_normalised(self):
        psi = np.array([0.6, 0.8])
        F = homodyne_amplitudes_exact(psi, 3.0, 60)
        assert (np.abs(F) ** 2).sum() == pytest.approx(1.0, abs=1e-10)

    def test_bad_difference(self):
        with pytest.raises(ValueError):
            homodyne_matrix_element_exact(fock(0, 1), 1.0, 3, 1)

    @pytest.mark.parametrize("phi", [0.0, 0.4, 1.3])
    def test_asymptotic_matches_exact(self, phi):
        psi = np.array([0.5, 1.0, 0.0]) / math.sqrt(1.25)
        cfg = HomodyneConfig(8.0, phi)
        for N, D in ((64, 2), (60, -3), (70, 1)):
            exact = homodyne_matrix_element_exact(psi, cfg.beta, N, D)
            approx, warn = homodyne_matrix_element_asymptotic(psi, cfg, N, D)
            assert not warn
            assert abs(approx - exact) / abs(exact) < 0.05

    def test_regime_warning(self):
        assert homodyne_regime_ok(8, 64, 2)
        assert not homodyne_regime_ok(8, 64, 20)
        assert not homodyne_regime_ok(2, 4, 0)
        _, warn = homodyne_matrix_element_asymptotic(fock(0, 1), HomodyneConfig(8), 64, 30)
        assert warn

    def test_distributions_have_expected_moments(self):
        Ng, pN, Dg, pD = homodyne_distributions(fock(0, 1), HomodyneConfig(6.0))
        assert pN.sum() == pytest.approx(1) and pD.sum() == pytest.approx(1)
        assert (Ng * pN).sum() == pytest.approx(36, abs=1e-6)
        # vacuum quadrature variance 1/2 maps to D variance |beta|^2 / 4
        assert (Dg**2 * pD).sum() == pytest.approx(9.0, rel=1e-3)


class TestQuadrature:
    def test_hermite_functions_against_scipy(self):
        x = np.linspace(-5, 5, 41)
        h = hermite_functions(12, x)
        for n in range(13):
            ref = eval_hermite(n, x) * np.exp(-(x**2) / 2) / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
            np.testing.assert_allclose(h[n], ref, atol=1e-12)

    def test_coherent_state_quadrature_mean(self):
        alpha = 1.2 + 0.5j
        psi = coherent(alpha, 40)
        x = np.linspace(-10, 10, 4001)
        for phi in (0.0, 0.9):
            dens = np.abs(quadrature_wavefunction(psi, phi, x)) ** 2
            mean = np.trapezoid(x * dens, x)
            assert mean == pytest.approx(math.sqrt(2) * (np.exp(-1j * phi) * alpha).real, abs=1e-8)


class TestFluorescence:
    def test_reported_values(self):
        r = fluorescence_measure(1 / math.sqrt(2), 1 / math.sqrt(2), FluorescenceConfig(0.5, 8))
        assert r.p_false_negative == pytest.approx(0.5 * 0.5**4)
        assert r.dark_g_weight == pytest.approx(0.5 * 0.5**8)
        assert r.count_distribution.sum() == pytest.approx(1.0)
        assert r.binned_state.norm() == pytest.approx(1.0)

    def test_binned_state_probabilities(self):
        c_g, c_e = 0.6, 0.8j
        r = fluorescence_measure(c_g, c_e, FluorescenceConfig(0.3, 5))
        t = r.binned_state.as_tensor()
        assert abs(t[0, 0]) ** 2 == pytest.approx(0.36 * (1 - 0.7**5))
        assert abs(t[1, 0]) == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            fluorescence_measure(1, 1, FluorescenceConfig(0.5, 2))
        with pytest.raises(ValueError):
            FluorescenceConfig(1.5, 2)


class TestDispersive:
    @pytest.mark.parametrize("alpha,theta", [(1.0, math.pi / 6), (0.7, 0.3), (2.0, 1.1)])
    def test_error_against_momentum_density(self, alpha, theta):
        # the e-like branch alpha e^(i theta) has momentum mean sqrt2 alpha sin theta
        psi = coherent(alpha * np.exp(1j * theta), 60)
        dens = lambda p: abs(quadrature_wavefunction(psi, math.pi / 2, np.array([p]))[0]) ** 2
        p_wrong, _ = quad(dens, -12, 0, epsabs=1e-13)
        assert dispersive_error(alpha, theta) == pytest.approx(p_wrong, rel=1e-8)

    def test_frozen_values(self):
        assert dispersive_error(1.0, math.pi / 6) == pytest.approx(0.158655253931457051414767454368, rel=1e-13)
        assert dispersive_error(3.0, math.pi / 2) == pytest.approx(9.86587645037698140700864132398e-10, rel=1e-12)

    def test_readout_probabilities(self):
        r = dispersive_readout(0.6, 0.8, DispersiveConfig(1.0, 0.5))
        assert sum(r.p_outcome) == pytest.approx(1.0)
        assert r.branch_amplitudes[0] == pytest.approx(np.exp(1j))

    def test_zero_phase_rejected(self):
        with pytest.raises(ValueError):
            DispersiveConfig(1.0, 0.0)
