import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stinespring.decoherence import (
    SymmetryBlocks,
    coherence_norm,
    dephase_exact,
    dephase_sampled,
    haar_unitary,
    nonminimal_dilated,
    sample_block_haar,
)
from stinespring.hilbert import DensityMatrix, LayoutError, RegisterLayout, partial_trace, trace_distance
from stinespring.spectral import PAULI, spectral_decompose


def rand_rho(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ g.conj().T
    return r / np.trace(r)


class TestBlocks:
    def test_uniform_partition(self):
        b = SymmetryBlocks.uniform(3, 2)
        assert b.blocks == ((0, 1), (2, 3), (4, 5))
        np.testing.assert_allclose(sum(b.projector(i) for i in range(3)), np.eye(6))

    @pytest.mark.parametrize("blocks", [((0, 1), (1, 2)), ((0,), (2,)), ((0, 1, 2), ())])
    def test_bad_partitions(self, blocks):
        with pytest.raises(ValueError):
            SymmetryBlocks(3, blocks)


class TestHaar:
    def test_unitarity_of_batch(self):
        U = haar_unitary(5, np.random.default_rng(0), size=20)
        eye = np.einsum("sji,sjk->sik", U.conj(), U)
        np.testing.assert_allclose(eye, np.broadcast_to(np.eye(5), eye.shape), atol=1e-12)

    def test_second_moment(self):
        # Haar average of |U_00|^2 is 1/n; its second moment is 2/(n(n+1))
        n = 3
        U = haar_unitary(n, np.random.default_rng(1), size=40000)
        a = np.abs(U[:, 0, 0]) ** 2
        assert a.mean() == pytest.approx(1 / n, abs=0.01)
        assert (a**2).mean() == pytest.approx(2 / (n * (n + 1)), abs=0.01)

    def test_block_structure_respected(self):
        b = SymmetryBlocks(4, ((0, 3), (1, 2)))
        U = sample_block_haar(b, seed=2)
        assert U[0, 1] == 0 and U[3, 2] == 0 and U[1, 0] == 0
        np.testing.assert_allclose(U.conj().T @ U, np.eye(4), atol=1e-12)


class TestDephasing:
    def setup_method(self):
        self.lay = RegisterLayout.of(("sys", 2), ("M", 4, "stinespring"))
        self.blocks = SymmetryBlocks.uniform(2, 2)

    def test_exact_matches_hand_formula(self):
        rho = rand_rho(np.random.default_rng(3), 8)
        out = dephase_exact(DensityMatrix(self.lay, rho), self.blocks).data.reshape(2, 4, 2, 4)
        t = rho.reshape(2, 4, 2, 4)
        for blk in ((0, 1), (2, 3)):
            avg = (t[:, blk[0], :, blk[0]] + t[:, blk[1], :, blk[1]]) / 2
            for k in blk:
                np.testing.assert_allclose(out[:, k, :, k], avg, atol=1e-15)
        assert np.all(out[:, 0, :, 2] == 0) and np.all(out[:, 1, :, 0] == 0)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_exact_is_idempotent_trace_preserving(self, seed):
        rho = DensityMatrix(self.lay, rand_rho(np.random.default_rng(seed), 8))
        once = dephase_exact(rho, self.blocks)
        assert once.trace() == pytest.approx(1.0, abs=1e-13)
        assert once.is_valid()
        np.testing.assert_allclose(dephase_exact(once, self.blocks).data, once.data, atol=1e-15)
        assert coherence_norm(once, self.blocks) == 0
        np.testing.assert_allclose(partial_trace(once, ["sys"]).data, partial_trace(rho, ["sys"]).data, atol=1e-14)

    def test_sampled_converges(self):
        rho = DensityMatrix(self.lay, rand_rho(np.random.default_rng(4), 8))
        exact = dephase_exact(rho, self.blocks).data
        d_small = trace_distance(dephase_sampled(rho, self.blocks, 100, seed=0).data, exact)
        d_large = trace_distance(dephase_sampled(rho, self.blocks, 10000, seed=0).data, exact)
        assert d_large < d_small
        assert d_large < 0.05

    def test_sampled_is_seed_reproducible(self):
        rho = DensityMatrix(self.lay, rand_rho(np.random.default_rng(5), 8))
        a = dephase_sampled(rho, self.blocks, 50, seed=9).data
        np.testing.assert_array_equal(a, dephase_sampled(rho, self.blocks, 50, seed=9).data)

    def test_registers_must_trail(self):
        lay = RegisterLayout.of(("M", 4, "stinespring"), ("sys", 2))
        with pytest.raises(LayoutError):
            dephase_exact(DensityMatrix(lay, np.eye(8) / 8), self.blocks)
        with pytest.raises(LayoutError):
            dephase_exact(DensityMatrix(RegisterLayout.of(("sys", 8)), np.eye(8) / 8), self.blocks)

    def test_nonminimal_dilation_recovers_measured_state(self):
        rng = np.random.default_rng(6)
        rho = rand_rho(rng, 2)
        sd = spectral_decompose(PAULI["X"])
        big, blocks = nonminimal_dilated(rho, sd, 3, rng)
        assert big.layout.dims == (2, 6)
        lueders = sum(P @ rho @ P for P in sd.projectors)
        np.testing.assert_allclose(partial_trace(big, ["sys"]).data, lueders, atol=1e-14)
        assert coherence_norm(big, blocks) > 0
        deph = dephase_exact(big, blocks)
        np.testing.assert_allclose(partial_trace(deph, ["sys"]).data, lueders, atol=1e-14)
