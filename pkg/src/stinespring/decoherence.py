"""Decoherence of outcome registers by symmetry-respecting random unitaries.

The outcome-register basis is partitioned into blocks (one block per
measurement outcome in a non-minimal register).  A random unitary that maps
each block into itself, ``U = sum_l P_l U_l P_l`` with independent Haar-random
``U_l``, models an environment that scrambles the register without touching
which outcome it records.  Averaging over such unitaries removes all
coherence between blocks and maximally mixes each block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import STINESPRING, DensityMatrix, LayoutError, RegisterLayout


@dataclass(frozen=True)
class SymmetryBlocks:
    """Partition of ``range(dim)`` into blocks of register basis indices."""

    dim: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(self.dim)) or any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must partition range(dim) into non-empty sets")

    @classmethod
    def uniform(cls, n_blocks: int, size: int) -> "SymmetryBlocks":
        return cls(n_blocks * size, tuple(tuple(range(k * size, (k + 1) * size)) for k in range(n_blocks)))

    def projector(self, ell: int) -> np.ndarray:
        P = np.zeros((self.dim, self.dim), dtype=complex)
        idx = list(self.blocks[ell])
        P[idx, idx] = 1.0
        return P


def haar_unitary(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix.

    The phases of ``R``'s diagonal are moved into ``Q`` so the distribution is
    exactly Haar.  With ``size`` set, returns a stack of that many samples.
    """
    shape = (n, n) if size is None else (size, n, n)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def sample_block_haar(blocks: SymmetryBlocks, seed, size: int | None = None) -> np.ndarray:
    """Block-diagonal unitary with an independent Haar factor in every block."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (blocks.dim, blocks.dim) if size is None else (size, blocks.dim, blocks.dim)
    U = np.zeros(shape, dtype=complex)
    for b in blocks.blocks:
        idx = np.array(b)
        U[..., idx[:, None], idx[None, :]] = haar_unitary(len(b), rng, size)
    return U


def _ss_split(layout: RegisterLayout) -> tuple[list[str], list[str]]:
    phys = list(layout.physical_labels)
    ss = list(layout.stinespring_labels)
    if not ss:
        raise LayoutError("state has no stinespring registers")
    if layout.labels != tuple(phys + ss):
        raise LayoutError("stinespring registers must come after all physical registers")
    return phys, ss


def _as_blocks4(rho: DensityMatrix, blocks: SymmetryBlocks) -> tuple[np.ndarray, int, int]:
    phys, ss = _ss_split(rho.layout)
    dp = rho.layout.sub(phys).total_dim
    ds = rho.layout.sub(ss).total_dim
    if ds != blocks.dim:
        raise LayoutError(f"blocks cover {blocks.dim} register states, state has {ds}")
    return rho.data.reshape(dp, ds, dp, ds), dp, ds


def dephase_exact(rho: DensityMatrix, blocks: SymmetryBlocks) -> DensityMatrix:
    """Average of ``(I (x) U) rho (I (x) U)^dagger`` over block-Haar ``U``.

    Coherences between blocks vanish and each diagonal block becomes the
    partial trace over that block tensored with ``P_l / n_l``.
    """
    t, dp, ds = _as_blocks4(rho, blocks)
    out = np.zeros_like(t)
    for b in blocks.blocks:
        idx = list(b)
        phys_part = sum(t[:, k, :, k] for k in idx) / len(idx)
        for k in idx:
            out[:, k, :, k] = phys_part
    return DensityMatrix(rho.layout, out.reshape(dp * ds, dp * ds))


def dephase_sampled(rho: DensityMatrix, blocks: SymmetryBlocks, samples: int, seed) -> DensityMatrix:
    """Monte Carlo estimate of :func:`dephase_exact` from ``samples`` draws."""
    t, dp, ds = _as_blocks4(rho, blocks)
    rng = np.random.default_rng(seed)
    acc = np.zeros_like(t)
    batch = 4096
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        U = sample_block_haar(blocks, rng, size=n)
        # (I (x) U) rho (I (x) U)^dagger, summed over the batch
        acc += np.einsum("sij,ajbk,slk->aibl", U, t, U.conj(), optimize=True)
        done += n
    return DensityMatrix(rho.layout, (acc / samples).reshape(dp * ds, dp * ds))


def coherence_norm(rho: DensityMatrix, blocks: SymmetryBlocks) -> float:
    """Frobenius norm of all register coherences between different blocks."""
    t, _, _ = _as_blocks4(rho, blocks)
    label = np.empty(blocks.dim, dtype=int)
    for ell, b in enumerate(blocks.blocks):
        label[list(b)] = ell
    mask = label[:, None] != label[None, :]
    return float(np.sqrt(np.sum(np.abs(t) ** 2 * mask[None, :, None, :])))


def nonminimal_dilated(rho: np.ndarray, sd, block: int, rng: np.random.Generator) -> tuple[DensityMatrix, SymmetryBlocks]:
    """Dilated state ``sum_mn Pi_m rho Pi_n (x) |chi_m><chi_n|`` with random ``chi_m`` in block ``m``."""
    K = sd.n_outcomes
    blocks = SymmetryBlocks.uniform(K, block)
    chis = []
    for m in range(K):
        v = np.zeros(K * block, dtype=complex)
        v[m * block : (m + 1) * block] = rng.standard_normal(block) + 1j * rng.standard_normal(block)
        chis.append(v / np.linalg.norm(v))
    d = rho.shape[0]
    big = sum(
        np.kron(Pm @ rho @ Pn, np.outer(chis[m], chis[n].conj()))
        for m, Pm in enumerate(sd.projectors)
        for n, Pn in enumerate(sd.projectors)
    )
    layout = RegisterLayout.of(("sys", d), ("M", K * block, STINESPRING))
    return DensityMatrix(layout, big), blocks
