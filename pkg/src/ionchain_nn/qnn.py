"""
Quantum neural network Hamiltonian of a small spin chain.

The chain has four blocks of ``sites_per_block`` spin-1/2 sites (two for the
8-spin network, one for the 16-dimensional test analogue).  With block
operators ``S^a_i = sum of sigma^a over the sites of block i``::

    H = -lam [ r1 (S1+S2+S3+S4)^2 + r2 (S1+S2-S3-S4)^2 + r3 (S1-S2-S3+S4)^2
               + A (Sx1+Sx2+Sx3+Sx4) + B1 (S1+S2) + B2 (S3+S4) ]

(unlabelled ``S`` are z components).  Basis states are z-products with site 1
as the most significant bit and bit 0 meaning spin up.

``H`` only involves block operators, so it conserves the total spin of each
two-site block.  ``QnnSystem`` exploits this by working in the coupled
(triplet/singlet) basis, where ``H`` splits into 16 independent sectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DegenerateLevelCrossing, InvalidParams

N_BLOCKS = 4
PATTERNS = {
    "r1": np.array([1, 1, 1, 1]),
    "r2": np.array([1, 1, -1, -1]),
    "r3": np.array([1, -1, -1, 1]),
}


@dataclass(frozen=True)
class QnnParams:
    """Energy unit ``lam`` and pattern weights, ``r1 ~ r2 >> r3 > 0``."""

    lam: float = 1.0
    r1: float = 1.0
    r2: float = 0.95
    r3: float = 0.01
    sites_per_block: int = 2

    def __post_init__(self):
        if not (self.lam > 0 and self.r1 > 0 and self.r2 > 0 and self.r3 > 0):
            raise InvalidParams("lam, r1, r2 and r3 must be positive")
        if self.r3 > self.r1:
            raise InvalidParams("r3 must not exceed r1")
        if self.sites_per_block not in (1, 2):
            raise InvalidParams("sites_per_block must be 1 or 2")

    @property
    def n_sites(self) -> int:
        return N_BLOCKS * self.sites_per_block

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def noise_ratio(self) -> float:
        return self.r3 / self.r1


def site_sz(n_sites: int) -> np.ndarray:
    """``(2**n, n)`` array of sigma^z eigenvalues per basis state and site."""
    bits = (np.arange(2**n_sites)[:, None] >> np.arange(n_sites - 1, -1, -1)) & 1
    return 1 - 2 * bits


def block_sz(params: QnnParams) -> np.ndarray:
    sz = site_sz(params.n_sites)
    k = params.sites_per_block
    return sz.reshape(len(sz), N_BLOCKS, k).sum(axis=2)


def _diagonal(params: QnnParams, blocks: np.ndarray, b1: float, b2: float) -> np.ndarray:
    d = (params.r1 * (blocks @ PATTERNS["r1"]) ** 2
         + params.r2 * (blocks @ PATTERNS["r2"]) ** 2
         + params.r3 * (blocks @ PATTERNS["r3"]) ** 2
         + b1 * (blocks[:, 0] + blocks[:, 1]) + b2 * (blocks[:, 2] + blocks[:, 3]))
    return -params.lam * d


def transverse_operator(n_sites: int) -> np.ndarray:
    """Dense ``sum_i sigma^x_i``."""
    dim = 2**n_sites
    x = np.zeros((dim, dim))
    rows = np.arange(dim)
    for s in range(n_sites):
        x[rows, rows ^ (1 << (n_sites - 1 - s))] += 1.0
    return x


def build_qnn_hamiltonian(params: QnnParams, a: float, b1: float, b2: float) -> np.ndarray:
    """Dense real-symmetric Hamiltonian in the z-product basis."""
    h = -params.lam * a * transverse_operator(params.n_sites)
    h[np.diag_indices_from(h)] += _diagonal(params, block_sz(params), b1, b2)
    return h


def product_state(spins, dim: int | None = None) -> np.ndarray:
    """Basis vector for a z-product state given as +1/-1 per site (or a string of u/d)."""
    if isinstance(spins, str):
        spins = [1 if c in "u+↑" else -1 for c in spins]
    spins = np.asarray(spins)
    n = len(spins)
    index = int("".join("0" if s > 0 else "1" for s in spins), 2)
    v = np.zeros(dim or 2**n, dtype=complex)
    v[index] = 1.0
    return v


def global_flip(n_sites: int) -> np.ndarray:
    """Permutation matrix of the product of sigma^x over all sites."""
    dim = 2**n_sites
    p = np.zeros((dim, dim))
    p[np.arange(dim), (dim - 1) - np.arange(dim)] = 1.0
    return p


def site_flip(n_sites: int, site: int) -> np.ndarray:
    """sigma^x on ``site`` (numbered from 1)."""
    dim = 2**n_sites
    p = np.zeros((dim, dim))
    rows = np.arange(dim)
    p[rows, rows ^ (1 << (n_sites - site))] = 1.0
    return p


def fix_phase(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Rephase each column so its overlap with the matching reference column is real positive."""
    ov = np.einsum("ij,ij->j", reference.conj(), vectors)
    phase = np.where(np.abs(ov) > 0, np.conj(ov) / np.where(ov == 0, 1, np.abs(ov)), 1.0)
    return vectors * phase


def instantaneous_levels(h: np.ndarray, k: int, reference: np.ndarray | None = None,
                         gap_threshold: float | None = None):
    """The ``k`` lowest eigenpairs of a dense Hermitian ``h``.

    With ``reference`` (columns matched to levels) each eigenvector is
    rephased to have positive overlap with its reference, so levels can be
    followed continuously.  ``gap_threshold`` makes near-degenerate tracked
    levels an error.
    """
    if not 1 <= k <= len(h):
        raise ValueError(f"k must be in 1..{len(h)}")
    w, v = np.linalg.eigh(h)
    _check_gaps(w, k, gap_threshold)
    vecs = v[:, :k].astype(complex)
    if reference is not None:
        vecs = fix_phase(vecs, reference)
    return w[:k], vecs


def _check_gaps(w, k, gap_threshold):
    if gap_threshold is None:
        return
    gaps = np.diff(w[: min(k + 1, len(w))])
    if gaps.size and gaps.min() < gap_threshold:
        i = int(np.argmin(gaps))
        raise DegenerateLevelCrossing(
            f"levels {i} and {i + 1} are {gaps[i]:.3g} apart", gap=float(gaps[i]))


_TRIPLET_SINGLET = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, np.sqrt(0.5), np.sqrt(0.5), 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, np.sqrt(0.5), -np.sqrt(0.5), 0.0],
])
_LOCAL_SZ = np.array([2, 0, -2, 0])


class QnnSystem:
    """Sector-resolved representation of the network for fast diagonalization.

    ``basis`` is the orthogonal change to the coupled block basis (rows are
    coupled states in z coordinates); ``sectors`` lists the coupled-basis
    indices of each block of ``H``.
    """

    def __init__(self, params: QnnParams):
        self.params = params
        self.dim = params.dim
        if params.sites_per_block == 2:
            w = _TRIPLET_SINGLET
            for _ in range(N_BLOCKS - 1):
                w = np.kron(w, _TRIPLET_SINGLET)
            self.basis = w
            digits = np.array(list(product(range(4), repeat=N_BLOCKS)))
            blocks = _LOCAL_SZ[digits]
            keys = [tuple(row) for row in (digits == 3)]
            self.sectors = [np.array([i for i, kk in enumerate(keys) if kk == key])
                            for key in sorted(set(keys))]
        else:
            self.basis = np.eye(self.dim)
            blocks = block_sz(params)
            self.sectors = [np.arange(self.dim)]
        self._blocks = blocks
        x = self.basis @ transverse_operator(params.n_sites) @ self.basis.T
        self._x = [x[np.ix_(s, s)] for s in self.sectors]

    def diagonal(self, b1: float, b2: float) -> np.ndarray:
        return _diagonal(self.params, self._blocks, b1, b2)

    def sector_hamiltonians(self, a: float, b1: float, b2: float) -> list[np.ndarray]:
        d = self.diagonal(b1, b2)
        out = []
        for idx, x in zip(self.sectors, self._x):
            h = (-self.params.lam * a) * x
            h[np.diag_indices_from(h)] += d[idx]
            out.append(h)
        return out

    def hamiltonian(self, a: float, b1: float, b2: float) -> np.ndarray:
        return build_qnn_hamiltonian(self.params, a, b1, b2)

    def to_coupled(self, psi: np.ndarray) -> np.ndarray:
        return self.basis @ psi

    def to_product(self, phi: np.ndarray) -> np.ndarray:
        return self.basis.T @ phi

    def spectrum(self, a: float, b1: float, b2: float):
        """All eigenpairs, eigenvalues ascending, vectors in the z basis."""
        energies, vecs = [], []
        for idx, h in zip(self.sectors, self.sector_hamiltonians(a, b1, b2)):
            w, v = np.linalg.eigh(h)
            full = np.zeros((self.dim, len(idx)))
            full[idx] = v
            energies.append(w)
            vecs.append(full)
        w = np.concatenate(energies)
        order = np.argsort(w, kind="stable")
        return w[order], self.basis.T @ np.hstack(vecs)[:, order]

    def levels(self, a: float, b1: float, b2: float, k: int,
               reference: np.ndarray | None = None, gap_threshold: float | None = None):
        """``k`` lowest eigenpairs; same contract as ``instantaneous_levels``."""
        w, v = self.spectrum(a, b1, b2)
        _check_gaps(w, k, gap_threshold)
        vecs = v[:, :k].astype(complex)
        if reference is not None:
            vecs = fix_phase(vecs, reference)
        return w[:k], vecs
