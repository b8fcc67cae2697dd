"""Spin-spin couplings, spin patterns and the Ising energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import PhononSpectrum
from .errors import AmbiguousSign, LengthMismatch, ZeroFrequencyMode


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric couplings ``j`` with zero diagonal and local fields ``h``."""

    j: np.ndarray
    h: np.ndarray | None = None

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise LengthMismatch(f"coupling matrix must be square, got {j.shape}")
        h = np.zeros(len(j)) if self.h is None else np.asarray(self.h, dtype=float)
        if h.shape != (len(j),):
            raise LengthMismatch(f"field has shape {h.shape}, expected ({len(j)},)")
        j = 0.5 * (j + j.T)
        np.fill_diagonal(j, 0.0)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return len(self.j)

    def scaled(self, factor: float) -> "CouplingMatrix":
        return CouplingMatrix(self.j * factor, self.h * factor)


def as_spins(config) -> np.ndarray:
    """Validate a spin configuration and return it as an int8 array of +-1."""
    s = np.asarray(config)
    if s.ndim != 1 or not np.all((s == 1) | (s == -1)):
        raise ValueError("spin configuration must be a 1-D sequence of +1/-1")
    return s.astype(np.int8)


def phonon_couplings(spectrum: PhononSpectrum, force: float | None = None,
                     mass: float | None = None, mode_subset=None) -> CouplingMatrix:
    """Couplings mediated by the normal modes.

    ``J_ij = F**2/m * sum_n M_in M_jn / w_n**2`` over ``mode_subset`` (mode
    numbers starting at 1; default all).  With ``force`` and ``mass`` omitted
    the dimensionless frequencies are used with ``F**2/m = 1``; otherwise SI
    frequencies are used.  The diagonal is dropped and ``h = 0``.
    """
    if (force is None) != (mass is None):
        raise ValueError("give both force and mass, or neither")
    if force is None:
        omega, prefactor = spectrum.scaled_frequencies, 1.0
    else:
        if force == 0 or mass <= 0:
            raise ValueError("force must be nonzero and mass positive")
        omega, prefactor = spectrum.frequencies, force**2 / mass
    n = spectrum.n_modes
    idx = np.arange(n) if mode_subset is None else np.asarray(sorted(mode_subset)) - 1
    if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"mode_subset must be a nonempty subset of 1..{n}")
    w = omega[idx]
    if np.any(w <= 0):
        raise ZeroFrequencyMode("couplings require strictly positive mode frequencies")
    m = spectrum.modes[:, idx]
    j = prefactor * (m / w**2) @ m.T
    return CouplingMatrix(j, np.zeros(n))


def hebbian_couplings(patterns) -> CouplingMatrix:
    """Hebbian rule ``J_ij = (1/N) sum_mu xi_i xi_j`` for ``i != j``."""
    patterns = [as_spins(p) for p in patterns]
    if not patterns:
        raise ValueError("need at least one pattern")
    n = len(patterns[0])
    if any(len(p) != n for p in patterns):
        raise LengthMismatch("all patterns must have the same length")
    xi = np.array(patterns, dtype=float)
    return CouplingMatrix(xi.T @ xi / n, np.zeros(n))


def pattern_from_mode(spectrum: PhononSpectrum, mode_index: int,
                      atol: float = 1e-12) -> np.ndarray:
    """Sign pattern of the ion displacements in mode ``mode_index`` (from 1)."""
    if not 1 <= mode_index <= spectrum.n_modes:
        raise ValueError(f"mode_index must be in 1..{spectrum.n_modes}")
    col = spectrum.modes[:, mode_index - 1]
    if np.any(np.abs(col) < atol):
        raise AmbiguousSign(
            f"mode {mode_index} has a node at ion(s) "
            f"{(np.flatnonzero(np.abs(col) < atol) + 1).tolist()}")
    return np.where(col > 0, 1, -1).astype(np.int8)


def ising_energy(config, couplings: CouplingMatrix) -> float:
    """``-1/2 sum_ij J_ij S_i S_j + sum_i h_i S_i``."""
    s = as_spins(config).astype(float)
    if len(s) != couplings.n:
        raise LengthMismatch(f"config has {len(s)} spins, couplings {couplings.n}")
    return float(-0.5 * s @ couplings.j @ s + couplings.h @ s)


def flip_energy_changes(config, couplings: CouplingMatrix) -> np.ndarray:
    """Energy change of flipping each spin individually.

    Accepts a single configuration or a 2-D stack of them (one per row).
    """
    s = np.asarray(config, dtype=float)
    if s.shape[-1] != couplings.n:
        raise LengthMismatch(f"config has {s.shape[-1]} spins, couplings {couplings.n}")
    return 2.0 * s * (s @ couplings.j - couplings.h)


def tie_tolerance(couplings: CouplingMatrix, rtol: float = 1e-12) -> float:
    """Energy changes above ``-tie_tolerance`` count as ties (not lowering)."""
    scale = np.max(np.abs(couplings.j).sum(axis=1) + np.abs(couplings.h), initial=0.0)
    return rtol * max(scale, np.finfo(float).tiny)
