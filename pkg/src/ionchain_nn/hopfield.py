"""
Zero-temperature Metropolis dynamics and basin-of-attraction statistics.

A spin flip is accepted only if it strictly lowers the Ising energy; ties are
rejected so that fixed points are well defined and every quench terminates.
Energy changes within ``tie_tolerance`` of zero count as ties, both here and
in ``enumerate_minima``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .couplings import CouplingMatrix, as_spins, flip_energy_changes, tie_tolerance
from .errors import LengthMismatch, TooLarge

ENUMERATION_CAP = 12
ENUMERATION_HARD_CAP = 20


@dataclass(frozen=True)
class QuenchResult:
    final_config: np.ndarray
    sweeps_used: int
    converged: bool
    accepted_flips: int = 0


@dataclass(frozen=True)
class BasinReport:
    """Outcome of ``trials_m`` quenches from ``flips_r``-flip perturbations."""

    pattern_index: int | None
    flips_r: int
    trials_m: int
    n_spins: int
    distance_histogram: dict[int, int]
    master_seed: int
    global_flip_landings: int = 0
    all_converged: bool = True
    overlap_convention: str = field(default="original-only")

    @property
    def initial_overlap(self) -> float:
        return (self.n_spins - self.flips_r) / self.n_spins

    @property
    def final_overlap(self) -> float:
        n = self.n_spins
        total = sum((n - s) / n * count for s, count in self.distance_histogram.items())
        return total / self.trials_m

    @property
    def recovery_probability(self) -> float:
        return self.distance_histogram.get(0, 0) / self.trials_m

    def recovery_stderr(self) -> float:
        p = self.recovery_probability
        return float(np.sqrt(max(p * (1 - p), 1.0 / self.trials_m) / self.trials_m))


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def quench(start, couplings: CouplingMatrix, rng=None, max_sweeps: int | None = None,
           sweep_order: str = "random") -> QuenchResult:
    """Relax ``start`` with single-spin zero-temperature Metropolis sweeps.

    Each sweep visits every spin once, in a fresh random permutation
    (``sweep_order="random"``) or in index order (``"sequential"``).  Stops
    after the first sweep without an accepted flip, or after ``max_sweeps``
    (default ``10 * N``).
    """
    s = as_spins(start).astype(float)
    n = len(s)
    if n != couplings.n:
        raise LengthMismatch(f"config has {n} spins, couplings {couplings.n}")
    if sweep_order not in ("random", "sequential"):
        raise ValueError(f"unknown sweep order {sweep_order!r}")
    max_sweeps = 10 * n if max_sweeps is None else max_sweeps
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    rng = _rng(rng)
    j, h = couplings.j, couplings.h
    tol = tie_tolerance(couplings)
    local = j @ s
    order = np.arange(n)
    accepted = 0
    for sweep in range(1, max_sweeps + 1):
        if sweep_order == "random":
            order = rng.permutation(n)
        flips = 0
        for i in order:
            si = s[i]
            if 2.0 * si * (local[i] - h[i]) < -tol:
                s[i] = -si
                local -= (2.0 * si) * j[:, i]
                flips += 1
        accepted += flips
        if flips == 0:
            return QuenchResult(s.astype(np.int8), sweep, True, accepted)
    return QuenchResult(s.astype(np.int8), max_sweeps, False, accepted)


def trial_streams(master_seed: int, trials: int) -> list[np.random.Generator]:
    """Independent generators; stream ``k`` belongs to trial ``k``.

    Split with ``SeedSequence(master_seed).spawn``, so stream ``k`` does not
    depend on how many trials are requested.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(trials)]


def perturb(pattern, flips_r: int, rng) -> np.ndarray:
    s = as_spins(pattern).copy()
    idx = rng.choice(len(s), size=flips_r, replace=False)
    s[idx] = -s[idx]
    return s


def basin_statistics(pattern, couplings: CouplingMatrix, flips_r: int, trials_m: int,
                     master_seed: int, pattern_index: int | None = None,
                     max_sweeps: int | None = None,
                     sweep_order: str = "random") -> BasinReport:
    """Quench ``trials_m`` random ``flips_r``-spin perturbations of ``pattern``.

    The final Hamming distance is measured to ``pattern`` itself; landing on
    its global flip counts as a failure (tallied in ``global_flip_landings``).
    """
    xi = as_spins(pattern)
    n = len(xi)
    if not 0 <= flips_r <= n:
        raise ValueError(f"flips_r must be in 0..{n}")
    if trials_m < 1:
        raise ValueError("trials_m must be at least 1")
    hist: Counter[int] = Counter()
    flipped = 0
    converged = True
    for rng in trial_streams(master_seed, trials_m):
        start = perturb(xi, flips_r, rng)
        res = quench(start, couplings, rng, max_sweeps, sweep_order)
        dist = int(np.count_nonzero(res.final_config != xi))
        hist[dist] += 1
        flipped += dist == n
        converged &= res.converged
    return BasinReport(pattern_index, flips_r, trials_m, n, dict(sorted(hist.items())),
                       master_seed, flipped, converged)


def overlap_curve(pattern, couplings: CouplingMatrix, r_grid, trials_m: int,
                  master_seed: int, pattern_index: int | None = None,
                  return_reports: bool = False, **kwargs):
    """``(m_i, m_f)`` for each number of initial flips in ``r_grid``."""
    reports = [basin_statistics(pattern, couplings, r, trials_m, master_seed,
                                pattern_index, **kwargs) for r in r_grid]
    points = [(rep.initial_overlap, rep.final_overlap) for rep in reports]
    return (points, reports) if return_reports else points


def all_configs(n: int) -> np.ndarray:
    """All ``2**n`` spin configurations, first spin most significant, +1 for bit 0."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def enumerate_minima(couplings: CouplingMatrix, cap: int = ENUMERATION_CAP) -> set[tuple[int, ...]]:
    """Every configuration that no single flip strictly lowers, by enumeration."""
    n = couplings.n
    if n > min(cap, ENUMERATION_HARD_CAP):
        raise TooLarge(f"enumeration of 2^{n} states exceeds cap N <= {cap}")
    tol = tie_tolerance(couplings)
    configs = all_configs(n)
    minima = set()
    for chunk in np.array_split(configs, max(1, len(configs) // 65536)):
        de = flip_energy_changes(chunk, couplings)
        for row in chunk[np.all(de >= -tol, axis=1)]:
            minima.add(tuple(int(x) for x in row))
    return minima
