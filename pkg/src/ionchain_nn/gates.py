"""
Distributed-qubit gates of the spin network and their fidelities.

Logical states are whole-chain z-product patterns (all blocks up, all down,
and for two qubits the half-and-half patterns), which are the lowest levels at
the start of a gate schedule.  For a schedule ``U(t)`` the logical overlap
matrix is::

    M(t) = V^dag  P0^dag  Pi(t)  U(t)  P0

with ``P0`` the fixed logical states (columns, z basis), ``Pi(t)`` the
projector onto the ``d`` lowest instantaneous levels and ``V`` the target
gate.  The logical frame stays the z-product one at every time, so a perfect
adiabatic transfer of ``|G>`` into the symmetric superposition reads out as a
rotation, which is the gate.  ``Pi`` only depends on the spanned subspace, so
``M`` does not depend on eigenvector phase conventions.

After the ramp, a hold at the final (frozen) fields winds the relative
dynamical phases of the tracked levels.  Along the hold ``M`` is analytic in
the hold time, which ``calibrate_hold`` scans for the best gate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .errors import DegenerateLevelCrossing, InvalidDimension
from .evolution import evolve
from .qnn import N_BLOCKS, QnnParams, QnnSystem, site_flip
from .schedules import FieldSchedule

GATE_KINDS = ("H", "Bell")
GATE_DIMENSION = {"H": 2, "Bell": 4}
# Block patterns of the logical states, in logical order.  For Bell the order
# is |00>, |01>, |10>, |11>: left half of the chain is the first qubit.
LOGICAL_PATTERNS = {
    "H": [(1, 1, 1, 1), (-1, -1, -1, -1)],
    "Bell": [(1, 1, 1, 1), (1, 1, -1, -1), (-1, -1, 1, 1), (-1, -1, -1, -1)],
}
# Integration settings for gate runs: error on populated levels only.
GATE_ATOL = 1e-5
GATE_POPULATION_FLOOR = 1e-5
BOUNDARY_GAP = 1e-9
# A schedule counts as adiabatic when adiabaticity_ratio stays below this.
ADIABATICITY_THRESHOLD = 0.05
SINGULAR_SLACK = 1e-9


def _kind(kind: str) -> str:
    if kind not in GATE_KINDS:
        raise ValueError(f"unknown gate kind {kind!r}; known: {GATE_KINDS}")
    return kind


def _system(params) -> QnnSystem:
    return params if isinstance(params, QnnSystem) else QnnSystem(params)


def ideal_gate(kind: str) -> np.ndarray:
    """Target gate as a matrix; column ``j`` is the image of logical state ``j``.

    ``H``: |0> -> |+>, |1> -> -|->.  ``Bell``: |00> -> (|00> + |11>)/sqrt2,
    |01> -> (|01> + |10>)/sqrt2, |10> -> (-|01> + |10>)/sqrt2,
    |11> -> (-|00> + |11>)/sqrt2.
    """
    if _kind(kind) == "H":
        v = np.array([[1.0, -1.0], [1.0, 1.0]])
    else:
        v = np.array([[1.0, 0.0, 0.0, -1.0],
                      [0.0, 1.0, -1.0, 0.0],
                      [0.0, 1.0, 1.0, 0.0],
                      [1.0, 0.0, 0.0, 1.0]])
    return v / np.sqrt(2.0)


def logical_basis(params: QnnParams, kind: str) -> np.ndarray:
    """``(dim, d)`` z-product logical states, in logical order."""
    dim = params.dim
    out = np.zeros((dim, GATE_DIMENSION[_kind(kind)]), dtype=complex)
    k = params.sites_per_block
    for j, pattern in enumerate(LOGICAL_PATTERNS[kind]):
        spins = np.repeat(pattern, k)
        index = int("".join("0" if s > 0 else "1" for s in spins), 2)
        out[index, j] = 1.0
    return out


def average_gate_fidelity(m) -> float:
    """Haar-averaged state fidelity ``(|Tr M|^2 + Tr M M^dag) / (d (d + 1))``.

    ``M = V^dag P U P0`` is the logical overlap matrix against the target; a
    sub-unitary ``M`` (leakage) lowers the value.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4):
        raise InvalidDimension(f"overlap matrix must be 2x2 or 4x4, got {m.shape}")
    d = m.shape[0]
    if np.linalg.norm(m, 2) > 1.0 + SINGULAR_SLACK:
        raise ValueError("overlap matrix has a singular value above 1")
    f = (abs(np.trace(m)) ** 2 + np.real(np.trace(m @ m.conj().T))) / (d * (d + 1))
    return float(min(max(f, 0.0), 1.0))


def gate_leakage(m) -> float:
    """``1 - Tr(M M^dag) / d``."""
    m = np.asarray(m, dtype=complex)
    return float(1.0 - np.real(np.trace(m @ m.conj().T)) / len(m))


def _tracked(system: QnnSystem, fields, d: int, gap_threshold: float):
    """Energies and vectors of the ``d`` lowest levels; the level above must be separated."""
    w, v = system.spectrum(*fields)
    gap = w[d] - w[d - 1]
    if gap < gap_threshold:
        raise DegenerateLevelCrossing(
            f"tracked levels touch level {d} (gap {gap:.3g}) at fields {fields}", gap=float(gap))
    return w[:d], v[:, :d]


@dataclass(frozen=True)
class GateRun:
    """Logical overlap matrices ``overlaps[i]`` at ``times[i]``."""

    times: np.ndarray
    overlaps: np.ndarray
    gate_kind: str

    @property
    def fidelity(self) -> np.ndarray:
        return np.array([average_gate_fidelity(m) for m in self.overlaps])

    @property
    def leakage(self) -> np.ndarray:
        return np.array([gate_leakage(m) for m in self.overlaps])


def _ramp_times(schedule, n: int) -> np.ndarray:
    return np.linspace(schedule.t0, schedule.t_final, n)


def gate_propagator(params, schedule, kind: str, output_times=None, n_times: int = 101,
                    atol: float = GATE_ATOL, population_floor: float = GATE_POPULATION_FLOOR,
                    gap_threshold: float = BOUNDARY_GAP, return_states: bool = False):
    """Evolve the ``d`` logical states together and form ``M(t)`` at each output time."""
    system = _system(params)
    kind = _kind(kind)
    d = GATE_DIMENSION[kind]
    p0 = logical_basis(system.params, kind)
    times = _ramp_times(schedule, n_times) if output_times is None else np.asarray(output_times, float)
    states = evolve(system, schedule, p0, times, atol=atol, population_floor=population_floor)
    readout = ideal_gate(kind).T @ p0.conj().T
    overlaps = np.empty((len(times), d, d), dtype=complex)
    for i, t in enumerate(times):
        _, k = _tracked(system, schedule.fields(t), d, gap_threshold)
        overlaps[i] = readout @ k @ (k.conj().T @ states[i])
    run = GateRun(times, overlaps, kind)
    return (run, states) if return_states else run


# ---------------------------------------------------------------- hold phase

@dataclass(frozen=True)
class HoldModel:
    """``M(tau) = left @ diag(exp(-i E tau)) @ right`` along a hold at frozen fields."""

    energies: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def overlaps(self, taus) -> np.ndarray:
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        e = self.energies - self.energies[0]
        phases = np.exp(-1j * np.outer(taus, e))
        return (self.left[None, :, :] * phases[:, None, :]) @ self.right

    def fidelity(self, taus) -> np.ndarray:
        m = self.overlaps(taus)
        d = m.shape[-1]
        tr = np.abs(np.einsum("nii->n", m)) ** 2
        fro = np.sum(np.abs(m) ** 2, axis=(1, 2))
        return (tr + fro) / (d * (d + 1))


def hold_model(system: QnnSystem, fields, states, readout, tracked: int | None,
               gap_threshold: float = BOUNDARY_GAP, weight_floor: float = 1e-14) -> HoldModel:
    """Hold model from the states reached at the start of the hold.

    With ``tracked = d`` only the ``d`` lowest levels are kept (the projected
    overlap); with ``None`` every level carrying amplitude is kept.  Energies
    are measured from the lowest kept level, which only changes a global phase.
    """
    if tracked is not None:
        w, k = _tracked(system, fields, tracked, gap_threshold)
    else:
        w, k = system.spectrum(*fields)
        c = k.conj().T @ states
        keep = np.max(np.abs(c), axis=1) > weight_floor
        w, k = w[keep], k[:, keep]
    return HoldModel(w, readout @ k, k.conj().T @ states)


@dataclass(frozen=True)
class HoldCalibration:
    tau: float
    fidelity: float
    window: float
    model: HoldModel = field(repr=False)


def _frequency_scales(energies, split_ratio: float = 100.0):
    """Split the level spacings into a slow and a fast group at the widest gap.

    Returns ``(slow, fast)`` arrays of positive spacings; ``fast`` is empty
    when no two consecutive spacings differ by ``split_ratio`` or more.
    """
    diffs = np.abs(energies[:, None] - energies[None, :])[np.triu_indices(len(energies), 1)]
    diffs = np.sort(diffs[diffs > 0])
    if diffs.size < 2:
        return diffs, diffs[:0]
    ratios = diffs[1:] / diffs[:-1]
    i = int(np.argmax(ratios))
    if ratios[i] < split_ratio:
        return diffs, diffs[:0]
    return diffs[: i + 1], diffs[i + 1:]


def _local_best(model: HoldModel, center: float, spacing: float):
    lo, hi = max(0.0, center - spacing), center + spacing
    res = minimize_scalar(lambda x: -model.fidelity(x)[0], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
    return float(res.x), float(-res.fun)


def _scan_hold(model: HoldModel, window: float | None, resolution: int, chunk: int = 65536,
               candidates: int = 5):
    """Best hold time in ``[0, window]``.

    Coarse grid at ``resolution`` points per period of the fastest slow
    spacing over ``window`` (default one period of the slowest spacing); at
    every coarse point one period of the slowest fast spacing is scanned as
    well, since a shift that small leaves the slow phases unchanged.  This
    defines an envelope, the best fidelity within one fast period of a coarse
    time, which only varies on the slow scale.  Around the best few coarse
    points the envelope is maximized by bounded scalar minimization, each
    evaluation refining its fast-period optimum locally.
    """
    slow, fast = _frequency_scales(model.energies)
    if slow.size == 0:
        return 0.0, float(model.fidelity(0.0)[0]), 0.0
    if window is None:
        window = 2.0 * np.pi / slow.min()
    step = 2.0 * np.pi / (slow.max() * resolution)
    coarse = np.arange(0.0, window, step)
    if fast.size:
        fine = np.arange(0.0, 2.0 * np.pi / fast.min(), 2.0 * np.pi / (fast.max() * resolution))
        spacing = fine[1] - fine[0] if fine.size > 1 else step
    else:
        fine = np.zeros(1)
        spacing = step
    grid = (coarse[:, None] + fine[None, :]).ravel()
    f = np.concatenate([model.fidelity(grid[i:i + chunk]) for i in range(0, grid.size, chunk)])
    f = f.reshape(coarse.size, fine.size)
    row_best = f.max(axis=1)
    best_tau = float(coarse[np.argmax(row_best)] + fine[np.argmax(f[np.argmax(row_best)])])
    best_f = float(row_best.max())

    def envelope(start):
        taus = start + fine
        return _local_best(model, float(taus[np.argmax(model.fidelity(taus))]), spacing)

    for i in np.argsort(row_best)[-candidates:]:
        lo, hi = max(0.0, coarse[i] - step), min(window, coarse[i] + step)
        res = minimize_scalar(lambda c: -envelope(c)[1], bounds=(lo, hi), method="bounded",
                              options={"xatol": 0.01 * spacing})
        tau, val = envelope(float(res.x))
        if val > best_f:
            best_tau, best_f = tau, val
    return best_tau, best_f, float(window)


def calibrate_hold(params, schedule: FieldSchedule, kind: str, window: float | None = None,
                   resolution: int = 64,
                   atol: float = GATE_ATOL, population_floor: float = GATE_POPULATION_FLOOR,
                   gap_threshold: float = BOUNDARY_GAP) -> HoldCalibration:
    """Hold duration at the final fields that maximizes the average gate fidelity.

    The ramp is integrated once; along the hold ``M`` is evaluated exactly.
    The scan covers ``window`` (default one period of the slowest relative
    phase of the tracked levels); see ``_scan_hold``.
    """
    system = _system(params)
    kind = _kind(kind)
    ramp = schedule.with_hold(0.0)
    p0 = logical_basis(system.params, kind)
    psi = evolve(system, ramp, p0, [ramp.t_final], atol=atol, population_floor=population_floor)[0]
    model = hold_model(system, ramp.fields(ramp.t_final), psi, ideal_gate(kind).T @ p0.conj().T,
                       GATE_DIMENSION[kind], gap_threshold)
    tau, f, window = _scan_hold(model, window, resolution)
    return HoldCalibration(tau, f, window, model)


# ------------------------------------------------------------ fidelity curves

@dataclass(frozen=True)
class GateFidelityCurve:
    times: np.ndarray
    fidelity: np.ndarray
    gate_kind: str
    noise_ratio: float
    schedule_id: str
    hold: float = 0.0
    ramp_end: float = 0.0

    def __post_init__(self):
        if len(self.times) != len(self.fidelity):
            raise ValueError("times and fidelity differ in length")
        if np.any((self.fidelity < -1e-12) | (self.fidelity > 1 + 1e-12)):
            raise ValueError("fidelities must lie in [0, 1]")

    @property
    def max_fidelity(self) -> float:
        return float(np.max(self.fidelity))

    @property
    def time_of_max(self) -> float:
        return float(self.times[int(np.argmax(self.fidelity))])

    @property
    def gate_fidelity(self) -> float:
        """Best fidelity once the ramp is over, i.e. of an actual gate.

        ``max_fidelity`` also sees ``t0``, where ``M`` is ``V^dag`` and the
        fidelity is the identity's overlap with the target.
        """
        after = self.fidelity[self.times >= self.ramp_end]
        return float(np.max(after)) if after.size else float("nan")

    def rows(self):
        for t, f in zip(self.times, self.fidelity):
            yield t, f, self.gate_kind, self.noise_ratio, self.schedule_id


def fidelity_curve(params, schedule: FieldSchedule, kind: str, output_times=None,
                   calibrate: bool = True, n_ramp: int = 101, n_hold: int = 201,
                   hold_window: float | None = None, atol: float = GATE_ATOL,
                   population_floor: float = GATE_POPULATION_FLOOR,
                   gap_threshold: float = BOUNDARY_GAP) -> GateFidelityCurve:
    """Average gate fidelity against time.

    Without calibration the schedule (including any hold it has) is simply
    sampled at ``output_times``.  With calibration the hold of ``schedule`` is
    replaced: the ramp is sampled, then the hold is sampled over the scan
    window, always including the calibrated optimum, and the curve's
    ``schedule_id`` names the schedule with that hold.
    """
    system = _system(params)
    kind = _kind(kind)
    noise = system.params.noise_ratio
    if not calibrate:
        run = gate_propagator(system, schedule, kind, output_times, n_ramp, atol,
                              population_floor, gap_threshold)
        return GateFidelityCurve(run.times, run.fidelity, kind, noise, schedule.schedule_id(),
                                 schedule.hold, schedule.ramp_end)
    ramp = schedule.with_hold(0.0)
    times = _ramp_times(ramp, n_ramp) if output_times is None else np.asarray(output_times, float)
    times = times[times <= ramp.t_final]
    if times.size == 0 or times[-1] < ramp.t_final:
        times = np.append(times, ramp.t_final)
    run, states = gate_propagator(system, ramp, kind, times, atol=atol,
                                  population_floor=population_floor,
                                  gap_threshold=gap_threshold, return_states=True)
    p0 = logical_basis(system.params, kind)
    model = hold_model(system, ramp.fields(ramp.t_final), states[-1],
                       ideal_gate(kind).T @ p0.conj().T, GATE_DIMENSION[kind], gap_threshold)
    tau, _, window = _scan_hold(model, hold_window, 64)
    taus = np.union1d(np.linspace(0.0, window, n_hold), [tau])[1:]
    f_hold = model.fidelity(taus)
    calibrated = schedule.with_hold(tau)
    return GateFidelityCurve(np.concatenate([run.times, ramp.t_final + taus]),
                             np.clip(np.concatenate([run.fidelity, f_hold]), 0.0, 1.0),
                             kind, noise, calibrated.schedule_id(), tau, ramp.t_final)


# ----------------------------------------------------------------- spin flips

@dataclass(frozen=True)
class RobustnessReport:
    flip_site: int | None
    fidelity: float
    reference_fidelity: float
    gate_time: float

    @property
    def delta(self) -> float:
        return self.fidelity - self.reference_fidelity


def _readout_fidelity(system, schedule, kind, inputs, t, atol, population_floor):
    psi = evolve(system, schedule, inputs, [t], atol=atol, population_floor=population_floor)[0]
    m = ideal_gate(kind).T @ inputs.conj().T @ psi
    return average_gate_fidelity(m)


def spin_flip_robustness(params, schedule: FieldSchedule, kind: str, flip_site: int | None,
                         hold: float | None = None, atol: float = GATE_ATOL,
                         population_floor: float = GATE_POPULATION_FLOOR) -> RobustnessReport:
    """Gate fidelity when one site is flipped in the encoded input.

    The gate protocol is fixed first: the hold is calibrated on the error-free
    gate (unless ``hold`` is given).  Then the inputs ``X_s P0`` are run
    through it and read out in the same flipped frame, ``V^dag (X_s P0)^dag
    U (X_s P0)``, without projection since the flipped states do not live in
    the tracked levels.  The reference is the same readout without a flip.
    """
    system = _system(params)
    kind = _kind(kind)
    n = system.params.n_sites
    if flip_site is not None and not 1 <= flip_site <= n:
        raise ValueError(f"flip_site must be in 1..{n}")
    if hold is None:
        hold = calibrate_hold(system, schedule, kind, atol=atol,
                              population_floor=population_floor).tau
    gate = schedule.with_hold(hold)
    t = gate.t_final
    p0 = logical_basis(system.params, kind)
    reference = _readout_fidelity(system, gate, kind, p0, t, atol, population_floor)
    if flip_site is None:
        return RobustnessReport(None, reference, reference, t)
    flipped = site_flip(n, flip_site) @ p0
    f = _readout_fidelity(system, gate, kind, flipped, t, atol, population_floor)
    return RobustnessReport(flip_site, f, reference, t)


# -------------------------------------------------------------- adiabaticity

def _field_operators(system: QnnSystem):
    lam = system.params.lam
    blocks = system._blocks
    left = blocks[:, : N_BLOCKS // 2].sum(axis=1).astype(float)
    right = blocks[:, N_BLOCKS // 2:].sum(axis=1).astype(float)
    return [(-lam) * x for x in system._x], -lam * left, -lam * right


def adiabaticity_ratio(params, schedule, kind: str = "H", n_samples: int = 401,
                       rel_step: float = 1e-6) -> float:
    """``max over t, tracked n, other m of |<m|dH/dt|n>| / (E_m - E_n)**2``.

    Sampled on ``n_samples`` times of the schedule; ``dH/dt`` from central
    differences of the fields.  Only sectors holding logical states matter.
    """
    system = _system(params)
    d = GATE_DIMENSION[_kind(kind)]
    p0 = system.to_coupled(logical_basis(system.params, kind))
    sectors = [k for k, idx in enumerate(system.sectors) if np.any(p0[idx] != 0)]
    xs, left, right = _field_operators(system)
    worst = 0.0
    span = schedule.span
    h = rel_step * span
    for t in np.linspace(schedule.t0, schedule.t_final, n_samples):
        lo, hi = max(schedule.t0, t - h), min(schedule.t_final, t + h)
        rate = (np.array(schedule.fields(hi)) - np.array(schedule.fields(lo))) / (hi - lo)
        energies, vecs, dh = [], [], []
        for k in sectors:
            idx = system.sectors[k]
            w, v = np.linalg.eigh(system.sector_hamiltonians(*schedule.fields(t))[k])
            op = rate[0] * xs[k] + np.diag(rate[1] * left[idx] + rate[2] * right[idx])
            energies.append(w)
            vecs.append(v)
            dh.append(v.T @ op @ v)
        w_all = np.concatenate(energies)
        lowest = np.sort(w_all)[:d]
        for w, dhk in zip(energies, dh):
            for n in np.flatnonzero(np.isin(w, lowest)):
                gaps = (w - w[n]) ** 2
                mask = np.arange(len(w)) != n
                elems = np.abs(dhk[mask, n])
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(elems > 1e-300, elems / gaps[mask], 0.0)
                worst = max(worst, float(np.max(ratio, initial=0.0)))
    return worst


# ------------------------------------------------------------- phases on loops

def _level_vector(system: QnnSystem, fields, level: int, gap_threshold: float):
    w, v = system.spectrum(*fields)
    gaps = np.diff(w[max(level - 1, 0): level + 2])
    if gaps.size and gaps.min() < gap_threshold:
        raise DegenerateLevelCrossing(
            f"level {level} is within {gaps.min():.3g} of a neighbour at fields {fields}",
            gap=float(gaps.min()))
    return w[level], v[:, level]


def berry_phase(params, schedule, level: int = 0, n_points: int = 2001,
                gap_threshold: float = 1e-8) -> float:
    """Geometric phase of ``level`` around a closed schedule, in [0, 2 pi).

    Discrete Pancharatnam product of overlaps of consecutive instantaneous
    eigenvectors, closed with the starting vector.  The Hamiltonian is real,
    so the result is 0 or pi up to rounding.
    """
    system = _system(params)
    start, end = schedule.fields(schedule.t0), schedule.fields(schedule.t_final)
    if not np.allclose(start, end, rtol=0, atol=1e-12):
        raise ValueError("schedule does not return to its initial fields")
    ts = np.linspace(schedule.t0, schedule.t_final, n_points)
    vecs = [_level_vector(system, schedule.fields(t), level, gap_threshold)[1] for t in ts]
    vecs[-1] = vecs[0]
    product = 1.0 + 0j
    for k, (a, b) in enumerate(zip(vecs[:-1], vecs[1:])):
        ov = np.vdot(a, b)
        # a smooth level barely turns between samples; a small overlap means
        # the level swapped with a neighbour (an exact crossing the gap check
        # missed between samples) or the loop is undersampled
        if abs(ov) < 0.5:
            raise DegenerateLevelCrossing(
                f"level {level} changes character between t={ts[k]:.6g} and t={ts[k + 1]:.6g} "
                f"(overlap {abs(ov):.3g}); crossing or too few points")
        product *= ov / abs(ov)
    return float(np.mod(-np.angle(product), 2 * np.pi))


def dynamical_phase(params, schedule, level: int = 0, gap_threshold: float = 1e-8) -> float:
    """``integral of E_level(t) dt`` over the schedule (the phase is minus this)."""
    system = _system(params)

    def energy(t):
        return _level_vector(system, schedule.fields(t), level, gap_threshold)[0]

    value, _ = quad(energy, schedule.t0, schedule.t_final, limit=500,
                    epsabs=1e-11, epsrel=1e-13)
    return float(value)


def loop_phase(params, schedule, level: int = 0, atol: float = 1e-10,
               method: str = "magnus4") -> tuple[float, float]:
    """Evolve eigenstate ``level`` once around a closed schedule.

    Returns ``(geometric, fidelity)``: the phase of ``<n|psi(T)>`` with the
    dynamical part removed, in [0, 2 pi), and ``|<n|psi(T)>|**2``.
    """
    system = _system(params)
    _, v0 = _level_vector(system, schedule.fields(schedule.t0), level, 0.0)
    psi = evolve(system, schedule, v0.astype(complex), [schedule.t_final], atol=atol,
                 method=method)[0]
    ov = np.vdot(v0, psi)
    phase = np.angle(ov) + dynamical_phase(system, schedule, level)
    return float(np.mod(phase, 2 * np.pi)), float(abs(ov) ** 2)
