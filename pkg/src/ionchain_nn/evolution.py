"""
Time evolution ``i d|psi>/dt = H(t)|psi>`` (hbar = 1, energies in lam).

Each step freezes the Hamiltonian and applies its exact exponential, taken by
diagonalizing the Hermitian step generator, so every step is unitary to
rounding.  Two generators are available:

``"midpoint"`` (default)
    ``H`` at the middle of the step.  Second order, and well behaved when a
    step spans many periods of the fast (far, unpopulated) levels, which is
    the regime of long adiabatic ramps.
``"magnus4"``
    Fourth-order Magnus generator from ``H`` at the two Gauss-Legendre nodes,
    ``dt/2 (H1 + H2) - i sqrt(3)/12 dt**2 [H2, H1]``.  Much more accurate
    while ``dt * ||H||`` is small, but its commutator term is meaningless
    once a step spans many fast periods.

Step size control is by step doubling: one step of ``dt`` against two of
``dt/2``.  Their difference is the local error estimate; its leading term is
the commutator of the Hamiltonians inside the step.  It is measured in the
instantaneous eigenbasis at the end of the step, restricted to levels whose
population exceeds ``population_floor`` (all levels when the floor is 0).
Far levels are only populated by the small non-adiabatic dressing; errors in
their amplitudes oscillate with the large level spacing and do not build up,
so excluding them lets adiabatic runs take steps many fast periods long.  A
step is accepted when the estimate is at most ``atol``; the half-step result
is kept and the next ``dt`` follows the usual power-law controller.  Steps are
shortened to land exactly on every requested output time.

Work is done sector by sector in the coupled block basis of ``QnnSystem``;
sectors where the state has no amplitude are skipped (they stay empty).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyNotMet, StepSizeUnderflow
from .qnn import QnnParams, QnnSystem

GAUSS_OFFSET = np.sqrt(3.0) / 6.0
MAGNUS_COMMUTATOR = np.sqrt(3.0) / 12.0
NORM_DRIFT_LIMIT = 1e-9
METHODS = {"midpoint": 2, "magnus4": 4}


@dataclass
class EvolutionInfo:
    steps: int = 0
    rejected: int = 0
    min_step: float = np.inf
    max_step: float = 0.0
    norm_drift: float = 0.0


def _as_system(system) -> QnnSystem:
    return system if isinstance(system, QnnSystem) else QnnSystem(system)


class _SectorPropagator:
    def __init__(self, system: QnnSystem, schedule, active, method: str = "midpoint"):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; known: {sorted(METHODS)}")
        self.system = system
        self.schedule = schedule
        self.active = active
        self.method = method
        lam = system.params.lam
        self._x = [(-lam) * system._x[k] for k in active]
        self._idx = [system.sectors[k] for k in active]

    def hamiltonians(self, t):
        a, b1, b2 = self.schedule.fields(t)
        d = self.system.diagonal(b1, b2)
        out = []
        for idx, x in zip(self._idx, self._x):
            h = a * x
            h[np.diag_indices_from(h)] += d[idx]
            out.append(h)
        return out

    def generators(self, t, dt):
        if self.method == "midpoint":
            return [dt * h for h in self.hamiltonians(t + 0.5 * dt)]
        h1 = self.hamiltonians(t + (0.5 - GAUSS_OFFSET) * dt)
        h2 = self.hamiltonians(t + (0.5 + GAUSS_OFFSET) * dt)
        return [(0.5 * dt) * (a + b) - (1j * MAGNUS_COMMUTATOR * dt * dt) * (b @ a - a @ b)
                for a, b in zip(h1, h2)]

    def step(self, t, dt, blocks):
        out = []
        for gen, phi in zip(self.generators(t, dt), blocks):
            w, v = np.linalg.eigh(gen)
            out.append(v @ (np.exp(-1j * w)[:, None] * (v.conj().T @ phi)))
        return out

    def error(self, t, full, half, population_floor):
        """Largest column norm of ``full - half`` over the populated levels at ``t``."""
        sq = 0.0
        if population_floor <= 0:
            for f, g in zip(full, half):
                sq = sq + np.sum(np.abs(f - g) ** 2, axis=0)
            return float(np.sqrt(np.max(sq)))
        for h, f, g in zip(self.hamiltonians(t), full, half):
            _, v = np.linalg.eigh(h)
            cf, cg = v.T @ f, v.T @ g
            keep = np.abs(cg) ** 2 > population_floor
            sq = sq + np.sum(np.where(keep, np.abs(cf - cg) ** 2, 0.0), axis=0)
        return float(np.sqrt(np.max(sq)))


def evolve(system, schedule, psi0, output_times, atol: float = 1e-10,
           population_floor: float = 0.0, method: str = "midpoint",
           first_step: float | None = None, max_steps: int = 2_000_000,
           return_info: bool = False):
    """Propagate ``psi0`` from ``schedule.t0`` and return it at ``output_times``.

    ``system`` is a ``QnnParams`` or ``QnnSystem``.  ``psi0`` is one state of
    dimension ``dim`` or a ``(dim, d)`` array of states propagated together.
    The result has shape ``(len(output_times), dim[, d])``, z basis.

    Accuracy contract: every accepted step has a step-doubling error estimate
    of at most ``atol`` over levels populated above ``population_floor``, and
    the norm of every state drifts by at most 1e-9 over the run
    (``AccuracyNotMet`` otherwise).
    """
    system = _as_system(system)
    psi0 = np.asarray(psi0, dtype=complex)
    single = psi0.ndim == 1
    psi = psi0[:, None] if single else psi0
    if psi.shape[0] != system.dim:
        raise ValueError(f"state dimension {psi.shape[0]} != {system.dim}")
    norms0 = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(norms0 - 1.0) > 1e-10):
        raise ValueError("initial states must be normalized")
    times = np.asarray(output_times, dtype=float)
    t0, tf = schedule.t0, schedule.t_final
    if times.size and (np.any(np.diff(times) < 0) or times[0] < t0 or times[-1] > tf * (1 + 1e-12)):
        raise ValueError("output_times must be ascending within the schedule")

    phi = system.to_coupled(psi)
    active = [k for k, idx in enumerate(system.sectors) if np.any(phi[idx] != 0)]
    prop = _SectorPropagator(system, schedule, active, method)
    exponent = 1.0 / (METHODS[method] + 1)
    blocks = [phi[system.sectors[k]] for k in active]
    info = EvolutionInfo()

    def assemble(blocks):
        out = np.zeros_like(phi)
        for k, b in zip(active, blocks):
            out[system.sectors[k]] = b
        return system.to_product(out)

    t = t0
    if first_step is None:
        a, b1, b2 = schedule.fields(t0)
        scale = np.max(np.abs(system.diagonal(b1, b2))) + abs(a) * system.params.n_sites
        first_step = 0.1 / max(scale * system.params.lam, 1e-300)
    dt = min(first_step, max(schedule.span, 1e-300))
    results = []
    for target in times:
        while t < target:
            h = min(dt, target - t)
            if target - (t + h) < 1e-12 * max(1.0, abs(target)):
                h = target - t
            full = prop.step(t, h, blocks)
            half = prop.step(t, 0.5 * h, blocks)
            half = prop.step(t + 0.5 * h, 0.5 * h, half)
            err = prop.error(t + h, full, half, population_floor)
            factor = 4.0 if err == 0 else min(4.0, max(0.2, 0.9 * (atol / err) ** exponent))
            if err <= atol:
                blocks = half
                t = target if h == target - t else t + h
                info.steps += 1
                info.min_step = min(info.min_step, h)
                info.max_step = max(info.max_step, h)
                if h == dt or factor < 1:
                    dt = h * factor
            else:
                info.rejected += 1
                dt = h * factor
                if dt < 1e-14 * max(1.0, abs(t)):
                    raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
            if info.steps + info.rejected > max_steps:
                raise StepSizeUnderflow(f"more than {max_steps} steps before t={target:.6g}")
        results.append(assemble(blocks))

    out = np.array(results) if results else np.zeros((0,) + psi.shape, dtype=complex)
    if results:
        info.norm_drift = float(np.max(np.abs(np.linalg.norm(out, axis=1) - norms0)))
        if info.norm_drift > NORM_DRIFT_LIMIT:
            raise AccuracyNotMet(f"norm drift {info.norm_drift:.3g} exceeds {NORM_DRIFT_LIMIT}")
    if single:
        out = out[..., 0]
    return (out, info) if return_info else out


def hold_propagator(system, a: float, b1: float, b2: float):
    """Eigen-decomposition ``(E, V)`` of the frozen Hamiltonian, z basis.

    ``exp(-i H tau) = V diag(exp(-i E tau)) V^T``.
    """
    return _as_system(system).spectrum(a, b1, b2)
