"""
Equilibrium structure and axial phonon spectrum of a linear ion chain.

The ions sit in a power-law trap ``V(x) = rho * |x|**gamma`` and repel each
other through the Coulomb interaction.  All numerics run in dimensionless
units::

    length     l   = (k_c q**2 / rho) ** (1 / (gamma + 1))
    energy     eps = rho * l**gamma
    frequency  w0  = sqrt(eps / (m l**2))

in which the potential energy reads ``U(u) = sum |u_i|**gamma +
sum_{i<j} 1/|u_i - u_j|``.  Conversion to SI happens only at the boundary
(``EquilibriumChain.positions``, ``PhononSpectrum.frequencies``).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import (
    DegenerateInput,
    IndefiniteHessian,
    InvalidOddChain,
    NonConvergence,
    NumericalError,
    SingularCurvature,
)

COULOMB_CONSTANT = 1.0 / (4.0 * np.pi * constants.epsilon_0)
CA_MASS = 6.642e-26  # kg, 40 u
CA_CHARGE = constants.elementary_charge
RHO_FIG1B = 6.6e-20  # J m^-1/2, for gamma = 0.5

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class TrapPotential:
    """Axial trap ``rho * |x|**gamma`` plus the species constants."""

    rho: float
    gamma: float
    mass: float = CA_MASS
    charge: float = CA_CHARGE

    def __post_init__(self):
        if not (self.rho > 0 and self.gamma > 0 and self.mass > 0):
            raise ValueError(
                f"rho, gamma and mass must be positive (got {self.rho}, "
                f"{self.gamma}, {self.mass})")
        if self.charge == 0:
            raise ValueError("charge must be nonzero")
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise ValueError("derived length scale is not finite")

    @property
    def length_scale(self) -> float:
        return (COULOMB_CONSTANT * self.charge**2 / self.rho) ** (1.0 / (self.gamma + 1.0))

    @property
    def energy_scale(self) -> float:
        return self.rho * self.length_scale**self.gamma

    @property
    def frequency_scale(self) -> float:
        return np.sqrt(self.energy_scale / (self.mass * self.length_scale**2))

    def with_gamma(self, gamma: float) -> "TrapPotential":
        return TrapPotential(self.rho, gamma, self.mass, self.charge)

    @classmethod
    def harmonic(cls, omega: float, mass: float = CA_MASS,
                 charge: float = CA_CHARGE) -> "TrapPotential":
        """Harmonic trap with axial angular frequency ``omega`` (rad/s)."""
        return cls(rho=0.5 * mass * omega**2, gamma=2.0, mass=mass, charge=charge)


@dataclass(frozen=True)
class EquilibriumChain:
    """Equilibrium of ``n`` ions; ``scaled`` is in units of the trap length."""

    trap: TrapPotential
    scaled: np.ndarray
    residual: float
    iterations: int = 0

    @property
    def positions(self) -> np.ndarray:
        """Positions in meters."""
        return self.scaled * self.trap.length_scale

    @property
    def n_ions(self) -> int:
        return len(self.scaled)


@dataclass(frozen=True)
class PhononSpectrum:
    """Axial normal modes.

    ``modes[:, n]`` is the amplitude vector of mode ``n`` (0-based column,
    ascending frequency).  ``stiffness`` is the dimensionless elastic-constant
    matrix; multiply by ``frequency_scale**2`` for ``kappa`` in s^-2.
    """

    scaled_frequencies: np.ndarray
    modes: np.ndarray
    stiffness: np.ndarray
    frequency_scale: float = 1.0
    model: str = "hessian"

    @property
    def frequencies(self) -> np.ndarray:
        """Angular frequencies in rad/s."""
        return self.scaled_frequencies * self.frequency_scale

    @property
    def kappa(self) -> np.ndarray:
        return self.stiffness * self.frequency_scale**2

    @property
    def n_modes(self) -> int:
        return len(self.scaled_frequencies)

    def ratio(self, upper: int = 2, lower: int = 1) -> float:
        """Frequency ratio of two modes, numbered from 1."""
        return float(self.scaled_frequencies[upper - 1] / self.scaled_frequencies[lower - 1])


# -- potential energy in dimensionless units ---------------------------------

def potential_energy(u, gamma: float) -> float:
    u = np.asarray(u, dtype=float)
    iu = np.triu_indices(len(u), 1)
    dist = np.abs(u[:, None] - u[None, :])[iu]
    return float(np.sum(np.abs(u) ** gamma) + np.sum(1.0 / dist))


def _pair_terms(u):
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return diff


def energy_gradient(u, gamma: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    diff = _pair_terms(u)
    coulomb = -np.sum(np.sign(diff) / diff**2, axis=1)
    trap = np.zeros_like(u)
    nz = u != 0
    trap[nz] = gamma * np.abs(u[nz]) ** (gamma - 1.0) * np.sign(u[nz])
    return trap + coulomb


def coulomb_hessian(u) -> np.ndarray:
    diff = _pair_terms(np.asarray(u, dtype=float))
    c = 2.0 / np.abs(diff) ** 3
    hess = -c
    np.fill_diagonal(hess, c.sum(axis=1))
    return hess


def trap_stiffness(u, gamma: float, model: str = "hessian") -> np.ndarray:
    """Per-ion trap contribution to the elastic constants.

    ``"hessian"`` is the exact curvature ``gamma (gamma-1) |u|**(gamma-2)``.
    ``"secant"`` is the restoring force per unit displacement from the trap
    center, ``gamma |u|**(gamma-2)``; it coincides with the curvature for a
    harmonic trap and stays positive for ``gamma < 1``.
    """
    u = np.asarray(u, dtype=float)
    if gamma < 2 and np.any(u == 0):
        raise SingularCurvature(
            f"ion at the trap center: curvature of |x|^{gamma} is singular there")
    a = np.abs(u)
    with np.errstate(divide="ignore"):
        base = np.where(a > 0, a ** (gamma - 2.0), 0.0 if gamma > 2 else 1.0)
    if model == "hessian":
        return gamma * (gamma - 1.0) * base
    if model == "secant":
        return gamma * base
    raise ValueError(f"unknown stiffness model {model!r}")


def resolve_stiffness_model(gamma: float, model: str = "auto") -> str:
    """``auto`` uses the exact curvature where it yields a stable chain.

    For ``gamma <= 1`` the exact curvature makes the symmetric chain unstable
    against a rigid translation (the trap is concave on both sides of the
    center), so the secant stiffness is used there.
    """
    if model == "auto":
        return "hessian" if gamma > 1 else "secant"
    return model


# -- equilibrium --------------------------------------------------------------

def _mirror_map(n: int) -> np.ndarray:
    """Matrix P with ``u = P @ v`` for the mirror-symmetric chain."""
    half = n // 2
    p = np.zeros((n, half))
    for k in range(half):
        p[n - half + k, k] = 1.0
        p[half - 1 - k, k] = -1.0
    return p


def _newton(v, p, gamma, tol, max_iter):
    def full(v):
        return p @ v

    def reduced_grad(v):
        g = energy_gradient(full(v), gamma)
        return p.T @ g, np.max(np.abs(g))

    def reduced_hess(v):
        u = full(v)
        h = coulomb_hessian(u)
        nz = u != 0
        curv = np.zeros_like(u)
        a = np.abs(u[nz])
        curv[nz] = gamma * (gamma - 1.0) * a ** (gamma - 2.0)
        return p.T @ (h + np.diag(curv)) @ p

    def admissible(v):
        return v[0] > 0 and np.all(np.diff(v) > 0)

    g, resid = reduced_grad(v)
    for it in range(max_iter):
        if resid <= tol:
            return v, resid, it
        h = reduced_hess(v)
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = -g
        merit = g @ g
        alpha = 1.0
        while alpha > 1e-12:
            trial = v + alpha * step
            if admissible(trial):
                g_t, r_t = reduced_grad(trial)
                if g_t @ g_t < merit * (1.0 - 1e-4 * alpha) or r_t <= tol:
                    break
            alpha *= 0.5
        else:
            raise NonConvergence("line search failed to reduce the gradient")
        v, g, resid = trial, g_t, r_t
    if resid <= tol:
        return v, resid, max_iter
    raise NonConvergence(
        f"equilibrium not reached in {max_iter} iterations (residual {resid:.3g})")


def _optimal_scale(w, gamma):
    iu = np.triu_indices(len(w), 1)
    a = np.sum(np.abs(w) ** gamma)
    b = np.sum(1.0 / np.abs(w[:, None] - w[None, :])[iu])
    return (b / (gamma * a)) ** (1.0 / (gamma + 1.0))


def _solve_scaled(n, gamma, tol, max_iter):
    p = _mirror_map(n)
    w = np.linspace(-1.0, 1.0, n)
    w = w * _optimal_scale(w, gamma)
    v0 = (p.T @ w) / 2.0
    return _newton(v0, p, gamma, tol, max_iter), p


def solve_equilibrium(trap: TrapPotential, n_ions: int, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> EquilibriumChain:
    """Find the mirror-symmetric equilibrium of ``n_ions`` ions.

    Damped Newton iteration on the gradient in the subspace of
    mirror-symmetric configurations, started from the harmonic chain rescaled
    to the length that minimizes the energy along the dilation direction.
    ``tol`` bounds the largest component of the dimensionless gradient.
    """
    if n_ions < 1:
        raise DegenerateInput("need at least one ion")
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = trap.gamma
    if n_ions % 2 == 1 and gamma < 1:
        raise InvalidOddChain(
            f"odd chain (N={n_ions}) puts an ion on the cusp of |x|^{gamma}")
    if n_ions == 1:
        return EquilibriumChain(trap, np.zeros(1), 0.0, 0)

    (v, _, _), p = _solve_scaled(n_ions, 2.0, tol, max_iter)
    harmonic = p @ v
    if gamma != 2.0:
        w = harmonic * _optimal_scale(harmonic, gamma)
        v, resid, iters = _newton(p.T @ w / 2.0, p, gamma, tol, max_iter)
    else:
        resid = np.max(np.abs(energy_gradient(harmonic, gamma)))
        iters = 0
    u = p @ v
    resid = float(np.max(np.abs(energy_gradient(u, gamma))))
    return EquilibriumChain(trap, u, resid, iters)


# -- normal modes --------------------------------------------------------------

def fix_sign_gauge(modes: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first non-negligible entry of each is positive."""
    modes = np.array(modes, dtype=float, copy=True)
    for n in range(modes.shape[1]):
        col = modes[:, n]
        idx = np.flatnonzero(np.abs(col) > atol)
        if idx.size and col[idx[0]] < 0:
            modes[:, n] = -col
    return modes


def phonon_modes(chain: EquilibriumChain, stiffness: str = "auto",
                 tol: float = 1e-6) -> PhononSpectrum:
    """Diagonalize the elastic-constant matrix at the equilibrium ``chain``.

    ``stiffness`` selects the trap contribution (see ``trap_stiffness``).
    Raises ``IndefiniteHessian`` when some squared frequency is not positive.
    """
    if chain.residual > tol:
        raise NonConvergence(f"chain residual {chain.residual:.3g} exceeds {tol:.3g}")
    gamma = chain.trap.gamma
    model = resolve_stiffness_model(gamma, stiffness)
    u = chain.scaled
    k = coulomb_hessian(u) + np.diag(trap_stiffness(u, gamma, model))
    w2, m = np.linalg.eigh(k)
    scale = np.max(np.abs(w2))
    if w2[0] <= 1e-12 * scale:
        raise IndefiniteHessian(
            f"lowest squared frequency {w2[0]:.3g} (scaled) is not positive "
            f"for gamma={gamma} with {model} stiffness")
    return PhononSpectrum(np.sqrt(w2), fix_sign_gauge(m), k,
                          chain.trap.frequency_scale, model)


def chain_spectrum(trap: TrapPotential, n_ions: int, stiffness: str = "auto",
                   **kwargs) -> tuple[EquilibriumChain, PhononSpectrum]:
    chain = solve_equilibrium(trap, n_ions, **kwargs)
    return chain, phonon_modes(chain, stiffness)


@dataclass(frozen=True)
class ScanPoint:
    gamma: float
    ratio: float = float("nan")
    error: str | None = None


def _scan_point(trap, gamma, n_ions, stiffness):
    try:
        _, spec = chain_spectrum(trap.with_gamma(gamma), n_ions, stiffness)
    except NumericalError as exc:
        return ScanPoint(gamma, error=f"{type(exc).__name__}: {exc}")
    return ScanPoint(gamma, spec.ratio())


def mode_ratio_scan(gammas, n_ions: int, trap: TrapPotential | None = None,
                    stiffness: str = "auto", workers: int | None = None) -> list[ScanPoint]:
    """Ratio of the two lowest mode frequencies over a grid of exponents.

    Failures are reported per point and do not stop the scan.  Output is
    sorted by gamma whatever the evaluation order.
    """
    if n_ions < 2:
        raise ValueError("need at least two ions for a frequency ratio")
    gammas = sorted(float(g) for g in gammas)
    if any(not (0 < g <= 3) for g in gammas):
        raise ValueError("gamma grid must lie in (0, 3]")
    trap = trap or TrapPotential(RHO_FIG1B, 0.5)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda g: _scan_point(trap, g, n_ions, stiffness), gammas))
    return [_scan_point(trap, g, n_ions, stiffness) for g in gammas]
