"""
Time-dependent control fields ``(A, B1, B2)`` for the network Hamiltonian.

A gate schedule ramps ``B1, B2`` from positive values to zero while ``A``
rises from zero, all through the same monotone shape ``f`` on ``[0, 1]``::

    a(t)  = a_final * f(tau)
    b1(t) = b1_initial * (1 - f(tau))        tau = (t - t0) / duration
    b2(t) = b2_initial * (1 - f(tau))

followed by an optional hold at the final fields.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

# Default field scale; b1 = 1e-5 * B, b2 = 1e-6 * B at the start of the ramp.
DEFAULT_B_SCALE = 1.0
B1_FRACTION = 1e-5
B2_FRACTION = 1e-6


def raised_cosine(tau):
    return 0.5 * (1.0 - np.cos(np.pi * np.clip(tau, 0.0, 1.0)))


def smoothed_linear(tau, corner: float = 0.2):
    """Linear ramp with quadratic blends of width ``corner`` at both ends (C1)."""
    tau = np.clip(tau, 0.0, 1.0)
    w = corner
    norm = 2.0 * w * (1.0 - w)
    return np.where(tau < w, tau**2 / norm,
                    np.where(tau > 1.0 - w, 1.0 - (1.0 - tau) ** 2 / norm,
                             (tau - 0.5 * w) / (1.0 - w)))


def smootherstep(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (tau * (6.0 * tau - 15.0) + 10.0)


SHAPES: dict[str, Callable] = {
    "raised-cosine": raised_cosine,
    "smoothed-linear": smoothed_linear,
    "smootherstep": smootherstep,
}


class Schedule:
    """Anything with ``t0``, ``t_final`` and ``fields(t) -> (a, b1, b2)``."""

    t0: float
    t_final: float

    def fields(self, t: float) -> tuple[float, float, float]:
        raise NotImplementedError

    @property
    def span(self) -> float:
        return self.t_final - self.t0


@dataclass(frozen=True)
class FieldSchedule(Schedule):
    """Ramp of duration ``duration`` (units of hbar/lam) plus ``hold``."""

    a_final: float
    b1_initial: float
    b2_initial: float
    duration: float
    shape: str = "raised-cosine"
    hold: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown ramp shape {self.shape!r}; known: {sorted(SHAPES)}")
        if not self.b1_initial >= self.b2_initial > 0:
            raise ValueError("need b1_initial >= b2_initial > 0")
        if not self.a_final > 0:
            raise ValueError("a_final must be positive")
        if not (self.duration > 0 and self.hold >= 0):
            raise ValueError("duration must be positive and hold non-negative")

    @classmethod
    def preset(cls, b_scale: float = DEFAULT_B_SCALE, **kwargs) -> "FieldSchedule":
        return cls(b1_initial=B1_FRACTION * b_scale, b2_initial=B2_FRACTION * b_scale, **kwargs)

    @property
    def ramp_end(self) -> float:
        return self.t0 + self.duration

    @property
    def t_final(self) -> float:
        return self.ramp_end + self.hold

    def ramp(self, t):
        return SHAPES[self.shape]((np.asarray(t, dtype=float) - self.t0) / self.duration)

    def fields(self, t):
        f = float(self.ramp(t))
        return self.a_final * f, self.b1_initial * (1.0 - f), self.b2_initial * (1.0 - f)

    def with_hold(self, hold: float) -> "FieldSchedule":
        return FieldSchedule(**{**asdict(self), "hold": hold})

    def with_duration(self, duration: float) -> "FieldSchedule":
        return FieldSchedule(**{**asdict(self), "duration": duration})

    def schedule_id(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return f"{self.shape}-{hashlib.sha256(blob).hexdigest()[:12]}"


@dataclass(frozen=True)
class FunctionSchedule(Schedule):
    """Fields given by arbitrary callables of time (no gate invariants)."""

    a: Callable[[float], float]
    b1: Callable[[float], float]
    b2: Callable[[float], float]
    t0: float
    t_final: float

    def fields(self, t):
        return float(self.a(t)), float(self.b1(t)), float(self.b2(t))


def frozen(a: float, b1: float, b2: float, duration: float, t0: float = 0.0) -> FunctionSchedule:
    return FunctionSchedule(lambda t: a, lambda t: b1, lambda t: b2, t0, t0 + duration)


def loop(a_peak: float, b1: float, b2: float, duration: float, b_dip: float = 0.5,
         t0: float = 0.0) -> FunctionSchedule:
    """Closed loop in field space: ``A`` rises and returns to 0 while the ``B``
    fields dip and recover, out of phase, so the path encloses an area."""
    def s(t):
        return np.sin(np.pi * (t - t0) / duration) ** 2

    def c(t):
        return np.sin(2 * np.pi * (t - t0) / duration) ** 2
    return FunctionSchedule(
        lambda t: a_peak * s(t) * (1 + 0.5 * np.sin(2 * np.pi * (t - t0) / duration)),
        lambda t: b1 * (1 - b_dip * c(t)),
        lambda t: b2 * (1 - b_dip * s(t)),
        t0, t0 + duration)


# Named gate schedules.  "replication" keeps the long ramp (T >> 7e6 hbar/lam)
# at unit field scale; "desk" uses a larger final A, whose wider tunnel
# splitting allows a 25x shorter ramp at a similar adiabaticity ratio.
GATE_PRESETS = {
    "replication": {"a_final": 1.0, "duration": 1e8, "b_scale": 1.0},
    "desk": {"a_final": 2.0, "duration": 4e6, "b_scale": 1.0},
}


def gate_preset(name: str, shape: str = "raised-cosine", **overrides) -> FieldSchedule:
    if name not in GATE_PRESETS:
        raise ValueError(f"unknown gate preset {name!r}; known: {sorted(GATE_PRESETS)}")
    kw = {**GATE_PRESETS[name], **overrides}
    b_scale = kw.pop("b_scale")
    return FieldSchedule.preset(b_scale=b_scale, shape=shape, **kw)
