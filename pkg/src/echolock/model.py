"""Core domain types for the three-level Lambda medium.

Units at the API surface are microseconds for time and ordinary frequency in
kHz for every rate and detuning. The dynamics run in angular frequency
(rad/us); :func:`khz_to_angular` is the single conversion point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

TWO_PI = 2.0 * math.pi

ROLES = ("D", "W", "R", "B1", "B2", "custom")
SHAPES = ("square", "sech")
CHANNELS = (1, 2)

# a sech pulse is cut to zero beyond this many 1/beta from its centre
SECH_CUTOFF = 8.0


class ValidationError(ValueError):
    """An invariant of a domain type was violated.

    ``field`` names the offending field so callers (the scenario parser, the
    CLI) can point at the right key.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def khz_to_angular(f_khz):
    """Ordinary frequency in kHz -> angular frequency in rad/us."""
    return f_khz * (TWO_PI * 1e-3)


def angular_to_khz(w):
    return w / (TWO_PI * 1e-3)


def _check_rate(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValidationError(name, f"must be a finite rate >= 0, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Decay and dephasing rates of the Lambda system (all in kHz).

    Population rates: ``gamma31_pop`` and ``gamma32_pop`` empty |3> into |1>
    and |2>; ``gamma21_pop`` relaxes the spin population |2> -> |1>.
    Coherence decay rates ``deph13``, ``deph23``, ``deph12`` are independent
    inputs and are not derived from the population rates.
    """

    gamma31_pop: float = 0.0
    gamma32_pop: float = 0.0
    gamma21_pop: float = 0.0
    deph13: float = 0.0
    deph23: float = 0.0
    deph12: float = 0.0

    def __post_init__(self):
        for name in ("gamma31_pop", "gamma32_pop", "gamma21_pop",
                     "deph13", "deph23", "deph12"):
            _check_rate(name, getattr(self, name))

    def angular(self) -> np.ndarray:
        """Rates in rad/us, ordered as the fields are declared."""
        return khz_to_angular(np.array([
            self.gamma31_pop, self.gamma32_pop, self.gamma21_pop,
            self.deph13, self.deph23, self.deph12,
        ]))

    def max_rate_khz(self) -> float:
        return max(self.gamma31_pop, self.gamma32_pop, self.gamma21_pop,
                   self.deph13, self.deph23, self.deph12)


def derived_t1_opt(params: SystemParams) -> float:
    """Optical population lifetime 1/[2 pi (G31 + G32)] in microseconds."""
    total = params.gamma31_pop + params.gamma32_pop
    if total <= 0:
        raise ValueError("undefined T1: gamma31_pop + gamma32_pop is zero")
    return 1.0 / khz_to_angular(total)


def _unit_vector(name, k) -> Tuple[float, float, float]:
    k = tuple(float(x) for x in k)
    if len(k) != 3 or not all(math.isfinite(x) for x in k):
        raise ValidationError(name, f"must be a finite 3-vector, got {k!r}")
    norm = math.sqrt(sum(x * x for x in k))
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(name, f"must have unit norm, got |k| = {norm!r}")
    return k


@dataclass(frozen=True)
class Pulse:
    """One driving pulse.

    ``duration`` is the full length of a square pulse, or the 1/beta scale of
    a sech pulse. ``area`` is in radians with the convention
    area = 2 * integral(Omega dt), so area = pi inverts a resonant atom.
    """

    role: str
    channel: int
    shape: str
    t0: float
    duration: float
    area: float
    phase: float = 0.0
    wavevector: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError("role", f"must be one of {ROLES}, got {self.role!r}")
        if self.channel not in CHANNELS:
            raise ValidationError("channel", f"must be 1 or 2, got {self.channel!r}")
        if self.shape not in SHAPES:
            raise ValidationError("shape", f"must be one of {SHAPES}, got {self.shape!r}")
        if not math.isfinite(self.t0):
            raise ValidationError("t0", "must be finite")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValidationError("duration", f"must be > 0, got {self.duration!r}")
        if not (math.isfinite(self.area) and self.area >= 0):
            raise ValidationError("area", f"must be >= 0, got {self.area!r}")
        if not math.isfinite(self.phase):
            raise ValidationError("phase", "must be finite")
        object.__setattr__(self, "wavevector", _unit_vector("wavevector", self.wavevector))

    @property
    def half_support(self) -> float:
        if self.shape == "square":
            return 0.5 * self.duration
        return SECH_CUTOFF * self.duration

    @property
    def support(self) -> Tuple[float, float]:
        h = self.half_support
        return self.t0 - h, self.t0 + h


@dataclass(frozen=True)
class PulseSequence:
    pulses: Tuple[Pulse, ...]
    t_start: float
    t_end: float
    populations: Tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        pulses = tuple(self.pulses)
        object.__setattr__(self, "pulses", pulses)
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)
                and self.t_end > self.t_start):
            raise ValidationError("window", f"need t_start < t_end, got "
                                  f"[{self.t_start!r}, {self.t_end!r}]")
        for a, b in zip(pulses, pulses[1:]):
            if b.t0 < a.t0:
                raise ValidationError("pulses", "pulses must be sorted by t0")
        for p in pulses:
            lo, hi = p.support
            if lo < self.t_start - 1e-12 or hi > self.t_end + 1e-12:
                raise ValidationError(
                    "window", f"{p.role} pulse support [{lo:g}, {hi:g}] us lies "
                    f"outside [{self.t_start:g}, {self.t_end:g}] us")
        pops = tuple(float(x) for x in self.populations)
        if len(pops) != 3:
            raise ValidationError("populations", "need three entries")
        for name, x in zip(("rho11", "rho22", "rho33"), pops):
            if not (0.0 <= x <= 1.0):
                raise ValidationError(name, f"must lie in [0, 1], got {x!r}")
        if abs(sum(pops) - 1.0) > 1e-9:
            raise ValidationError("populations", f"must sum to 1, got {sum(pops)!r}")
        object.__setattr__(self, "populations", pops)

    def by_role(self, role: str):
        return [p for p in self.pulses if p.role == role]

    def initial_state(self) -> "AtomState":
        return AtomState(np.diag(np.array(self.populations, dtype=complex)))


@dataclass(frozen=True, eq=False)
class AtomState:
    """3x3 density matrix over the basis (|1>, |2>, |3>)."""

    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (3, 3):
            raise ValidationError("rho", f"must be 3x3, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise ValidationError("rho", "contains non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
            raise ValidationError("rho", "not Hermitian within 1e-9")
        if abs(np.trace(rho) - 1.0) > 1e-9:
            raise ValidationError("rho", f"trace {np.trace(rho).real!r} != 1")
        d = rho.diagonal().real
        if np.any(d < -1e-9) or np.any(d > 1 + 1e-9):
            raise ValidationError("rho", "diagonal entries outside [0, 1]")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def ground(cls):
        return cls(np.diag([1.0, 0.0, 0.0]).astype(complex))


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian inhomogeneous line sampled on a uniform detuning grid (kHz)."""

    fwhm: float
    span: float
    segments: int = 401
    spin_fwhm: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.fwhm) and self.fwhm > 0):
            raise ValidationError("fwhm", f"must be > 0, got {self.fwhm!r}")
        if not (math.isfinite(self.span) and self.span >= 2 * self.fwhm):
            raise ValidationError("span", f"must be >= 2 * fwhm = {2 * self.fwhm:g}, "
                                  f"got {self.span!r}")
        if isinstance(self.segments, bool) or int(self.segments) != self.segments:
            raise ValidationError("segments", "must be an integer")
        object.__setattr__(self, "segments", int(self.segments))
        if self.segments < 3:
            raise ValidationError("segments", "must be >= 3")
        if self.segments % 2 == 0:
            raise ValidationError("segments", "segments must be odd")
        if not (math.isfinite(self.spin_fwhm) and self.spin_fwhm >= 0):
            raise ValidationError("spin_fwhm", f"must be >= 0, got {self.spin_fwhm!r}")
