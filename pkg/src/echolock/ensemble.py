"""Inhomogeneous ensembles, parallel evolution and echo readout.

Every atom on the detuning grid is evolved on its own; the macroscopic
coherence P(t) = sum_i w_i rho13_i(t) is then reduced with a fixed pairwise
tree in grid order, so the result does not depend on how atoms were split
between workers.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .integrator import STEPS_PER_RADIAN, IntegrationError, plan_steps, propagate
from .model import EnsembleSpec, PulseSequence, SystemParams, khz_to_angular

FWHM_TO_SIGMA = 1.0 / math.sqrt(8.0 * math.log(2.0))


@dataclass(frozen=True, eq=False)
class DetuningGrid:
    """Optical detunings (rad/us), Gaussian weights and spin offsets (rad/us).

    Atom i sees delta1 = ``detunings[i]`` on the |1>-|3> transition and
    delta2 = ``spin_offsets[i]`` on |2>-|3>. With ``spin_fwhm`` = 0 every
    atom is resonant on the control channel; otherwise the offset is tied
    linearly to the optical detuning (offset = delta1 * spin_fwhm / fwhm).
    """

    detunings: np.ndarray
    weights: np.ndarray
    spin_offsets: np.ndarray

    def __len__(self):
        return len(self.detunings)

    @property
    def delta2(self) -> np.ndarray:
        return self.spin_offsets


def sample_detunings(spec: EnsembleSpec) -> DetuningGrid:
    """Uniform grid over [-span/2, span/2] with Gaussian weights summing to 1."""
    half = spec.segments // 2
    step = spec.span / (spec.segments - 1)
    nu = step * np.arange(-half, half + 1)  # kHz, exactly symmetric
    sigma = spec.fwhm * FWHM_TO_SIGMA
    w = np.exp(-0.5 * (nu / sigma) ** 2)
    w = w / pairwise_sum(w)
    spin = nu * (spec.spin_fwhm / spec.fwhm)
    return DetuningGrid(khz_to_angular(nu), w, khz_to_angular(spin))


def pairwise_sum(x: np.ndarray) -> np.ndarray:
    """Sum along axis 0 with a fixed binary tree (index order, no reordering)."""
    x = np.asarray(x)
    while x.shape[0] > 1:
        odd = x.shape[0] % 2
        head = x[0:x.shape[0] - odd:2] + x[1:x.shape[0] - odd + 1:2]
        x = np.concatenate([head, x[-1:]]) if odd else head
    return x[0]


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------

def evolve_grid(seq: PulseSequence, grid: DetuningGrid, params: SystemParams,
                dt_out: float, elements: Sequence[Tuple[int, int]] = ((0, 2),),
                workers: int = 1, steps_per_radian: float = STEPS_PER_RADIAN,
                rho0=None):
    """Evolve every grid atom; returns (times, array[n_atoms, n_out, n_elements]).

    ``rho0`` may give one starting matrix per atom, shape (n_atoms, 3, 3), e.g.
    the last states of an earlier run; by default every atom starts in the
    sequence's initial populations.
    """
    plan = plan_steps(seq, dt_out, steps_per_radian)
    rates = params.angular()
    if rho0 is None:
        rho0 = np.broadcast_to(seq.initial_state().rho, (len(grid), 3, 3))
    elif np.shape(rho0) != (len(grid), 3, 3):
        raise ValueError(f"rho0 must have shape ({len(grid)}, 3, 3)")
    n_atoms, n_out = len(grid), len(plan.out_times)
    rows = np.array([j for j, _ in elements])
    cols = np.array([k for _, k in elements])
    result = np.empty((n_atoms, n_out, len(elements)), dtype=complex)
    d1s, d2s = grid.detunings, grid.delta2

    def work(indices):
        buf = np.empty((n_out, 3, 3), dtype=complex)
        for i in indices:
            try:
                propagate(plan, rho0[i], d1s[i], d2s[i], rates, out=buf)
            except IntegrationError as exc:
                raise IntegrationError(exc.t, f"grid atom {i}: non-finite state") from None
            result[i] = buf[:, rows, cols]

    workers = max(1, int(workers))
    chunks = [c for c in np.array_split(np.arange(n_atoms), workers) if len(c)]
    if workers == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(work, c) for c in chunks]:
                f.result()
    return plan.out_times, result


@dataclass(frozen=True, eq=False)
class EchoTrace:
    times: np.ndarray
    coherence: np.ndarray  # P(t), complex
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.coherence) ** 2


def _hash_inputs(seq, spec, params, dt_out) -> str:
    text = repr((seq, spec, params, float(dt_out)))
    return hashlib.sha256(text.encode()).hexdigest()


def run_ensemble(seq: PulseSequence, spec: EnsembleSpec, params: SystemParams,
                 dt_out: float, workers: int = 1,
                 steps_per_radian: float = STEPS_PER_RADIAN) -> EchoTrace:
    grid = sample_detunings(spec)
    times, rho13 = evolve_grid(seq, grid, params, dt_out, ((0, 2),), workers,
                               steps_per_radian)
    P = pairwise_sum(grid.weights[:, None] * rho13[:, :, 0])
    meta = {"scenario_hash": _hash_inputs(seq, spec, params, dt_out),
            "fwhm_khz": spec.fwhm, "span_khz": spec.span,
            "segments": spec.segments, "spin_fwhm_khz": spec.spin_fwhm}
    return EchoTrace(times, P, meta)


# --------------------------------------------------------------------------
# readout
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EchoMetrics:
    peak_time: float
    peak_amplitude: float
    peak_intensity: float
    energies: Dict[str, float]
    efficiency: float
    fwhm: float


def _window_mask(times, window, name):
    a, b = window
    mask = (times >= a - 1e-9) & (times <= b + 1e-9)
    if not mask.any():
        raise ValueError(f"window {name!r} [{a:g}, {b:g}] us contains no samples")
    return mask


def _half_max_width(t, y):
    """Full width at half maximum of a sampled peak (linear interpolation)."""
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    if half <= 0:
        return 0.0
    j = i
    while j > 0 and y[j] > half:
        j -= 1
    k = i
    while k < len(y) - 1 and y[k] > half:
        k += 1
    if y[j] > half or y[k] > half:
        return float("nan")  # peak not resolved inside the window
    left = t[j] + (half - y[j]) * (t[j + 1] - t[j]) / (y[j + 1] - y[j])
    right = t[k - 1] + (y[k - 1] - half) * (t[k] - t[k - 1]) / (y[k - 1] - y[k])
    return float(right - left)


def echo_metrics(trace: EchoTrace, windows: Mapping[str, Tuple[float, float]]) -> EchoMetrics:
    """Peak and windowed energies of an echo trace.

    ``windows`` maps a label to a time interval and must contain ``"echo"``.
    Energies are trapezoidal integrals of |P|^2; the efficiency is the echo
    energy over the ``"D"`` window energy (0 when there is no data energy).
    """
    if "echo" not in windows:
        raise ValueError("windows must include an 'echo' interval")
    t, absP = trace.times, np.abs(trace.coherence)
    spans = sorted((tuple(w), name) for name, w in windows.items())
    for (a0, name0), (a1, name1) in zip(spans, spans[1:]):
        if a1[0] < a0[1]:
            raise ValueError(f"windows {name0!r} and {name1!r} overlap")
    energies = {}
    for name, w in windows.items():
        m = _window_mask(t, w, name)
        energies[name] = float(np.trapezoid(absP[m] ** 2, t[m])) if m.sum() > 1 else 0.0
    m = _window_mask(t, windows["echo"], "echo")
    te, ye = t[m], absP[m]
    i = int(np.argmax(ye))
    data = energies.get("D", 0.0)
    eff = energies["echo"] / data if data > 0 else 0.0
    return EchoMetrics(float(te[i]), float(ye[i]), float(ye[i] ** 2), energies, eff,
                       _half_max_width(te, ye))
