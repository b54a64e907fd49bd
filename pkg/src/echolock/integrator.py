"""Fixed-step RK4 evolution of one atom's 3x3 density matrix.

Rotating-frame Hamiltonian (hbar = 1, basis |1>, |2>, |3>)::

        [ d1    0   -W1 ]
    H = [ 0     d2  -W2 ]
        [ -W1*  -W2*  0 ]

with W_c = Omega_c(t) exp(i phase) summed over the pulses on channel c.
This reproduces drho13/dt = -i W1 (rho11 - rho33) - i W2 rho12 - i d1 rho13
- g13 rho13. Population decay of |3> feeds |1> and |2> (and |2> relaxes
into |1>), so the trace is conserved.

The window is cut at every output time and every pulse edge; inside each
piece the step is constant, h = length / ceil(length * STEPS_PER_RADIAN *
f_max), where f_max is the largest of |d1|, |d2|, the peak Rabi frequency of
the pulses on in that piece, and the decay rates (all rad/us). No
renormalisation is applied, so trace and Hermiticity drift stay visible.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numba
import numpy as np

from .model import AtomState, PulseSequence, SystemParams
from .sequence import area_to_amplitude

STEPS_PER_RADIAN = 100.0


class IntegrationError(RuntimeError):
    def __init__(self, t, detail="non-finite density matrix"):
        self.t = t
        super().__init__(f"{detail} at t = {t:.6g} us")


@dataclass(frozen=True)
class AtomContext:
    """Detunings in rad/us plus the relaxation rates."""

    delta1: float
    delta2: float
    params: SystemParams

    def __post_init__(self):
        if not (math.isfinite(self.delta1) and math.isfinite(self.delta2)):
            raise ValueError("detunings must be finite")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    rho: np.ndarray  # (n_out, 3, 3) complex

    def __len__(self):
        return len(self.times)

    def state(self, i) -> AtomState:
        return AtomState(self.rho[i])

    def element(self, j, k) -> np.ndarray:
        return self.rho[:, j, k]


def derivative(rho, omega1, omega2, ctx: AtomContext) -> np.ndarray:
    """Right-hand side drho/dt (reference implementation, plain numpy)."""
    rho = rho.rho if isinstance(rho, AtomState) else np.asarray(rho, dtype=complex)
    g31, g32, g21, g13, g23, g12 = ctx.params.angular()
    H = np.array([[ctx.delta1, 0, -omega1],
                  [0, ctx.delta2, -omega2],
                  [-np.conj(omega1), -np.conj(omega2), 0]], dtype=complex)
    d = -1j * (H @ rho - rho @ H)
    d[0, 0] += g31 * rho[2, 2] + g21 * rho[1, 1]
    d[1, 1] += g32 * rho[2, 2] - g21 * rho[1, 1]
    d[2, 2] -= (g31 + g32) * rho[2, 2]
    for (j, k), g in (((0, 1), g12), ((0, 2), g13), ((1, 2), g23)):
        d[j, k] -= g * rho[j, k]
        d[k, j] -= g * rho[k, j]
    return d


# --------------------------------------------------------------------------
# numba kernel
# --------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _rhs(r, w1, w2, d1, d2, rates, out):
    c1 = w1.conjugate()
    c2 = w2.conjugate()
    for j in range(3):
        for k in range(3):
            if j == 0:
                hr = d1 * r[0, k] - w1 * r[2, k]
            elif j == 1:
                hr = d2 * r[1, k] - w2 * r[2, k]
            else:
                hr = -c1 * r[0, k] - c2 * r[1, k]
            if k == 0:
                rh = r[j, 0] * d1 - r[j, 2] * c1
            elif k == 1:
                rh = r[j, 1] * d2 - r[j, 2] * c2
            else:
                rh = -r[j, 0] * w1 - r[j, 1] * w2
            out[j, k] = -1j * (hr - rh)
    g31 = rates[0]
    g32 = rates[1]
    g21 = rates[2]
    p22 = r[1, 1]
    p33 = r[2, 2]
    out[0, 0] += g31 * p33 + g21 * p22
    out[1, 1] += g32 * p33 - g21 * p22
    out[2, 2] -= (g31 + g32) * p33
    out[0, 1] -= rates[5] * r[0, 1]
    out[1, 0] -= rates[5] * r[1, 0]
    out[0, 2] -= rates[3] * r[0, 2]
    out[2, 0] -= rates[3] * r[2, 0]
    out[1, 2] -= rates[4] * r[1, 2]
    out[2, 1] -= rates[4] * r[2, 1]


@numba.njit(cache=True, nogil=True)
def _fields(t, tmid, chan, shape, t0, dur, amp, cph, sph, lo, hi):
    # a pulse is on for the whole step when the step midpoint is in its support
    w1 = 0j
    w2 = 0j
    for q in range(chan.shape[0]):
        if tmid < lo[q] or tmid > hi[q]:
            continue
        if shape[q] == 0:
            env = amp[q]
        else:
            env = amp[q] / math.cosh((t - t0[q]) / dur[q])
        w = env * (cph[q] + 1j * sph[q])
        if chan[q] == 1:
            w1 += w
        else:
            w2 += w
    return w1, w2


@numba.njit(cache=True, nogil=True)
def _propagate(rho0, d1, d2, rates, bounds, field_fmax, steps_per_radian,
               chan, shape, t0, dur, amp, cph, sph, lo, hi, out_slot, out):
    r = rho0.copy()
    k1 = np.empty_like(r)
    k2 = np.empty_like(r)
    k3 = np.empty_like(r)
    k4 = np.empty_like(r)
    tmp = np.empty_like(r)
    fbase = max(abs(d1), abs(d2))
    for q in range(rates.shape[0]):
        fbase = max(fbase, rates[q])
    if out_slot[0] >= 0:
        out[out_slot[0]] = r
    for m in range(bounds.shape[0] - 1):
        a = bounds[m]
        length = bounds[m + 1] - a
        fmax = max(fbase, field_fmax[m])
        n = max(1, int(math.ceil(length * steps_per_radian * fmax)))
        h = length / n
        for s in range(n):
            t = a + s * h
            tmid = t + 0.5 * h
            wa1, wa2 = _fields(t, tmid, chan, shape, t0, dur, amp, cph, sph, lo, hi)
            wb1, wb2 = _fields(tmid, tmid, chan, shape, t0, dur, amp, cph, sph, lo, hi)
            wc1, wc2 = _fields(t + h, tmid, chan, shape, t0, dur, amp, cph, sph, lo, hi)
            _rhs(r, wa1, wa2, d1, d2, rates, k1)
            for j in range(3):
                for k in range(3):
                    tmp[j, k] = r[j, k] + 0.5 * h * k1[j, k]
            _rhs(tmp, wb1, wb2, d1, d2, rates, k2)
            for j in range(3):
                for k in range(3):
                    tmp[j, k] = r[j, k] + 0.5 * h * k2[j, k]
            _rhs(tmp, wb1, wb2, d1, d2, rates, k3)
            for j in range(3):
                for k in range(3):
                    tmp[j, k] = r[j, k] + h * k3[j, k]
            _rhs(tmp, wc1, wc2, d1, d2, rates, k4)
            for j in range(3):
                for k in range(3):
                    r[j, k] += h / 6.0 * (k1[j, k] + 2.0 * k2[j, k] + 2.0 * k3[j, k] + k4[j, k])
        for j in range(3):
            if not (math.isfinite(r[j, j].real) and math.isfinite(r[j, j].imag)):
                return m
        slot = out_slot[m + 1]
        if slot >= 0:
            out[slot] = r
    return -1


# --------------------------------------------------------------------------
# step planning
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepPlan:
    """Atom-independent time partition and packed pulse table."""

    out_times: np.ndarray
    bounds: np.ndarray
    out_slot: np.ndarray
    field_fmax: np.ndarray
    pulses: tuple  # arrays passed straight to the kernel
    steps_per_radian: float


def output_times(t_start, t_end, dt_out):
    if not dt_out > 0:
        raise ValueError("dt_out must be > 0")
    n = int(math.floor((t_end - t_start) / dt_out + 1e-9)) + 1
    return t_start + dt_out * np.arange(n)


def plan_steps(seq: PulseSequence, dt_out: float,
               steps_per_radian: float = STEPS_PER_RADIAN) -> StepPlan:
    outs = output_times(seq.t_start, seq.t_end, dt_out)
    t_last = outs[-1]
    edges = []
    for p in seq.pulses:
        for e in p.support:
            if seq.t_start < e < t_last and np.min(np.abs(outs - e)) > 1e-9:
                edges.append(e)
    bounds = np.union1d(outs, np.array(edges, dtype=float))
    slot_of = {float(t): i for i, t in enumerate(outs)}
    out_slot = np.array([slot_of.get(float(t), -1) for t in bounds], dtype=np.int64)

    n = len(seq.pulses)
    chan = np.array([p.channel for p in seq.pulses], dtype=np.int64)
    shape = np.array([0 if p.shape == "square" else 1 for p in seq.pulses], dtype=np.int64)
    t0 = np.array([p.t0 for p in seq.pulses], dtype=float)
    dur = np.array([p.duration for p in seq.pulses], dtype=float)
    amp = np.array([area_to_amplitude(p) for p in seq.pulses], dtype=float)
    cph = np.cos([p.phase for p in seq.pulses]).astype(float).reshape(n)
    sph = np.sin([p.phase for p in seq.pulses]).astype(float).reshape(n)
    lo = np.array([p.support[0] for p in seq.pulses], dtype=float)
    hi = np.array([p.support[1] for p in seq.pulses], dtype=float)

    mids = 0.5 * (bounds[:-1] + bounds[1:])
    fmax = np.zeros(len(mids))
    for c in (1, 2):
        on = (mids[:, None] >= lo) & (mids[:, None] <= hi) & (chan == c)
        fmax = np.maximum(fmax, (on * amp).sum(axis=1) if n else 0.0)
    return StepPlan(outs, bounds, out_slot, fmax,
                    (chan, shape, t0, dur, amp, cph, sph, lo, hi), float(steps_per_radian))


def propagate(plan: StepPlan, rho0: np.ndarray, delta1: float, delta2: float,
              rates: np.ndarray, out: np.ndarray = None) -> np.ndarray:
    """Run the kernel for one atom; returns the (n_out, 3, 3) sampled states."""
    if out is None:
        out = np.empty((len(plan.out_times), 3, 3), dtype=complex)
    status = _propagate(np.ascontiguousarray(rho0, dtype=complex), float(delta1),
                        float(delta2), rates, plan.bounds, plan.field_fmax,
                        plan.steps_per_radian, *plan.pulses, plan.out_slot, out)
    if status >= 0:
        raise IntegrationError(plan.bounds[status + 1])
    return out


def evolve(seq: PulseSequence, ctx: AtomContext, dt_out: float,
           steps_per_radian: float = STEPS_PER_RADIAN, rho0=None) -> Trajectory:
    """Evolve one atom through ``seq``, sampling every ``dt_out`` us.

    ``rho0`` overrides the sequence's diagonal initial state.
    """
    plan = plan_steps(seq, dt_out, steps_per_radian)
    if rho0 is None:
        rho0 = seq.initial_state().rho
    elif isinstance(rho0, AtomState):
        rho0 = rho0.rho
    out = propagate(plan, rho0, ctx.delta1, ctx.delta2, ctx.params.angular())
    return Trajectory(plan.out_times, out)
