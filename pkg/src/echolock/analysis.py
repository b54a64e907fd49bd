"""Closed-form models, fitting and analytic oracles."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .ensemble import FWHM_TO_SIGMA
from .integrator import AtomContext, evolve
from .model import EnsembleSpec, Pulse, PulseSequence, SystemParams, khz_to_angular

TIME_UNITS = ("us", "s")


# --------------------------------------------------------------------------
# remnant-population decay law
# --------------------------------------------------------------------------

def eval_decay_model(t, delta_t, tau, n):
    """Normalised echo intensity {exp[-(t - dT)/tau] + n}^2 / (n + 1)^2.

    ``n`` measures the coherence that survives the remnant-population leak;
    the curve starts at 1 for t = dT and settles at n^2 / (n + 1)^2.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < delta_t):
        raise ValueError("t must not precede delta_t (the shortest delay)")
    y = ((np.exp(-(t - delta_t) / tau) + n) / (n + 1.0)) ** 2
    return y if y.ndim else float(y)


def decay_asymptote(n):
    return (n / (n + 1.0)) ** 2


@dataclass(frozen=True)
class DecayFit:
    delta_t: float
    tau: float
    n: float
    rms: float
    unit: str = "us"

    @property
    def asymptote(self) -> float:
        return decay_asymptote(self.n)

    def __call__(self, t):
        return eval_decay_model(t, self.delta_t, self.tau, self.n)


def fit_decay(points: Iterable[Tuple[float, float]], unit: str = "us") -> DecayFit:
    """Least-squares fit of the decay law with dT pinned to the first point.

    A coarse log-spaced (tau, n) grid seeds a bounded Gauss-Newton
    refinement in (log tau, n).
    """
    if unit not in TIME_UNITS:
        raise ValueError(f"unit must be one of {TIME_UNITS}, got {unit!r}")
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (t, intensity) pairs")
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points to fit tau and n, got {len(pts)}")
    t, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        raise ValueError("flat data: every intensity is equal")
    dt = t - t[0]

    def model(logtau, n):
        return ((np.exp(-dt / np.exp(logtau)) + n) / (n + 1.0)) ** 2

    span = dt[-1]
    taus = np.logspace(np.log10(span) - 3, np.log10(span) + 2, 121)
    ns = np.concatenate([[0.0], np.logspace(-3, 3, 121)])
    T, N = np.meshgrid(np.log(taus), ns, indexing="ij")
    pred = ((np.exp(-dt[None, None, :] / np.exp(T)[..., None]) + N[..., None])
            / (N[..., None] + 1.0)) ** 2
    sse = ((pred - y) ** 2).sum(axis=-1)
    i, j = np.unravel_index(np.argmin(sse), sse.shape)

    # tau stays within the grid's decades; data that never decays pins it high
    lo, hi = np.log(taus[0]) - np.log(10.0), np.log(taus[-1]) + np.log(10.0)
    res = least_squares(lambda p: model(p[0], p[1]) - y, x0=[T[i, j], N[i, j]],
                        bounds=([lo, 0.0], [hi, np.inf]),
                        xtol=1e-12, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    logtau, n = res.x
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    return DecayFit(float(t[0]), float(np.exp(logtau)), float(n), rms, unit)


def read_decay_csv(path) -> Tuple[List[Tuple[float, float]], str]:
    """Two-column CSV with a header naming the time unit, e.g. ``t_us,intensity``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty file")
    head = [h.strip().lower() for h in rows[0]]
    if len(head) != 2 or not head[0].startswith("t_"):
        raise ValueError(f"{path}: header must be 't_<unit>,intensity', got {rows[0]}")
    unit = head[0][2:]
    if unit not in TIME_UNITS:
        raise ValueError(f"{path}: unknown time unit {unit!r}")
    pts = []
    for k, r in enumerate(rows[1:], start=2):
        try:
            pts.append((float(r[0]), float(r[1])))
        except (ValueError, IndexError):
            raise ValueError(f"{path}: line {k}: cannot read {r}") from None
    return pts, unit


# --------------------------------------------------------------------------
# population transfer, Beer's law
# --------------------------------------------------------------------------

def population_transfer_curve(phi_grid: Sequence[float]) -> List[Tuple[float, float]]:
    """Remnant rho33 after a resonant square pulse on |2>-|3>, starting in |3>.

    Simulated with the integrator (no decay); the analytic value is
    cos^2(phi / 2).
    """
    ctx = AtomContext(0.0, 0.0, SystemParams())
    out = []
    for phi in phi_grid:
        p = Pulse("B1", 2, "square", 0.5, 1.0, float(phi))
        seq = PulseSequence((p,), 0.0, 1.0, (0.0, 0.0, 1.0))
        traj = evolve(seq, ctx, dt_out=1.0)
        out.append((float(phi), float(traj.rho[-1, 2, 2].real)))
    return out


def beer_absorption(d):
    """Absorbed fraction 1 - exp(-d) at optical depth d."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("optical depth must be >= 0")
    out = -np.expm1(-d)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# spontaneous-emission noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseBudget:
    n0: float          # ions per cm^3
    volume: float      # cm^3
    n_atoms: float
    pulse_dt: float    # ns
    t1: float          # us
    eta: float
    n_e: float
    alpha: float
    n_f: float


def noise_budget(n0, volume, pulse_dt, t1, alpha) -> NoiseBudget:
    """Effective number of atoms adding spontaneous-emission noise to the echo.

    N = n0 V atoms sit in the interaction volume; the fraction radiating
    within one photon duration is eta = pulse_dt / t1; only the solid-angle
    fraction alpha reaches the echo mode: N_f = alpha * eta * N.
    """
    for name, v in (("n0", n0), ("volume", volume), ("pulse_dt", pulse_dt), ("t1", t1)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be > 0, got {v!r}")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")
    n_atoms = n0 * volume
    eta = (pulse_dt * 1e-9) / (t1 * 1e-6)
    n_e = eta * n_atoms
    return NoiseBudget(n0, volume, n_atoms, pulse_dt, t1, eta, n_e, alpha, alpha * n_e)


# --------------------------------------------------------------------------
# delta-pulse oracle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EchoPrediction:
    template: str
    echo_time: float
    amplitude: float
    fwhm: float


def echo_fwhm(fwhm_khz: float) -> float:
    """FWHM (us) of |P| for a Gaussian line of the given FWHM (kHz).

    The line's Fourier transform is a Gaussian in time with
    sigma_t = 1 / sigma_omega, so FWHM_t = 8 ln 2 / (2 pi FWHM).
    """
    return 1.0 / (khz_to_angular(fwhm_khz) * FWHM_TO_SIGMA ** 2)


def delta_pulse_oracle(seq: PulseSequence, spec: EnsembleSpec) -> EchoPrediction:
    """Echo time and |P| peak for instantaneous pulses and no decay.

    Two-pulse (D, R): echo at 2 t_R - t_D with |P| = sin(A_D) sin^2(A_R/2) / 2.
    Three-pulse (D, W, R): echo at t_R + t_W - t_D with
    |P| = sin(A_D) sin(A_W) sin(A_R) / 4. A B1/B2 pair, if present, is
    assumed to be a perfect locking pair and does not enter the prediction.
    """
    roles = {}
    for p in seq.pulses:
        if p.role in roles:
            raise ValueError(f"oracle needs one pulse per role, {p.role!r} repeats")
        roles[p.role] = p
    extra = set(roles) - {"D", "W", "R", "B1", "B2"}
    if extra or ("B1" in roles) != ("B2" in roles):
        raise ValueError(f"unrecognised template: roles {sorted(roles)}")
    if any(roles[r].channel != 1 for r in ("D", "W", "R") if r in roles):
        raise ValueError("unrecognised template: D/W/R must drive channel 1")
    width = echo_fwhm(spec.fwhm)
    if set(roles) == {"D", "R"}:
        d, r = roles["D"], roles["R"]
        amp = 0.5 * math.sin(d.area) * math.sin(r.area / 2) ** 2
        return EchoPrediction("two-pulse", 2 * r.t0 - d.t0, abs(amp), width)
    if {"D", "W", "R"} <= set(roles):
        d, w, r = roles["D"], roles["W"], roles["R"]
        if not d.t0 < w.t0 < r.t0:
            raise ValueError("unrecognised template: need t_D < t_W < t_R")
        amp = 0.25 * math.sin(d.area) * math.sin(w.area) * math.sin(r.area)
        return EchoPrediction("three-pulse", r.t0 + (w.t0 - d.t0), abs(amp), width)
    raise ValueError(f"unrecognised template: roles {sorted(roles)}")
