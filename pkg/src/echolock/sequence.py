"""Pulse envelopes, static sequence checks and the scenario file format.

Scenario files are TOML documents::

    [system]            # rates in kHz, all default to 0
    gamma31_khz = 5.0
    [ensemble]
    fwhm_khz = 340.0
    span_khz = 800.0
    segments = 401      # odd, default 401
    [window]
    t_start_us = 0.0
    t_end_us = 45.0
    dt_out_us = 0.05
    [init]              # default rho11 = 1
    rho11 = 1.0
    [[pulse]]
    role = "D"
    channel = 1
    shape = "sech"
    t0_us = 5.0
    duration_us = 0.1
    area_pi = 0.5       # or area_rad = 1.5707963267948966
    phase_rad = 0.0     # optional
    k = "0,0,1"         # optional

An optional ``[readout]`` table (``echo_start_us``, ``echo_end_us``) pins the
echo search window; otherwise it is predicted from the pulse timing.
"""
from __future__ import annotations

import math
import sys
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .model import (SECH_CUTOFF, EnsembleSpec, Pulse, PulseSequence,
                    SystemParams, ValidationError)


# --------------------------------------------------------------------------
# envelopes
# --------------------------------------------------------------------------

def area_to_amplitude(p: Pulse) -> float:
    """Peak angular Rabi frequency (rad/us) giving the pulse its area.

    With area = 2 * integral(Omega dt): a square pulse has
    Omega0 = area / (2 * duration); a sech pulse, whose untruncated integral
    is pi / beta, has Omega0 = area * beta / (2 pi).
    """
    if p.shape == "square":
        return p.area / (2.0 * p.duration)
    beta = 1.0 / p.duration
    return p.area * beta / (2.0 * math.pi)


def rabi_envelope(p: Pulse, t):
    """Real Rabi envelope Omega(t) in rad/us; accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    omega0 = area_to_amplitude(p)
    x = t - p.t0
    if p.shape == "square":
        out = np.where(np.abs(x) <= 0.5 * p.duration, omega0, 0.0)
    else:
        bx = x / p.duration
        inside = np.abs(bx) <= SECH_CUTOFF
        out = np.where(inside, omega0 / np.cosh(np.where(inside, bx, 0.0)), 0.0)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# locking and phase matching
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LockingReport:
    sum_area: float
    b1_area: float
    n_sum: Optional[int]
    n_b1: Optional[int]
    valid: bool
    tolerance: float


def validate_locking(seq: PulseSequence, tol: float = math.pi / 100) -> LockingReport:
    """Check the deshelving pair against the phase-recovery conditions.

    B1 + B2 must be 4 n pi (n >= 1) and B1 must be (2 m - 1) pi (m >= 1),
    each within ``tol`` radians. The first B1 and first B2 pulse are used.
    """
    b1, b2 = seq.by_role("B1"), seq.by_role("B2")
    if not b1 or not b2:
        missing = [r for r, ps in (("B1", b1), ("B2", b2)) if not ps]
        raise ValueError(f"locking check needs B1 and B2 pulses; missing {missing}")
    a1, a2 = b1[0].area, b2[0].area
    total = a1 + a2

    n = round(total / (4 * math.pi))
    n_sum = n if n >= 1 and abs(total - 4 * n * math.pi) <= tol else None
    m = round((a1 / math.pi + 1) / 2)
    n_b1 = m if m >= 1 and abs(a1 - (2 * m - 1) * math.pi) <= tol else None
    return LockingReport(total, a1, n_sum, n_b1,
                         n_sum is not None and n_b1 is not None, tol)


@dataclass(frozen=True)
class PhaseMatchResult:
    k_echo: Tuple[float, float, float]
    omega_echo: Dict[str, int]

    @property
    def direction(self) -> str:
        """'forward' or 'backward' relative to +z."""
        return "forward" if self.k_echo[2] >= 0 else "backward"


def check_phase_matching(k_D, k_W, k_R, channels=(1, 1, 1)) -> PhaseMatchResult:
    """Echo wavevector -k_D + k_W + k_R and its symbolic carrier label.

    ``channels`` gives the carrier of D, W and R; the frequency combination is
    kept symbolic, e.g. {'w1': 1} when all three pulses sit on channel 1.
    """
    vecs = []
    for name, k in (("k_D", k_D), ("k_W", k_W), ("k_R", k_R)):
        k = np.asarray(k, dtype=float)
        if k.shape != (3,) or abs(np.linalg.norm(k) - 1.0) > 1e-9:
            raise ValidationError(name, "must be a unit 3-vector")
        vecs.append(k)
    k_echo = -vecs[0] + vecs[1] + vecs[2]
    omega = Counter()
    for sign, ch in zip((-1, 1, 1), channels):
        omega[f"w{ch}"] += sign
    omega = {key: c for key, c in sorted(omega.items()) if c != 0}
    return PhaseMatchResult(tuple(float(x) for x in k_echo), omega)


# --------------------------------------------------------------------------
# scenario files
# --------------------------------------------------------------------------

class ScenarioError(ValueError):
    """Scenario text could not be turned into a valid configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


@dataclass(frozen=True)
class RunOptions:
    t_start: float
    t_end: float
    dt_out: float
    echo_window: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class Scenario:
    params: SystemParams
    ensemble: EnsembleSpec
    sequence: PulseSequence
    options: RunOptions


_SYSTEM_KEYS = {
    "gamma31_khz": "gamma31_pop", "gamma32_khz": "gamma32_pop",
    "gamma21_khz": "gamma21_pop", "deph13_khz": "deph13",
    "deph23_khz": "deph23", "deph12_khz": "deph12",
}
_PULSE_REQUIRED = ("role", "channel", "shape", "t0_us", "duration_us")
_PULSE_OPTIONAL = ("area_pi", "area_rad", "phase_rad", "k")
_SECTIONS = ("system", "ensemble", "window", "init", "pulse", "readout")


def _number(table, key, where, default=None):
    if key not in table:
        if default is None:
            raise ScenarioError("required key missing", f"{where}.{key}")
        return float(default)
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a plain number in the documented unit, got {v!r}",
                            f"{where}.{key}")
    return float(v)


def _reject_unknown(table, allowed, where):
    for key in table:
        if key not in allowed:
            raise ScenarioError("unknown key", f"{where}.{key}")


def _parse_k(text, where):
    if not isinstance(text, str):
        raise ScenarioError('expected a string "x,y,z"', where)
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ScenarioError(f'cannot read {text!r} as "x,y,z"', where) from None
    if len(parts) != 3:
        raise ScenarioError(f"need three components, got {len(parts)}", where)
    return parts


def _wrap(build, key):
    try:
        return build()
    except ValidationError as exc:
        raise ScenarioError(str(exc), f"{key}.{exc.field}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; every default is filled in."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None
    _reject_unknown(doc, _SECTIONS, "scenario")

    system = doc.get("system", {})
    _reject_unknown(system, _SYSTEM_KEYS, "system")
    params = _wrap(lambda: SystemParams(**{
        field: _number(system, key, "system", 0.0) for key, field in _SYSTEM_KEYS.items()
    }), "system")

    if "ensemble" not in doc:
        raise ScenarioError("required section missing", "ensemble")
    ens = doc["ensemble"]
    _reject_unknown(ens, ("fwhm_khz", "span_khz", "segments", "spin_fwhm_khz"), "ensemble")
    segments = ens.get("segments", 401)
    if isinstance(segments, bool) or not isinstance(segments, int):
        raise ScenarioError(f"expected an integer, got {segments!r}", "ensemble.segments")
    spec = _wrap(lambda: EnsembleSpec(
        fwhm=_number(ens, "fwhm_khz", "ensemble"),
        span=_number(ens, "span_khz", "ensemble"),
        segments=segments,
        spin_fwhm=_number(ens, "spin_fwhm_khz", "ensemble", 0.0),
    ), "ensemble")

    if "window" not in doc:
        raise ScenarioError("required section missing", "window")
    win = doc["window"]
    _reject_unknown(win, ("t_start_us", "t_end_us", "dt_out_us"), "window")
    t_start = _number(win, "t_start_us", "window", 0.0)
    t_end = _number(win, "t_end_us", "window")
    dt_out = _number(win, "dt_out_us", "window", 0.05)
    if not dt_out > 0:
        raise ScenarioError("must be > 0", "window.dt_out_us")

    init = doc.get("init", {})
    _reject_unknown(init, ("rho11", "rho22", "rho33"), "init")
    if init:
        pops = tuple(_number(init, k, "init", 0.0) for k in ("rho11", "rho22", "rho33"))
    else:
        pops = (1.0, 0.0, 0.0)

    raw_pulses = doc.get("pulse", [])
    if not isinstance(raw_pulses, list):
        raise ScenarioError("use [[pulse]] tables", "pulse")
    pulses = []
    for i, pt in enumerate(raw_pulses):
        where = f"pulse[{i}]"
        _reject_unknown(pt, _PULSE_REQUIRED + _PULSE_OPTIONAL, where)
        for key in ("role", "shape"):
            if key not in pt:
                raise ScenarioError("required key missing", f"{where}.{key}")
            if not isinstance(pt[key], str):
                raise ScenarioError(f"expected a string, got {pt[key]!r}", f"{where}.{key}")
        if "channel" not in pt:
            raise ScenarioError("required key missing", f"{where}.channel")
        channel = pt["channel"]
        if isinstance(channel, bool) or not isinstance(channel, int):
            raise ScenarioError(f"expected 1 or 2, got {channel!r}", f"{where}.channel")
        if ("area_pi" in pt) == ("area_rad" in pt):
            raise ScenarioError("give exactly one of area_pi, area_rad", f"{where}.area_pi")
        if "area_pi" in pt:
            area = _number(pt, "area_pi", where) * math.pi
        else:
            area = _number(pt, "area_rad", where)
        pulses.append(_wrap(lambda: Pulse(
            role=pt["role"], channel=channel, shape=pt["shape"],
            t0=_number(pt, "t0_us", where),
            duration=_number(pt, "duration_us", where),
            area=area,
            phase=_number(pt, "phase_rad", where, 0.0),
            wavevector=_parse_k(pt.get("k", "0,0,1"), f"{where}.k"),
        ), where))
    pulses.sort(key=lambda p: p.t0)
    seq = _wrap(lambda: PulseSequence(tuple(pulses), t_start, t_end, pops), "sequence")

    window = None
    if "readout" in doc:
        ro = doc["readout"]
        _reject_unknown(ro, ("echo_start_us", "echo_end_us"), "readout")
        window = (_number(ro, "echo_start_us", "readout"), _number(ro, "echo_end_us", "readout"))
        if not (t_start <= window[0] < window[1] <= t_end):
            raise ScenarioError("echo window must be a non-empty interval inside the "
                                "simulation window", "readout")
    return Scenario(params, spec, seq, RunOptions(t_start, t_end, dt_out, window))


def _area_line(area: float) -> str:
    # area_pi when some value times pi gives the stored area bit for bit
    x = area / math.pi
    for cand in (x, np.nextafter(x, np.inf), np.nextafter(x, -np.inf)):
        if float(cand) * math.pi == area:
            return f"area_pi = {_fmt(cand)}"
    return f"area_rad = {_fmt(area)}"


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario` (comments are not preserved)."""
    p, e, s, o = sc.params, sc.ensemble, sc.sequence, sc.options
    lines = ["[system]"]
    for key, field in _SYSTEM_KEYS.items():
        lines.append(f"{key} = {_fmt(getattr(p, field))}")
    lines += ["", "[ensemble]",
              f"fwhm_khz = {_fmt(e.fwhm)}", f"span_khz = {_fmt(e.span)}",
              f"segments = {e.segments}", f"spin_fwhm_khz = {_fmt(e.spin_fwhm)}",
              "", "[window]",
              f"t_start_us = {_fmt(o.t_start)}", f"t_end_us = {_fmt(o.t_end)}",
              f"dt_out_us = {_fmt(o.dt_out)}",
              "", "[init]"]
    for key, x in zip(("rho11", "rho22", "rho33"), s.populations):
        lines.append(f"{key} = {_fmt(x)}")
    if o.echo_window is not None:
        lines += ["", "[readout]", f"echo_start_us = {_fmt(o.echo_window[0])}",
                  f"echo_end_us = {_fmt(o.echo_window[1])}"]
    for pl in s.pulses:
        k = ",".join(repr(float(x)) for x in pl.wavevector)
        lines += ["", "[[pulse]]", f'role = "{pl.role}"', f"channel = {pl.channel}",
                  f'shape = "{pl.shape}"', f"t0_us = {_fmt(pl.t0)}",
                  f"duration_us = {_fmt(pl.duration)}", _area_line(pl.area),
                  f"phase_rad = {_fmt(pl.phase)}", f'k = "{k}"']
    return "\n".join(lines) + "\n"


def with_pulses(seq: PulseSequence, pulses: Sequence[Pulse], t_end=None) -> PulseSequence:
    """Copy of ``seq`` with a new pulse list (re-sorted) and optional new end time."""
    ps = tuple(sorted(pulses, key=lambda p: p.t0))
    return PulseSequence(ps, seq.t_start, seq.t_end if t_end is None else t_end,
                         seq.populations)


def shift_b2_delay(seq: PulseSequence, delay: float, t_end=None) -> PulseSequence:
    """Place B2 ``delay`` us after B1; R and any later pulse move with B2."""
    b1, b2 = seq.by_role("B1"), seq.by_role("B2")
    if not b1 or not b2:
        raise ValueError("sequence has no B1/B2 pair to move")
    shift = (b1[0].t0 + delay) - b2[0].t0
    moved = [replace(p, t0=p.t0 + shift) if p.t0 >= b2[0].t0 else p for p in seq.pulses]
    return with_pulses(seq, moved, t_end=(seq.t_end + shift) if t_end is None else t_end)
