"""Command-line front end.

Subcommands::

    echolock run SCENARIO [--out DIR] [--workers N] [--set key=value ...]
    echolock sweep SCENARIO --param NAME --values V [V ...] [--fit]
    echolock fit CSV [--unit us|s]
    echolock noise [--n0 ...] [--volume ...] [--pulse-dt ...] [--t1 ...] [--alpha ...]
    echolock presets list

Exit codes: 0 success, 1 usage or parse error, 2 runtime failure.
A scenario path that does not exist on disk is looked up among the bundled
presets, so ``presets/fig2_two_pulse.scn`` and ``fig2_two_pulse`` both work.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .analysis import delta_pulse_oracle, fit_decay, noise_budget, read_decay_csv
from .ensemble import EchoMetrics, EchoTrace, echo_metrics, run_ensemble
from .integrator import IntegrationError
from .model import ROLES, ValidationError
from .sequence import (RunOptions, Scenario, ScenarioError, parse_scenario,
                       shift_b2_delay, validate_locking, with_pulses)

RATE_KEYS = {
    "gamma31_khz": "gamma31_pop", "gamma32_khz": "gamma32_pop",
    "gamma21_khz": "gamma21_pop", "deph13_khz": "deph13",
    "deph23_khz": "deph23", "deph12_khz": "deph12",
}
ENSEMBLE_KEYS = {"fwhm_khz": "fwhm", "span_khz": "span",
                 "segments": "segments", "spin_fwhm_khz": "spin_fwhm"}
SWEEP_PARAMS = (["T_b2_delay"] + [f"area.{r}" for r in ROLES]
                + ["fwhm_khz"] + list(RATE_KEYS))
SET_KEYS = SWEEP_PARAMS + ["span_khz", "segments", "spin_fwhm_khz",
                           "t_end_us", "dt_out_us"]


class UsageError(Exception):
    """Bad arguments or input files (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# scenarios and overrides
# --------------------------------------------------------------------------

def preset_names() -> List[str]:
    root = resources.files("echolock") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def read_scenario_text(path: str) -> Tuple[str, str]:
    """Return (text, resolved name); falls back to the bundled presets."""
    p = Path(path)
    if p.is_file():
        return p.read_text(), str(p)
    name = p.name[:-4] if p.name.endswith(".scn") else p.name
    if p.parent in (Path("."), Path("presets")) and name in preset_names():
        res = resources.files("echolock") / "presets" / f"{name}.scn"
        return res.read_text(), f"presets/{name}.scn"
    raise UsageError(f"cannot read scenario {path!r}: no such file or preset")


def apply_override(sc: Scenario, key: str, value: float) -> Scenario:
    """Scenario copy with one named parameter replaced (areas in units of pi)."""
    seq, opts = sc.sequence, sc.options
    try:
        if key == "T_b2_delay":
            old_end = seq.t_end
            seq = shift_b2_delay(seq, value)
            shift = seq.t_end - old_end
            window = opts.echo_window
            if window is not None:
                window = (window[0] + shift, window[1] + shift)
            opts = replace(opts, t_end=seq.t_end, echo_window=window)
        elif key.startswith("area."):
            role = key[5:]
            if role not in ROLES:
                raise UsageError(f"unknown role in {key!r}; roles are {', '.join(ROLES)}")
            if not seq.by_role(role):
                raise UsageError(f"scenario has no {role} pulse to override")
            ps = [replace(p, area=value * math.pi) if p.role == role else p
                  for p in seq.pulses]
            seq = with_pulses(seq, ps)
        elif key in RATE_KEYS:
            return replace(sc, params=replace(sc.params, **{RATE_KEYS[key]: value}))
        elif key in ENSEMBLE_KEYS:
            if key == "segments":
                if value != int(value):
                    raise UsageError("segments must be an integer")
                value = int(value)
            return replace(sc, ensemble=replace(sc.ensemble, **{ENSEMBLE_KEYS[key]: value}))
        elif key == "t_end_us":
            seq = with_pulses(seq, seq.pulses, t_end=value)
            opts = replace(opts, t_end=value)
        elif key == "dt_out_us":
            if not value > 0:
                raise UsageError("dt_out_us must be > 0")
            opts = replace(opts, dt_out=value)
        else:
            raise UsageError(f"unknown parameter {key!r}; valid names: {', '.join(SET_KEYS)}")
    except ValidationError as exc:
        raise UsageError(f"{key} = {value:g}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"{key} = {value:g}: {exc}") from None
    return replace(sc, sequence=seq, options=opts)


def _parse_set(items) -> List[Tuple[str, float]]:
    out = []
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out.append((key.strip(), float(raw)))
        except ValueError:
            raise UsageError(f"--set {key}: not a number: {raw!r}") from None
    return out


def load_scenario(path: str, overrides=()) -> Tuple[Scenario, str, bytes]:
    text, name = read_scenario_text(path)
    try:
        sc = parse_scenario(text)
    except ScenarioError as exc:
        raise UsageError(f"{name}: {exc}") from None
    for key, value in overrides:
        sc = apply_override(sc, key, value)
    return sc, name, text.encode()


# --------------------------------------------------------------------------
# readout windows
# --------------------------------------------------------------------------

def readout_windows(sc: Scenario) -> Dict[str, Tuple[float, float]]:
    """Echo window (and data window when there is a D pulse).

    The echo window is taken from ``[readout]`` if given, otherwise from the
    delta-pulse prediction +- one echo FWHM, starting no earlier than one FWHM
    after the last pulse preceding the echo (so the free-induction tail of
    that pulse stays out). Without a prediction it covers everything after
    the last pulse.
    """
    seq, opts = sc.sequence, sc.options
    pulses = seq.pulses
    last_end = max((p.support[1] for p in pulses), default=opts.t_start)
    echo = opts.echo_window
    width = None
    if echo is None:
        try:
            pred = delta_pulse_oracle(seq, sc.ensemble)
        except ValueError:
            pred = None
        if pred is not None:
            width = pred.fwhm
            before = [p.support[1] + width for p in pulses if p.t0 < pred.echo_time]
            lo = max([pred.echo_time - width] + before)
            hi = min(pred.echo_time + width, opts.t_end)
            if hi - lo > opts.dt_out:
                echo = (lo, hi)
    if echo is None:
        echo = (last_end, opts.t_end) if opts.t_end - last_end > opts.dt_out \
            else (opts.t_start, opts.t_end)
    windows = {"echo": echo}
    d = seq.by_role("D")
    if d:
        d = d[0]
        later = [p.support[0] for p in pulses if p.t0 > d.t0]
        hi = min([d.support[1] + (width or 0.0), echo[0]] + later)
        if hi > d.support[0] and not (d.support[0] < echo[1] and echo[0] < hi):
            windows["D"] = (d.support[0], hi)
    return windows


# --------------------------------------------------------------------------
# output writers
# --------------------------------------------------------------------------

def _g(x) -> str:
    return format(float(x), ".17g")


def trace_csv(trace: EchoTrace) -> str:
    lines = ["t_us,re_P,im_P,intensity"]
    for t, p, i in zip(trace.times, trace.coherence, trace.intensity):
        lines.append(f"{t:.6f},{_g(p.real)},{_g(p.imag)},{_g(i)}")
    return "\n".join(lines) + "\n"


def metrics_text(sc: Scenario, m: EchoMetrics, windows) -> str:
    rows = [("echo_peak_time_us", _g(m.peak_time)),
            ("echo_peak_amp", _g(m.peak_amplitude)),
            ("echo_peak_intensity", _g(m.peak_intensity)),
            ("echo_fwhm_us", _g(m.fwhm)),
            ("echo_energy", _g(m.energies["echo"])),
            ("data_energy", _g(m.energies.get("D", 0.0))),
            ("efficiency", _g(m.efficiency)),
            ("echo_window_us", f"{_g(windows['echo'][0])} {_g(windows['echo'][1])}")]
    try:
        pred = delta_pulse_oracle(sc.sequence, sc.ensemble)
        rows += [("oracle_template", pred.template),
                 ("oracle_echo_time_us", _g(pred.echo_time)),
                 ("oracle_echo_amp", _g(pred.amplitude))]
    except ValueError:
        pass
    if sc.sequence.by_role("B1") and sc.sequence.by_role("B2"):
        rows.append(("locking_valid", str(validate_locking(sc.sequence).valid).lower()))
    return "".join(f"{k}: {v}\n" for k, v in rows)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_outputs(out: Path, files: Dict[str, str], manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    listing = []
    for name, text in files.items():
        data = text.encode()
        (out / name).write_bytes(data)
        listing.append({"file": name, "sha256": _sha256(data)})
    manifest = dict(manifest, outputs=listing)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest(command, name, raw, args, overrides, started) -> dict:
    return {"tool": "echolock", "version": __version__, "command": command,
            "scenario": name, "scenario_sha256": _sha256(raw),
            "overrides": [[k, v] for k, v in overrides], "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - started, 3)}


def simulate(sc: Scenario, workers: int = 1):
    trace = run_ensemble(sc.sequence, sc.ensemble, sc.params, sc.options.dt_out,
                         workers=workers)
    windows = readout_windows(sc)
    return trace, windows, echo_metrics(trace, windows)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    started = time.perf_counter()
    overrides = _parse_set(args.set)
    sc, name, raw = load_scenario(args.scenario, overrides)
    trace, windows, m = simulate(sc, args.workers)
    files = {"trace.csv": trace_csv(trace), "metrics.txt": metrics_text(sc, m, windows)}
    write_outputs(Path(args.out), files,
                  _manifest("run", name, raw, args, overrides, started))
    print(f"echo peak {m.peak_amplitude:.6g} at {m.peak_time:.4f} us -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    if not args.values:
        raise UsageError("sweep needs at least one value (--values V [V ...])")
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {args.param!r}; valid names: "
                         f"{', '.join(SWEEP_PARAMS)}")
    overrides = _parse_set(args.set)
    base, name, raw = load_scenario(args.scenario, overrides)
    scenarios = [apply_override(base, args.param, v) for v in args.values]
    rows = []
    for v, sc in zip(args.values, scenarios):
        _, _, m = simulate(sc, args.workers)
        rows.append((v, m.peak_amplitude, m.peak_time, m.peak_intensity))
        print(f"{args.param} = {v:g}: echo peak {m.peak_amplitude:.6g} at "
              f"{m.peak_time:.4f} us", file=sys.stderr)
    ref = rows[0][3]
    lines = ["value,echo_peak_amp,echo_peak_time_us,intensity_norm"]
    norm = []
    for v, amp, tp, inten in rows:
        norm.append(inten / ref if ref > 0 else float("nan"))
        lines.append(f"{_g(v)},{_g(amp)},{_g(tp)},{_g(norm[-1])}")
    files = {"sweep.csv": "\n".join(lines) + "\n"}
    if args.fit:
        try:
            fit = fit_decay(list(zip(args.values, norm)))
        except ValueError as exc:
            raise UsageError(f"cannot fit the sweep: {exc}") from None
        files["fit.txt"] = _fit_text(fit)
        print(files["fit.txt"], end="")
    man = _manifest("sweep", name, raw, args, overrides, started)
    man["sweep"] = {"param": args.param, "values": list(args.values)}
    write_outputs(Path(args.out), files, man)
    return 0


def _fit_text(fit) -> str:
    return (f"delta_t: {_g(fit.delta_t)}\ntau: {_g(fit.tau)}\nn: {_g(fit.n)}\n"
            f"asymptote: {_g(fit.asymptote)}\nrms: {_g(fit.rms)}\nunit: {fit.unit}\n")


def cmd_fit(args) -> int:
    try:
        points, unit = read_decay_csv(args.csv)
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv!r}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.unit and args.unit != unit:
        raise UsageError(f"--unit {args.unit} disagrees with the file header (t_{unit})")
    try:
        fit = fit_decay(points, unit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = _fit_text(fit)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit.txt").write_text(text)
    return 0


def cmd_noise(args) -> int:
    try:
        nb = noise_budget(args.n0, args.volume, args.pulse_dt, args.t1, args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"N: {nb.n_atoms:.6g}\neta: {nb.eta:.6g}\nN_e: {nb.n_e:.6g}\n"
          f"alpha: {nb.alpha:.6g}\nN_f: {nb.n_f:.6g}")
    return 0


def cmd_presets(args) -> int:
    root = resources.files("echolock") / "presets"
    for name in preset_names():
        head = (root / f"{name}.scn").read_text().splitlines()[0].lstrip("# ").strip()
        print(f"{name:22s} {head}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="echolock", description="Optically locked photon-echo simulator.")
    ap.add_argument("--version", action="version", version=f"echolock {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help=f"scenario override; keys: {', '.join(SET_KEYS)}")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rerun a scenario over parameter values")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--values", nargs="*", type=float, default=[])
    p.add_argument("--fit", action="store_true", help="fit the decay law to the sweep")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit the decay law to a (t, intensity) CSV")
    p.add_argument("csv")
    p.add_argument("--unit", choices=("us", "s"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("noise", help="spontaneous-emission noise budget")
    p.add_argument("--n0", type=float, default=4.7e18, help="ions per cm^3")
    p.add_argument("--volume", type=float, default=1e-7, help="cm^3")
    p.add_argument("--pulse-dt", type=float, default=0.1, help="photon duration, ns")
    p.add_argument("--t1", type=float, default=160.0, help="spontaneous decay time, us")
    p.add_argument("--alpha", type=float, default=1e-7, help="solid-angle ratio")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("presets", help="bundled scenarios")
    p.add_argument("action", choices=("list",))
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if getattr(args, "workers", 1) < 1:
        print("echolock: error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"echolock: error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"echolock: simulation failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"echolock: simulation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
