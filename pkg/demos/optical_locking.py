"""Optical locking: park the excited half of the grating in |2> and bring it back.

Without locking, the population grating written by W relaxes with the
optical T1; with a (pi, 3pi) B1/B2 pair the excited-state half is stored in
the spin level during the delay T and the echo survives.
"""
from dataclasses import replace

from echolock.cli import apply_override, load_scenario, simulate
from echolock.model import derived_t1_opt
from echolock.sequence import validate_locking, with_pulses

sc, _, _ = load_scenario("fig2ef_locked")
print(f"optical T1 = {derived_t1_opt(sc.params):.2f} us")
print(f"locking pair valid: {validate_locking(sc.sequence).valid}\n")
print("   T (us)   locked |P|   unlocked |P|")
for T in (5.0, 20.0, 40.0, 80.0):
    locked = apply_override(sc, "T_b2_delay", T)
    seq = locked.sequence
    unlocked = replace(locked, sequence=with_pulses(
        seq, [p for p in seq.pulses if p.role not in ("B1", "B2")]))
    a = simulate(locked)[2].peak_amplitude
    b = simulate(unlocked)[2].peak_amplitude
    print(f"  {T:7.1f}   {a:10.4f}   {b:12.4f}")
