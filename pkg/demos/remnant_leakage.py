"""Imperfect B1 transfer with B2 held at 0.8 pi, swept over the B2 delay T.

Prints the normalised echo intensity and the decay-law fit for each B1
area. With the control field resonant for every atom, the |2>-|3> coherence
left by an imperfect B1 survives the delay and beats against B2, so the
curves need not decay; see "Known limitations" in the README.
"""
import numpy as np

from echolock.analysis import fit_decay
from echolock.cli import apply_override, load_scenario, simulate
from echolock.model import derived_t1_opt

delays = [0.9, 10, 20, 40, 70, 110]
for name in ("fig4_sweep_b1_060", "fig4_sweep_b1_080", "fig4_sweep_b1_100"):
    sc, _, _ = load_scenario(name)
    peaks = np.array([simulate(apply_override(sc, "T_b2_delay", T))[2].peak_intensity
                      for T in delays])
    norm = peaks / peaks[0]
    fit = fit_decay(zip(delays, norm))
    b1 = sc.sequence.by_role("B1")[0].area / np.pi
    print(f"B1 = {b1:.1f} pi  I/I0 = {np.round(norm, 3)}")
    print(f"            tau = {fit.tau:.3g} us  n = {fit.n:.3g}  asymptote = {fit.asymptote:.3f}")
print(f"optical T1 = {derived_t1_opt(sc.params):.2f} us")
