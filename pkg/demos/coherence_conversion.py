"""What the rephasing pulse does to the grating while it is on.

Stop the clock just before R, then step through R in 1 ns samples. Halfway
through, the coherence grating is gone and the population grating in rho11
has full contrast; by the end of R the coherence is back with its phase
conjugated.
"""
import numpy as np

from echolock.cli import load_scenario
from echolock.ensemble import evolve_grid, sample_detunings
from echolock.model import PulseSequence

sc, _, _ = load_scenario("fig2_two_pulse")
d, r = sc.sequence.by_role("D")[0], sc.sequence.by_role("R")[0]
lo, hi = r.support
grid = sample_detunings(sc.ensemble)
els = [(j, k) for j in range(3) for k in range(3)]

_, s = evolve_grid(PulseSequence((d,), 0.0, lo), grid, sc.params, lo, els)
rho_lo = s[:, -1].reshape(-1, 3, 3)
t, s = evolve_grid(PulseSequence((r,), lo, hi), grid, sc.params, 0.001, els, rho0=rho_lo)
rho = s.reshape(len(grid), len(t), 3, 3)

grating = (grid.weights[:, None] * np.abs(rho[:, :, 0, 2].imag)).sum(axis=0)
contrast = np.ptp(rho[:, :, 0, 0].real, axis=0)
print("   t (us)  coherence grating  rho11 contrast")
for i in range(0, len(t), 20):
    print(f"  {t[i]:7.3f}  {grating[i] / grating[0]:17.3f}  {contrast[i]:14.3f}")
i = int(np.argmin(grating))
print(f"\nminimum {100 * grating[i] / grating[0]:.2f}% at t = {t[i]:.3f} us (R midpoint {r.t0:g} us)")
