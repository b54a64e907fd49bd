"""Small closed-form checks: transfer curve, Beer's law and the noise budget."""
import numpy as np

from echolock.analysis import beer_absorption, noise_budget, population_transfer_curve

# remnant rho33 after a B1 pulse, next to what is left unabsorbed at depth d
for phi, d in ((0.6, 1.0), (0.8, 2.4)):
    (_, rem), = population_transfer_curve([phi * np.pi])
    print(f"B1 = {phi} pi: remnant {rem:.3f}   |  d = {d}: e^-d = {1 - beer_absorption(d):.3f}")

nb = noise_budget(n0=4.7e18, volume=1e-7, pulse_dt=0.1, t1=160.0, alpha=1e-7)
print(f"\nN = {nb.n_atoms:.2e}  eta = {nb.eta:.2e}  N_e = {nb.n_e:.2e}  N_f = {nb.n_f:.3f}")
