"""Ground state and unstable eigenpair for d=1, p=7.

Run: python demos/ground_state_and_spectrum.py
"""

#%% Imports
import numpy as np

from nlsexit.grid import make_grid
from nlsexit.ground_state import closed_form_Q_1d, solve_ground_state
from nlsexit.linearized import QuadFormContext, coercivity_probe, lambda1_power_iteration, solve_spectrum

#%% Ground state
grid = make_grid(1, 20.0, 2048)
gs = solve_ground_state(grid, 7)
print(f"Petviashvili iterations: {gs.iterations}")
print(f"max |Q - closed form| = {np.max(np.abs(gs.Q - closed_form_Q_1d(grid, 7))):.2e}")
print(f"elliptic residual     = {gs.elliptic_residual:.2e}")
print(f"mass, energy          = {gs.observables.mass:.12f}, {gs.observables.energy:.12f}")

#%% Spectrum of the linearization
ctx = QuadFormContext(gs)
sb = solve_spectrum(ctx)
print(f"\nlambda1 (dense)  = {sb.lambda1!r}")
lam, history = lambda1_power_iteration(ctx)
print(f"lambda1 (flow)   = {float(lam)!r}  after {len(history)} renormalizations")
for k, v in sb.residuals.items():
    print(f"  residual {k:12s} {v:.2e}")
print(f"F(e+, e-) = {sb.certificates['F_epem']!r}")

#%% Coercivity on B-perp
coer = coercivity_probe(sb, trials=200, seed=0)
print(f"\nmin F(g,g)/|g|^2_H1 over 200 random fields: {coer.c_min:.4f}")
