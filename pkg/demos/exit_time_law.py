"""Exit times from the soliton neighborhood against |log eps|.

A short ladder keeps this to about a minute.  For the full seven-point
ladder use the CLI: ``nlsexit exit-sweep --out sweep``.

Run: python demos/exit_time_law.py
"""

#%% Imports
import numpy as np

from nlsexit.experiments import ExperimentConfig, setup, sweep

cfg = ExperimentConfig(backward=False)
sb = setup(cfg)

#%% Sweep
rep = sweep([1e-2, 1e-3, 1e-4, 1e-5], 0.05, cfg, sb)

print(f"{'a':>8} {'eps':>12} {'T+':>9} {'S':>9} {'S/T+':>7} {'rate':>7}")
for r in rep.records:
    print(f"{r.a:8.0e} {r.eps:12.4e} {r.T_plus:9.5f} {r.S_accum:9.4f} {r.S_accum / r.T_plus:7.3f} {r.rate:7.3f}")

#%% Slopes
inv = 1 / rep.lambda1_ref
print(f"\nslope of T+ vs |log eps|: {rep.slope_T.slope:.5f}   1/lambda1 = {inv:.5f}")
print(f"slope of S  vs |log eps|: {rep.slope_S.slope:.5f}   int Q^9 / lambda1 = {inv * rep.density_ref:.5f}")
print(f"int Q^9 = {rep.density_ref:.6f}  (4 pi / 3 = {4 * np.pi / 3:.6f})")
