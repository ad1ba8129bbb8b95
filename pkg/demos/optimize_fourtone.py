"""
Optimizing FourTone pulses below T_min
======================================

Two tones per transmon (0-1 and 1-2) are optimized as piecewise-constant
complex amplitudes under ``|Omega| <= Omega_max``. The gradient of the loss
comes from one forward and one adjoint sweep. This run uses a small budget;
the acceptance suite runs the full one.
"""

import numpy as np

from quditspeed.grape import OptimizationConfig, finite_difference_gradient, gradient, optimize
from quditspeed.model import T_MIN

config = OptimizationConfig(T=0.8, omega_max=20.0, M=20, restarts=2, max_iters=300, seed=0)
run = optimize(config)

print(f"T = {config.T} T_min, Omega_max = {config.omega_max} g")
print(f"best 1-F = {1 - run.best_report.f:.3e} after {run.iterations_executed} iterations "
      f"(restart {run.best_restart.index})")
print("best loss every 50 iterations:", np.round(run.best_restart.history[::50], 6))

# The analytic gradient agrees with central differences on the optimum.
ctx = config.context()
g = gradient(run.best_pulses, ctx)
fd = finite_difference_gradient(run.best_pulses, ctx, 1e-5 * config.omega_max)
print("max |adjoint - finite difference| =", np.max(np.abs(g - fd)))
# radial clipping keeps every amplitude on or inside the disc, up to round-off
print("largest amplitude / Omega_max - 1:", run.best_pulses.max_amplitude() / config.omega_max - 1)
print("gate time in units of 1/g:", config.gate_time, "=", config.T * T_MIN)
