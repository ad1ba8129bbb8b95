"""
How the minimum gate time depends on the drive-amplitude units
==============================================================

``Omega_max`` bounds the Rabi frequency in the same angular units as ``g``.
If amplitudes were instead quoted as cyclic frequencies, every drive term
would be ``2 pi`` times larger. ``DeviceModel.drive_scale`` applies such a
factor so the two readings can be compared at the same nominal
``Omega_max``. The library defaults to ``drive_scale = 1``.
"""

import numpy as np

from quditspeed.grape import OptimizationConfig, optimize
from quditspeed.model import DeviceModel

for scale in (1.0, 2 * np.pi):
    device = DeviceModel(drive_scale=scale)
    for omega, T in ((10.0, 0.40), (3.0, 0.80)):
        config = OptimizationConfig(T=T, omega_max=omega, M=40, restarts=2, max_iters=600, seed=0,
                                    device=device)
        run = optimize(config)
        print(f"drive_scale {scale:5.3f}  Omega_max {omega:4.0f} g  T {T:.2f} T_min  "
              f"1-F = {1 - run.best_report.f:.2e}")
