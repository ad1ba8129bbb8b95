"""
Minimum gate time against the amplitude bound
=============================================

For a fixed ``Omega_max`` the optimizer is run on an ascending grid of gate
times, each point warm-started from the previous optimum. ``T_F`` is the
shortest time reaching the fidelity threshold. No point below the
speed-limit bound can reach it. The closed-form duration of the exact
three-step FourTone sequence is shown for comparison.
"""

from quditspeed.grape import OptimizationConfig, scan_min_time
from quditspeed.model import T_MIN
from quditspeed.protocols import t_exact

threshold = 0.99
for omega in (10.0, 40.0):
    config = OptimizationConfig(T=0.5, omega_max=omega, M=20, restarts=1, max_iters=200, seed=0,
                                target_infidelity=1 - threshold)
    scan = scan_min_time(config, threshold, [0.5, 0.7, 0.9, 1.1], stop_when_reached=True)
    for T, f in zip(scan.times, scan.fidelities):
        print(f"Omega_max = {omega:4.0f} g  T = {T:.2f} T_min  F = {f:.5f}")
    print(f"  T_F = {scan.t_f} T_min, exact sequence needs {t_exact(omega) / T_MIN:.3f} T_min")
