"""
Speed-limit bounds and the protocols that reach them
=====================================================

The time to make an iSWAP with a coupling Hamiltonian ``H_c`` is at least
``pi / (2 ||H_c||)``. Using more transmon levels increases the operator norm
of the same physical coupling, which lowers the bound. This script lists the
bound for each coupling family and checks that the matching gate sequences
reach it with unit fidelity.
"""

import numpy as np

from quditspeed.model import T_MIN, CouplingSpec, DeviceModel, build_coupling
from quditspeed.protocols import protocol_fourtone, protocol_report, speed_limit_bound

# The qubit-only exchange needs T_min = pi / (2 g). FourTone drives four
# transitions at once, so its norm is 3 g and the bound drops to T_min / 3.
for kind in ("qubit_baseline", "four_tone"):
    b = speed_limit_bound(build_coupling(CouplingSpec(kind), DeviceModel()))
    print(f"{kind:15s} J = {b.j_norm:.3f} g   t_bound = {b.t_bound / T_MIN:.4f} T_min")

# Ladder and collective couplings on d-level transmons: the bound falls as
# 1 / (d - 1), and the corresponding sequences (local unitaries around one
# coupling pulse) reach it exactly.
print()
print(f"{'protocol':10s} {'d':>2s} {'J/g':>6s} {'bound/T_min':>12s} {'1-F':>9s}")
for row in protocol_report(range(2, 7)):
    print(f"{row['protocol']:10s} {row['d']:2d} {row['j_norm']:6.2f} {row['t_bound'] / T_MIN:12.4f} "
          f"{1 - row['fidelity']:9.1e}")

# The FourTone sequence: a local rotation, the coupling for pi/6, the inverse
# rotation. Only the middle step costs coupling time.
seq = protocol_fourtone()
for step in seq.steps:
    print(f"{step.label:28s} duration {step.duration:.4f}")
print("total", seq.total_duration, "=", np.pi / 6)
