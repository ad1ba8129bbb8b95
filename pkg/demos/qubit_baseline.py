"""
Propagating the qubit-only exchange
===================================

A constant exchange ``g (|01><10| + h.c.)`` applied for ``T_min = pi / (2 g)``
is an iSWAP. The propagator uses implicit-midpoint steps, which are exactly
unitary; their phase error shrinks with the square of the step.
"""

import numpy as np

from quditspeed.grape import GrapeContext
from quditspeed.hilbert import matrix_exp_hermitian, project_to_qubit
from quditspeed.metrics import average_fidelity, leakage_profile, target_iswap
from quditspeed.model import T_MIN, CouplingSpec, DeviceModel, PulseSet
from quditspeed.propagator import propagate, unitarity_defect

device = DeviceModel()
ctx = GrapeContext.build(device, CouplingSpec("qubit_baseline"))
h = ctx.hamiltonian(PulseSet.zeros(T_MIN, 1.0, M=40))

for substeps in (4, 16, 64, 256):
    prop = propagate(h, T_MIN, substeps_per_segment=substeps, M=40)
    exact = matrix_exp_hermitian(ctx.coupling, T_MIN)
    f = average_fidelity(project_to_qubit(prop.u_final, device.space), target_iswap())
    print(f"substeps {substeps:4d}: max |U - exp(-iHT)| = {np.max(np.abs(prop.u_final - exact)):.2e}  "
          f"1-F = {1 - f:.1e}  unitarity defect = {unitarity_defect(prop.u_final):.1e}")

# Population stays in the qubit block because nothing couples it to level 2.
print("min qubit-block population along the gate:", leakage_profile(prop, device.space).p01.min())
