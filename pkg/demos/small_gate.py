"""Adiabatic Hadamard gate on the 4-spin analogue of the network.

The full network has two blocks of four spins; with one spin per block the
same protocol runs in a 16-dimensional space in well under a minute.  Prints
the fidelity along the ramp and the calibrated end-of-protocol value.
"""
from ionchain_nn import QnnParams, fidelity_curve
from ionchain_nn.gates import adiabaticity_ratio
from ionchain_nn.schedules import FieldSchedule

params = QnnParams(r3=0.01, sites_per_block=1)
ramp = FieldSchedule(a_final=0.3, b1_initial=1e-2, b2_initial=1e-3, duration=1e4)

print(f"adiabaticity ratio {adiabaticity_ratio(params, ramp, 'H'):.3f}")
curve = fidelity_curve(params, ramp, "H", n_ramp=11, n_hold=5)
for t, f in zip(curve.times, curve.fidelity):
    print(f"t={t:10.1f}  F={f:.4f}")
print(f"gate fidelity after a hold of {curve.hold:.1f}: {curve.gate_fidelity:.4f} "
      f"(classical bound 2/3)")
