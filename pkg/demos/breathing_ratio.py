"""Breathing-to-centre-of-mass frequency ratio against the trap exponent.

Prints the ratio for a 20-ion chain; in a harmonic trap it is sqrt(3) for
any chain length.
"""
import numpy as np

from ionchain_nn import TrapPotential, mode_ratio_scan

gammas = np.round(np.arange(0.2, 3.01, 0.2), 10)
for p in mode_ratio_scan(gammas, 20, TrapPotential(6.6e-20, 2.0)):
    bar = "#" * int(round(20 * p.ratio))
    print(f"gamma={p.gamma:4.1f}  w2/w1={p.ratio:.4f}  {bar}")
print(f"sqrt(3) = {np.sqrt(3):.4f}")
