"""Associative recall of the two lowest mode patterns in a 40-ion chain.

Phonon-mediated couplings in a V = rho |x|^0.5 trap store the sign patterns
of modes 1 and 2.  Each row flips r random spins and lets zero-temperature
dynamics relax the chain (fewer trials than the figure preset, so it runs in
a few seconds).
"""
from ionchain_nn import (TrapPotential, basin_statistics, chain_spectrum, pattern_from_mode,
                         phonon_couplings)

spec = chain_spectrum(TrapPotential(6.6e-20, 0.5), 40)[1]
j = phonon_couplings(spec)
print(" r   m_i    pattern 1 (P, m_f)   pattern 2 (P, m_f)")
for r in (0, 2, 4, 8, 12, 16, 20):
    cells = []
    for idx in (1, 2):
        rep = basin_statistics(pattern_from_mode(spec, idx), j, r, 100, master_seed=7,
                               pattern_index=idx)
        cells.append(f"{rep.recovery_probability:5.2f}, {rep.final_overlap:.3f}")
    print(f"{r:2d}  {rep.initial_overlap:.3f}   {cells[0]:>16}   {cells[1]:>16}")
