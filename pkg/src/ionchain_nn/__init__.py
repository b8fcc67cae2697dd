"""Ion-chain Hopfield networks and adiabatic spin-network gates."""
__version__ = "0.1.0"

from .chain import (EquilibriumChain, PhononSpectrum, ScanPoint, TrapPotential, chain_spectrum,
                    mode_ratio_scan, phonon_modes, solve_equilibrium)
from .couplings import (CouplingMatrix, flip_energy_changes, hebbian_couplings, ising_energy,
                        pattern_from_mode, phonon_couplings)
from .errors import (AccuracyNotMet, ConfigError, DegenerateLevelCrossing, IonChainError,
                     NumericalError)
from .evolution import evolve
from .gates import (average_gate_fidelity, berry_phase, calibrate_hold, fidelity_curve,
                    gate_propagator, ideal_gate, spin_flip_robustness)
from .hopfield import BasinReport, QuenchResult, basin_statistics, overlap_curve, quench
from .qnn import QnnParams, QnnSystem, build_qnn_hamiltonian
from .schedules import FieldSchedule, gate_preset
