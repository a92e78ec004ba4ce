"""Qubit reset in the spin-boson model with a switchable bath coupling.

Polaron ground state, variational dynamics under a coupling switch u(t),
LQR-optimal switching, and an exact few-mode reference solver.
"""
from .bath import (BathDiscretization, SpectralDensityParams, discretize, spectral_density,
                   sum_f2)
from .polaron import (PolaronState, correlation_profile, excited_population, ground_state,
                      variational_energy)
from .switching import SwitchProfile
from .tdvp import (TrajectoryRecord, asymptotic_final_displacement, decoupling_experiment,
                   evolve, final_displacement_integral)

__version__ = "0.1.0"

__all__ = [
    "BathDiscretization", "SpectralDensityParams", "discretize", "spectral_density", "sum_f2",
    "PolaronState", "correlation_profile", "excited_population", "ground_state",
    "variational_energy", "SwitchProfile", "TrajectoryRecord", "asymptotic_final_displacement",
    "decoupling_experiment", "evolve", "final_displacement_integral",
]
