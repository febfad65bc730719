"""Chaos in Bohmian trajectories of stationary multi-particle quantum states."""

from .basis import BasisFamily, BasisState, DomainError
from .chaos import (CubeSampler, LyapunovEstimate, LyapunovParams, LyapunovStatus, average_lyapunov,
                    lyapunov, poincare_section)
from .config import ConfigError, ExperimentConfig
from .dynamics import IntegratorParams, Trajectory, TrajectoryStatus, integrate, quantum_potential, velocity
from .measures import geometric_entanglement, meyer_wallach, participation_ratio, three_tangle
from .regularity import com_residual, detect_structure
from .wavefunction import Configuration, ProductTerm, WaveFunction, build, evaluate, normalize

__all__ = [
    "BasisFamily", "BasisState", "DomainError", "CubeSampler", "LyapunovEstimate", "LyapunovParams",
    "LyapunovStatus", "average_lyapunov", "lyapunov", "poincare_section", "ConfigError",
    "ExperimentConfig", "IntegratorParams", "Trajectory", "TrajectoryStatus", "integrate",
    "quantum_potential", "velocity", "geometric_entanglement", "meyer_wallach", "participation_ratio",
    "three_tangle", "com_residual", "detect_structure", "Configuration", "ProductTerm", "WaveFunction",
    "build", "evaluate", "normalize",
]
