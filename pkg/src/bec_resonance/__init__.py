"""Parametric resonances of trapped condensates: width models, Floquet charts,
resonance sweeps and a Gross-Pitaevskii cross-check."""

from .models import (Barrier, DynamicalState, ModelKind, ModelParams, TrapModulation,
                     equilibrium_width, linearized_frequency)

__version__ = "0.1.0"

__all__ = [
    "Barrier", "DynamicalState", "ModelKind", "ModelParams", "TrapModulation",
    "equilibrium_width", "linearized_frequency", "__version__",
]
