"""Random-matrix laboratory.

Wigner ensembles, eigenvector overlaps with deterministic observables,
multi-resolvent local laws, the eigenvector moment flow on particle
configurations, and Dyson Brownian motion, together with Monte Carlo
experiments that check their finite-N behaviour.
"""

__version__ = "0.1.0"

from rmtlab.ensemble import (
    EnsembleError,
    EntryDistribution,
    Observable,
    SymmetryClass,
    WignerSample,
    build_observable,
    ou_mix,
    sample_wigner,
    traceless,
)
from rmtlab.spectral import SpectralData, decompose, m_sc, m_t, quantiles, rho_t

__all__ = [
    "EnsembleError",
    "EntryDistribution",
    "Observable",
    "SpectralData",
    "SymmetryClass",
    "WignerSample",
    "build_observable",
    "decompose",
    "m_sc",
    "m_t",
    "ou_mix",
    "quantiles",
    "rho_t",
    "sample_wigner",
    "traceless",
]
