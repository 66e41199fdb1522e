"""bhphase: number-conserving phase-space toolkit for small Bose-Hubbard systems.

Subpackages
-----------
model       Fock bases, Hamiltonians, algebra generators, coherent states
exact       exact unitary/Lindblad propagation, spectra, Floquet analysis
phasespace  Husimi/P calculus, Husimi zeros, phase-space samplers
meanfield   Gross-Pitaevskii layer: energies, trajectories, fixed points, SDE
ensemble    deterministic Monte-Carlo Liouville engine and its observables
analysis    Poincare sections, stroboscopic maps, power spectra
scenarios   paper-figure presets and the scenario runner
cli         command-line interface
"""

__version__ = "0.1.0"

from .model import (
    DensityMatrix,
    FockBasis,
    ModelSpec,
    OperatorMatrix,
    QuantumState,
    bloch_vector,
    build_angular_momentum_ops,
    build_fock_basis,
    build_hamiltonian,
    build_su3_generators,
    coherent_state,
    spdm,
    su3_casimir,
)
from .points import PhasePoint

__all__ = [
    "DensityMatrix",
    "FockBasis",
    "ModelSpec",
    "OperatorMatrix",
    "PhasePoint",
    "QuantumState",
    "bloch_vector",
    "build_angular_momentum_ops",
    "build_fock_basis",
    "build_hamiltonian",
    "build_su3_generators",
    "coherent_state",
    "spdm",
    "su3_casimir",
    "__version__",
]
