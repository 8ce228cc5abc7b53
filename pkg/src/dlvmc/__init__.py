"""Neural-network variational Monte Carlo for small atoms and molecules."""
import jax

jax.config.update("jax_enable_x64", True)

from .system import Molecule, parse_geometry, emit_geometry, default_spin_assignment  # noqa: E402
from .scf.hf import HartreeFock, run_scf, eval_orbitals  # noqa: E402
from .frames import LocalFrames, compute_frames  # noqa: E402
from .features import FeatureBuilder  # noqa: E402
from .wavefunction import Ansatz, ModelConfig  # noqa: E402
from .estimator import NeuralWavefunction  # noqa: E402

__all__ = [
    "Molecule", "parse_geometry", "emit_geometry", "default_spin_assignment",
    "HartreeFock", "run_scf", "eval_orbitals", "LocalFrames", "compute_frames",
    "FeatureBuilder", "Ansatz", "ModelConfig", "NeuralWavefunction",
]
__version__ = "0.1.0"
