"""Spectral estimators for phase synchronization and O(d) synchronization."""

__version__ = "0.1.0"

from .numlin import (  # noqa: E402
    EigenPair,
    EigenSpace,
    NonConvergence,
    RankDeficient,
    polar_factor,
    project_to_stiefel,
    top_eigenpair,
    top_eigenspace,
)
from .model import (  # noqa: E402
    RngStream,
    SyncInstance,
    assemble_orthogonal_instance,
    assemble_phase_instance,
)
from .estimators import (  # noqa: E402
    spectral_orthogonal_estimate,
    spectral_phase_estimate,
)
from .metrics import minimax_reference, orthogonal_loss, phase_loss  # noqa: E402
