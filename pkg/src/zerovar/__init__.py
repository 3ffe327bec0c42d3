"""Zero-count statistics for Gaussian orthogonal-polynomial ensembles.

Kac-Rice intensities, reproducing kernels, the bulk-scaling constant and a
Monte Carlo zero counter for Gaussian ensembles ``G_n = sum a_j p_j``.
"""

from .ensemble import (
    RecurrenceTable,
    chebyshev,
    eval_basis,
    jacobi_recurrence,
    legendre,
    load_recurrence,
)
from .equilibrium import omega_density, omega_mass
from .universal import universal_constant, xi

__version__ = "0.1.0"
