"""Evolution families for time-dependent Fourier-multiplier generators.

Construct unperturbed and perturbed two-parameter solution operators on a
periodic box, and certify the stability, sectoriality, norm-equivalence
and Lipschitz hypotheses that guarantee them, by direct numerical
measurement.  A first-order upwind transport solver covers the half-line
example family.
"""

__version__ = "0.1.0"

from .spectral import Grid, GridFunction, NormSpec, norm
from .symbols import CoefficientFunction, SymbolSpec

__all__ = [
    "CoefficientFunction",
    "Grid",
    "GridFunction",
    "NormSpec",
    "SymbolSpec",
    "norm",
    "__version__",
]
