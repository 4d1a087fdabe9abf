"""Semi-analytical solvers for 1-D heat conduction through layered media.

The package covers static layered intervals (discrete eigenfunction
transforms), infinite bars with one diffusivity jump (closed-form
kernels), media with half-line end layers (resolvent and spectral
representation), moving-interface problems recast as Volterra systems,
and a two-phase freezing-front solver built on all of the above.
"""

__version__ = "0.1.0"

from . import smallmat
from . import spectrum
from . import oit
from . import volterra
from . import mixed
from . import obm
from . import multilayer
from . import stefan
from . import harness

__all__ = [
    "smallmat",
    "spectrum",
    "oit",
    "volterra",
    "mixed",
    "obm",
    "multilayer",
    "stefan",
    "harness",
]
