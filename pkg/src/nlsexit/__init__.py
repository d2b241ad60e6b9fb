"""Near-soliton modulation lab for the focusing intercritical NLS."""

__version__ = "0.1.0"

from .grid import Grid, GridError, make_grid
from .ground_state import GroundStateBundle, solve_ground_state
from .linearized import QuadFormContext, SpectralBundle, solve_spectrum
from .observables import observables

__all__ = [
    "Grid",
    "GridError",
    "make_grid",
    "GroundStateBundle",
    "solve_ground_state",
    "QuadFormContext",
    "SpectralBundle",
    "solve_spectrum",
    "observables",
]
