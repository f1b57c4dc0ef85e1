"""Figure rendering for the simulation CSV outputs.

The only coupling to the producer is the documented CSV schemas; specs
are TOML files naming inputs, axis cosmetics, and the output raster.
"""

from .render import build_figure, render
from .spec import (FigplotsError, KINDS, PlotSpec, SchemaMismatch,
                   SpecError, load_spec, read_table)

__version__ = "0.1.0"

__all__ = [
    "FigplotsError",
    "KINDS",
    "PlotSpec",
    "SchemaMismatch",
    "SpecError",
    "build_figure",
    "load_spec",
    "read_table",
    "render",
    "__version__",
]
