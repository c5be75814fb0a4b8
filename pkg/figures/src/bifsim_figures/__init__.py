"""Figure rendering for bifsim CSV outputs.

Standalone post-processing: reads the documented CSV schemas (including
their '#'-prefixed config headers) and renders vector figures.  The only
model quantity ever computed here is the closed-form selected density used
as an overlay, re-evaluated from header values alone.
"""

__version__ = "0.1.0"

from .io import SchemaError, read_csv_table
from .render import FigureSpec, closed_form_density, render

__all__ = [
    "__version__",
    "FigureSpec",
    "SchemaError",
    "closed_form_density",
    "read_csv_table",
    "render",
]
