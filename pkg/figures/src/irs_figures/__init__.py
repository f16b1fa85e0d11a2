"""Figure rendering for rmt-irs sweep output."""

from .render import FigureSpec, SchemaError, SeriesInput, collect_series, load_spec, read_rows, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SeriesInput", "SchemaError", "collect_series",
           "load_spec", "read_rows", "render", "__version__"]
