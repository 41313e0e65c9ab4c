"""Figure rendering for step-size adaptation record files."""

from .reader import RecordTable, SchemaError, read_table
from .render import PlotSpec, load_spec, render, smooth

__all__ = ["RecordTable", "SchemaError", "read_table", "PlotSpec", "load_spec",
           "render", "smooth"]

__version__ = "0.1.0"
