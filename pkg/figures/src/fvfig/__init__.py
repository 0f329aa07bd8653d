"""Figure generation for the chiral active matter solver outputs."""

from .dataio import Checkpoint, SchemaError, Table, read_checkpoint, read_table
from .plots import KINDS, FigureSpec, plot

__all__ = ["Checkpoint", "SchemaError", "Table", "read_checkpoint", "read_table",
           "KINDS", "FigureSpec", "plot"]
