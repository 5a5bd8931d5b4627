"""Figure rendering for compactnet experiment CSVs."""

from .render import FigureSpec, RenderResult, SchemaError, aggregate, read_rows, render

__all__ = [
    "FigureSpec",
    "RenderResult",
    "SchemaError",
    "aggregate",
    "read_rows",
    "render",
]
