"""Figure rendering for lqrkit benchmark outputs."""

from .render import PANELS, FigureSpec, SchemaError, render

__version__ = "0.1.0"
