"""Figure rendering for experiment artifacts.

Reads the chain CSVs and summary JSONs written by the inference package and
renders them to image files.  Nothing here recomputes an inference quantity:
every number on a figure comes from the artifact, the only processing is
display smoothing (kernel density curves, with the bandwidth recorded in the
caption and image metadata).
"""

from .figures import KINDS, FigureSpec, SchemaError, kde_curve, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "kde_curve", "render"]
