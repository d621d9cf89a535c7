"""Exact and asymptotic enumeration of RNA secondary structures in the homopolymer model."""

from .models import StructureClass, count, count_by_links, gf_series, link_polynomial, mean_links
from .structures import ModelParams, SecondaryStructure, parse_dot_bracket

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "SecondaryStructure",
    "StructureClass",
    "count",
    "count_by_links",
    "gf_series",
    "link_polynomial",
    "mean_links",
    "parse_dot_bracket",
]
