"""Vilenkin-Fourier analysis on truncated bounded Vilenkin groups."""

from .group import GroupSpec, Interval, Point, digits, point_add, point_sub, rank, scale_table
from .hardy import Atom, AtomicDecomposition, Martingale, hp_quasinorm, make_atom, synthesize, validate_atom
from .transform import GridFunction, Spectrum, forward_fast, forward_naive, inverse, partial_sum

__all__ = [
    "Atom",
    "AtomicDecomposition",
    "GridFunction",
    "GroupSpec",
    "Interval",
    "Martingale",
    "Point",
    "Spectrum",
    "digits",
    "forward_fast",
    "forward_naive",
    "hp_quasinorm",
    "inverse",
    "make_atom",
    "partial_sum",
    "point_add",
    "point_sub",
    "rank",
    "scale_table",
    "synthesize",
    "validate_atom",
]
