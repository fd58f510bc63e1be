"""Interchangeable cycle-toggle engines behind one query/update contract."""

from .base import NaivePathToggler, NaiveTreeToggler, Toggler, naive_toggler
from .dnc import DncPathToggler, DncTreeToggler
from .hld import HldToggler
from .pathbst import PathBstToggler

__all__ = [
    "DncPathToggler",
    "DncTreeToggler",
    "HldToggler",
    "NaivePathToggler",
    "NaiveTreeToggler",
    "PathBstToggler",
    "Toggler",
    "naive_toggler",
]
