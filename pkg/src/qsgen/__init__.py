"""Finite-dimensional toolkit for quantum stochastic generators, their
global semigroups and the lattice exclusion example."""

from .errors import InputError, OracleDisagreement, QSGenError, ResourceError
from .matrix_space import SchurActionMap, SuperOperator, TruncationSet
from .generators import StochGen, StructureData

__version__ = "0.1.0"

__all__ = [
    "InputError",
    "OracleDisagreement",
    "QSGenError",
    "ResourceError",
    "SchurActionMap",
    "StochGen",
    "StructureData",
    "SuperOperator",
    "TruncationSet",
]
