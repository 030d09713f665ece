"""Shattering of d-subsets by set families: exact counts, constructions, bounds and covering arrays."""

from .errors import InputError, NumericError, ResourceError, ShatterError
from .matrix import AlphabetMatrix, SetFamily, ShatterReport, brute_force_f, brute_force_g, count_shattered, is_shattered

__all__ = [
    "AlphabetMatrix",
    "InputError",
    "NumericError",
    "ResourceError",
    "SetFamily",
    "ShatterError",
    "ShatterReport",
    "brute_force_f",
    "brute_force_g",
    "count_shattered",
    "is_shattered",
]
