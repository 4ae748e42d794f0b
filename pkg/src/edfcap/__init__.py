"""Capsule collision checking for long slender links in Euclidean distance fields."""

__version__ = "0.1.0"

from .collision import (
    CheckParams,
    CheckReport,
    SafetyKind,
    SafetyMode,
    Verdict,
    check_bi,
    check_fixed,
    check_uni,
    decompose,
    oracle_check,
    step_length,
)
from .errors import (
    DomainError,
    EdfcapError,
    GridFormatError,
    InputError,
    NonTerminationError,
    ParseError,
    ResourceError,
)
from .geometry import Box, Capsule, LinkAxis, Point3, Sphere
from .kinematics import ChainModel, forward, load_model, sample_configuration

__all__ = [
    "Box",
    "Capsule",
    "ChainModel",
    "CheckParams",
    "CheckReport",
    "DomainError",
    "EdfcapError",
    "GridFormatError",
    "InputError",
    "LinkAxis",
    "NonTerminationError",
    "ParseError",
    "Point3",
    "ResourceError",
    "SafetyKind",
    "SafetyMode",
    "Sphere",
    "Verdict",
    "check_bi",
    "check_fixed",
    "check_uni",
    "decompose",
    "forward",
    "load_model",
    "oracle_check",
    "sample_configuration",
    "step_length",
]
