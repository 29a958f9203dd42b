"""CIR: the compact SSA intermediate representation consumed by the analyzer."""

from .model import *  # noqa: F401,F403
from .model import Location, Program, FunctionDef, FunctionInfo
from .parser import CIRError, ParseError, load_program, parse_program, parse_sources, prelude_text
from .printer import print_program
from .types import UnresolvedType, is_castable
from .validate import Diagnostic, ValidationError, dominators, validate_program

__all__ = [
    "CIRError", "ParseError", "ValidationError", "Diagnostic", "UnresolvedType",
    "Location", "Program", "FunctionDef", "FunctionInfo",
    "parse_program", "parse_sources", "load_program", "prelude_text", "print_program",
    "validate_program", "dominators", "is_castable",
]
