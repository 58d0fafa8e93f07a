"""
dstruct-tools - (d, eps)-structures on supersingular elliptic curves.

A (d, eps)-structure is a curve E over F_{p^2} with a d-isogeny psi to its
Galois conjugate whose dual equals eps times the conjugate of psi.  The
package enumerates them, acts on them with the class group, draws their
graphs, finds isogeny paths through them and runs a key exchange on them.
None of it runs in constant time.
"""

from .core import DStructTools
from .dstruct import DStructure, StructureEncoding, decode, encode, verify
from .exceptions import (
    BudgetExceededError,
    DownloadError,
    DStructToolsError,
    ModularPolynomialError,
    StructureError,
    ValidationError,
)

__version__ = "0.1.0"
__author__ = "dstruct-tools developers"

__all__ = [
    "DStructTools",
    "DStructure",
    "StructureEncoding",
    "decode",
    "encode",
    "verify",
    "DStructToolsError",
    "BudgetExceededError",
    "DownloadError",
    "ModularPolynomialError",
    "StructureError",
    "ValidationError",
]
