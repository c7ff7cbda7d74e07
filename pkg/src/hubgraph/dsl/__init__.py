"""Text front end: ``.hub`` model files to model graphs."""

from .diagnostics import Diagnostic, DslError, Span
from .format import format_ast
from .lexer import Token, tokenize
from .parser import parse, parse_source
from .resolve import ResolvedModel, load_model, resolve, resolve_model
from .tree import Ast

__all__ = [
    "Ast", "Diagnostic", "DslError", "ResolvedModel", "Span", "Token", "format_ast", "load_model", "parse",
    "parse_source", "resolve", "resolve_model", "tokenize",
]
