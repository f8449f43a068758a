"""Source language front end: parsing and stack-code generation."""

from .codegen import ClassInfo, CompiledModule, compile_module, compile_source
from .parser import parse

__all__ = ["ClassInfo", "CompiledModule", "compile_module", "compile_source", "parse"]
