"""Exception hierarchy shared by the compiler pipeline and both VMs."""

from __future__ import annotations


class CompileError(Exception):
    """Source could not be parsed or lowered to stack code."""

    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"line {self.line}, column {self.col}: {self.message}"


class ParseError(CompileError):
    pass


class CodegenError(CompileError):
    pass


class TranslationError(Exception):
    """Stack code that cannot be converted (depth mismatch, bad jump)."""


class VMError(Exception):
    """Runtime fault raised by program execution on either engine."""

    kind = "runtime error"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.kind}: {msg}" if msg else self.kind


class VMTypeError(VMError):
    kind = "type error"


class VMArityError(VMTypeError):
    kind = "arity error"


class VMNameError(VMError):
    kind = "name error"


class VMAttributeError(VMError):
    kind = "attribute error"


class VMIndexError(VMError):
    kind = "index error"


class VMKeyError(VMError):
    kind = "key error"


class VMValueError(VMError):
    kind = "value error"


class VMZeroDivisionError(VMError):
    kind = "zero division"


class VMRecursionError(VMError):
    kind = "recursion error"


class StackUnderflow(VMError):
    kind = "stack underflow"
