"""A small Python-like language compiled to stack bytecode, translated to
register bytecode, optimized, and run on interchangeable interpreters."""

from .frontend import compile_source
from .machine import STACK_CONFIG, Dispatch, Engine, VmConfig, all_reg_configs, run_module, run_source

__version__ = "0.1.0"

__all__ = [
    "Dispatch",
    "Engine",
    "STACK_CONFIG",
    "VmConfig",
    "all_reg_configs",
    "compile_source",
    "run_module",
    "run_source",
]
