"""Language semantics on boxed values, shared by both engines.

The register VM only inlines fast paths for tagged integers; every other
case funnels through these functions so the two engines cannot drift.
"""

from __future__ import annotations

import math
import operator
from enum import IntEnum
from typing import Any, NamedTuple

from .errors import (
    VMAttributeError,
    VMIndexError,
    VMTypeError,
    VMValueError,
    VMZeroDivisionError,
)
from .isa import (
    CMP_EQ, CMP_GE, CMP_GT, CMP_IN, CMP_IS, CMP_IS_NOT, CMP_LE, CMP_LT, CMP_NE,
    CMP_NOT_IN, CMP_OPS, Op,
)
from .values import (
    FALSE,
    INT_MAX,
    INT_MIN,
    TRUE,
    BoundBuiltin,
    BoundMethod,
    Bool,
    Class,
    Dict,
    Function,
    Instance,
    Int,
    ListIter,
    RangeIter,
    StrIter,
    as_bool,
    truthy,
    type_name,
    wrap_int,
)

_SYMBOL = {
    Op.BINARY_ADD: "+", Op.BINARY_SUBTRACT: "-", Op.BINARY_MULTIPLY: "*",
    Op.BINARY_DIVIDE: "/", Op.BINARY_MODULO: "%", Op.BINARY_LSHIFT: "<<",
    Op.BINARY_RSHIFT: ">>", Op.BINARY_AND: "&", Op.BINARY_OR: "|", Op.BINARY_XOR: "^",
}
_DUNDER = {
    Op.BINARY_ADD: "__add__", Op.BINARY_SUBTRACT: "__sub__", Op.BINARY_MULTIPLY: "__mul__",
    Op.BINARY_DIVIDE: "__div__", Op.BINARY_MODULO: "__mod__", Op.BINARY_LSHIFT: "__lshift__",
    Op.BINARY_RSHIFT: "__rshift__", Op.BINARY_AND: "__and__", Op.BINARY_OR: "__or__",
    Op.BINARY_XOR: "__xor__",
}
_CMP_DUNDER = {
    CMP_LT: "__lt__", CMP_LE: "__le__", CMP_EQ: "__eq__", CMP_NE: "__ne__",
    CMP_GT: "__gt__", CMP_GE: "__ge__",
}
CMP_HOST = {
    CMP_LT: operator.lt, CMP_LE: operator.le, CMP_EQ: operator.eq, CMP_NE: operator.ne,
    CMP_GT: operator.gt, CMP_GE: operator.ge, CMP_IS: operator.eq, CMP_IS_NOT: operator.ne,
}


def _call(machine: Any, fn: Any, args: list) -> Any:
    from .machine import call_value

    return call_value(machine, fn, args)


def _find_dunder(obj: Any, name: str) -> Any:
    if obj.__class__ is Instance:
        found = obj.cls.find(name)
        if found is not None:
            k, slot = found
            return k.dict.values[slot]
    return None


# ---------------------------------------------------------------------------
# arithmetic

def int_arith(opc: int, x: int, y: int) -> int:
    """Integer operator with 63-bit wraparound; operands already in range."""
    if opc == Op.BINARY_ADD:
        return wrap_int(x + y)
    if opc == Op.BINARY_SUBTRACT:
        return wrap_int(x - y)
    if opc == Op.BINARY_MULTIPLY:
        return wrap_int(x * y)
    if opc == Op.BINARY_DIVIDE:
        if y == 0:
            raise VMZeroDivisionError("integer division by zero")
        q = abs(x) // abs(y)
        return wrap_int(q if (x < 0) == (y < 0) else -q)
    if opc == Op.BINARY_MODULO:
        if y == 0:
            raise VMZeroDivisionError("integer modulo by zero")
        r = abs(x) % abs(y)
        return -r if x < 0 else r
    if opc == Op.BINARY_LSHIFT:
        if y < 0:
            raise VMValueError("negative shift count")
        return wrap_int(x << min(y, 64))
    if opc == Op.BINARY_RSHIFT:
        if y < 0:
            raise VMValueError("negative shift count")
        return x >> min(y, 64)
    if opc == Op.BINARY_AND:
        return x & y
    if opc == Op.BINARY_OR:
        return x | y
    if opc == Op.BINARY_XOR:
        return x ^ y
    raise AssertionError(opc)


# Inline Int fast paths used by the interpreters' generated handlers; each
# falls back to int_arith where the host operator would disagree.
BOXED_FAST_EXPR = {
    Op.BINARY_ADD: "a.v + b.v",
    Op.BINARY_SUBTRACT: "a.v - b.v",
    Op.BINARY_MULTIPLY: "a.v * b.v",
    Op.BINARY_DIVIDE: "a.v // b.v if a.v >= 0 and b.v > 0 else int_arith(OPC, a.v, b.v)",
    Op.BINARY_MODULO: "a.v % b.v if a.v >= 0 and b.v > 0 else int_arith(OPC, a.v, b.v)",
    Op.BINARY_LSHIFT: "a.v << b.v if 0 <= b.v < 64 else int_arith(OPC, a.v, b.v)",
    Op.BINARY_RSHIFT: "a.v >> b.v if 0 <= b.v < 64 else int_arith(OPC, a.v, b.v)",
    Op.BINARY_AND: "a.v & b.v",
    Op.BINARY_OR: "a.v | b.v",
    Op.BINARY_XOR: "a.v ^ b.v",
}


def _float_arith(opc: int, x: float, y: float) -> float:
    if opc == Op.BINARY_ADD:
        return x + y
    if opc == Op.BINARY_SUBTRACT:
        return x - y
    if opc == Op.BINARY_MULTIPLY:
        return x * y
    if opc == Op.BINARY_DIVIDE:
        if y == 0.0:
            raise VMZeroDivisionError("float division by zero")
        return x / y
    if opc == Op.BINARY_MODULO:
        if y == 0.0:
            raise VMZeroDivisionError("float modulo by zero")
        return math.fmod(x, y)
    return None  # bitwise ops are undefined on floats


def _num(v: Any) -> Any:
    """Host number for Int/Bool/float, else None."""
    c = v.__class__
    if c is Int:
        return v.v
    if c is float:
        return v
    if c is Bool:
        return v.b
    return None


def binary_op(machine: Any, opc: int, a: Any, b: Any) -> Any:
    ca = a.__class__
    cb = b.__class__
    if ca is Int and cb is Int:
        return Int(int_arith(opc, a.v, b.v))
    x = _num(a)
    y = _num(b)
    if x is not None and y is not None:
        if ca is float or cb is float:
            r = _float_arith(opc, float(x), float(y))
            if r is not None:
                return r
        else:
            return Int(int_arith(opc, x, y))
    elif opc == Op.BINARY_ADD:
        if ca is str and cb is str:
            return a + b
        if ca is list and cb is list:
            return a + b
    elif opc == Op.BINARY_MULTIPLY:
        if (ca is str or ca is list) and (cb is Int or cb is Bool):
            return a * max(0, _num(b))
        if (cb is str or cb is list) and (ca is Int or ca is Bool):
            return b * max(0, _num(a))
    if ca is Instance:
        fn = _find_dunder(a, _DUNDER[opc])
        if fn is not None:
            return _call(machine, fn, [a, b])
    raise VMTypeError(
        f"unsupported operand type(s) for {_SYMBOL[opc]}: '{type_name(a)}' and '{type_name(b)}'"
    )


def unary_negative(machine: Any, a: Any) -> Any:
    c = a.__class__
    if c is Int:
        return Int(wrap_int(-a.v))
    if c is float:
        return -a
    if c is Bool:
        return Int(-a.b)
    fn = _find_dunder(a, "__neg__")
    if fn is not None:
        return _call(machine, fn, [a])
    raise VMTypeError(f"bad operand type for unary -: '{type_name(a)}'")


def unary_not(a: Any) -> Bool:
    return FALSE if truthy(a) else TRUE


# ---------------------------------------------------------------------------
# comparison

def values_equal(machine: Any, a: Any, b: Any) -> bool:
    if a is b:
        return True
    ca = a.__class__
    cb = b.__class__
    x = _num(a)
    if x is not None:
        y = _num(b)
        return y is not None and x == y
    if ca is str:
        return cb is str and a == b
    if ca is list:
        if cb is not list or len(a) != len(b):
            return False
        return all(values_equal(machine, p, q) for p, q in zip(a, b))
    if ca is Dict:
        if cb is not Dict or len(a) != len(b):
            return False
        for k, v in zip(a.keys, a.values):
            slot = b.slot_of(k)
            if slot < 0 or not values_equal(machine, v, b.values[slot]):
                return False
        return True
    if ca is Instance:
        fn = _find_dunder(a, "__eq__")
        if fn is not None:
            return truthy(_call(machine, fn, [a, b]))
    return False


def _identical(a: Any, b: Any) -> bool:
    if a is b:
        return True
    ca = a.__class__
    if ca is Int or ca is float or ca is str:
        return ca is b.__class__ and (a.v == b.v if ca is Int else a == b)
    return False


def _order(machine: Any, code: int, a: Any, b: Any) -> bool:
    x = _num(a)
    y = _num(b)
    if x is not None and y is not None:
        return CMP_HOST[code](x, y)
    ca = a.__class__
    if ca is str and b.__class__ is str:
        return CMP_HOST[code](a, b)
    if ca is list and b.__class__ is list:
        for p, q in zip(a, b):
            if not values_equal(machine, p, q):
                return _order(machine, code, p, q)
        return CMP_HOST[code](len(a), len(b))
    if ca is Instance:
        fn = _find_dunder(a, _CMP_DUNDER[code])
        if fn is not None:
            return truthy(_call(machine, fn, [a, b]))
    raise VMTypeError(
        f"'{CMP_OPS[code]}' not supported between '{type_name(a)}' and '{type_name(b)}'"
    )


def contains(machine: Any, container: Any, item: Any) -> bool:
    c = container.__class__
    if c is list:
        return any(values_equal(machine, item, x) for x in container)
    if c is Dict:
        return container.contains(item)
    if c is str:
        if item.__class__ is not str:
            raise VMTypeError("'in <string>' requires string as left operand")
        return item in container
    raise VMTypeError(f"argument of type '{type_name(container)}' is not iterable")


def compare_op(machine: Any, code: int, a: Any, b: Any) -> Bool:
    if code == CMP_EQ:
        return as_bool(values_equal(machine, a, b))
    if code == CMP_NE:
        if a.__class__ is Instance and _find_dunder(a, "__ne__") is not None:
            return as_bool(_order(machine, code, a, b))
        return as_bool(not values_equal(machine, a, b))
    if code == CMP_IN:
        return as_bool(contains(machine, b, a))
    if code == CMP_NOT_IN:
        return as_bool(not contains(machine, b, a))
    if code == CMP_IS:
        return as_bool(_identical(a, b))
    if code == CMP_IS_NOT:
        return as_bool(not _identical(a, b))
    return as_bool(_order(machine, code, a, b))


# ---------------------------------------------------------------------------
# containers

def _index(seq: Any, k: Any) -> int:
    c = k.__class__
    if c is Int:
        return k.v
    if c is Bool:
        return k.b
    raise VMTypeError(f"indices must be integers, not '{type_name(k)}'")


def subscr(machine: Any, container: Any, key: Any) -> Any:
    c = container.__class__
    if c is list or c is str:
        i = _index(container, key)
        if -len(container) <= i < len(container):
            return container[i]
        raise VMIndexError(f"{type_name(container)} index out of range")
    if c is Dict:
        return container.get(key)
    fn = _find_dunder(container, "__getitem__")
    if fn is not None:
        return _call(machine, fn, [container, key])
    raise VMTypeError(f"'{type_name(container)}' object is not subscriptable")


def store_subscr(machine: Any, container: Any, key: Any, value: Any) -> None:
    c = container.__class__
    if c is list:
        i = _index(container, key)
        if -len(container) <= i < len(container):
            container[i] = value
            return
        raise VMIndexError("list assignment index out of range")
    if c is Dict:
        container.set(key, value)
        return
    fn = _find_dunder(container, "__setitem__")
    if fn is not None:
        _call(machine, fn, [container, key, value])
        return
    raise VMTypeError(f"'{type_name(container)}' object does not support item assignment")


def get_iter(v: Any) -> Any:
    c = v.__class__
    if c is list:
        return ListIter(v)
    if c is str:
        return StrIter(v)
    if c is Dict:
        return ListIter(list(v.keys))
    if c is ListIter or c is StrIter or c is RangeIter:
        return v
    raise VMTypeError(f"'{type_name(v)}' object is not iterable")


# ---------------------------------------------------------------------------
# attributes

class Location(IntEnum):
    INSTANCE_DICT = 0
    CLASS_DICT = 1
    DYNAMIC = 2


class LookupSite(NamedTuple):
    location: Location
    dict: Dict | None = None
    offset: int = -1
    generation: int = -1
    klass: Class | None = None


DYNAMIC_SITE = LookupSite(Location.DYNAMIC)


def _builtin_methods() -> dict:
    from .builtins import METHODS

    return METHODS


def attribute_lookup(machine: Any, obj: Any, name: str) -> tuple[Any, LookupSite]:
    """Full attribute resolution plus a description of where it was found.

    Order: instance dict, class dict, parent chain, ``__getattr__``.
    Functions found on the class come back as bound methods.
    """
    c = obj.__class__
    if c is Instance:
        d = obj.dict
        slot = d.index.get(name)
        if slot is not None:
            return d.values[slot], LookupSite(Location.INSTANCE_DICT, d, slot, d.generation, obj.cls)
        found = obj.cls.find(name)
        if found is not None:
            k, slot = found
            v = k.dict.values[slot]
            site = LookupSite(Location.CLASS_DICT, k.dict, slot, k.dict.generation, obj.cls)
            if v.__class__ is Function:
                return BoundMethod(obj, v), site
            return v, site
        fallback = obj.cls.find("__getattr__")
        if fallback is not None:
            k, slot = fallback
            return _call(machine, k.dict.values[slot], [obj, name]), DYNAMIC_SITE
        raise VMAttributeError(f"'{obj.cls.name}' object has no attribute '{name}'")
    if c is Class:
        found = obj.find(name)
        if found is not None:
            k, slot = found
            return k.dict.values[slot], DYNAMIC_SITE
        raise VMAttributeError(f"class '{obj.name}' has no attribute '{name}'")
    methods = _builtin_methods().get(c)
    if methods is not None:
        fn = methods.get(name)
        if fn is not None:
            return BoundBuiltin(obj, name, fn), DYNAMIC_SITE
        raise VMAttributeError(f"'{type_name(obj)}' object has no attribute '{name}'")
    raise VMTypeError(f"'{type_name(obj)}' object has no attributes (looking up '{name}')")


def get_attr(machine: Any, obj: Any, name: str) -> Any:
    """Value-only attribute_lookup without building a LookupSite."""
    if obj.__class__ is Instance:
        d = obj.dict
        slot = d.index.get(name)
        if slot is not None:
            return d.values[slot]
        found = obj.cls.find(name)
        if found is not None:
            k, slot = found
            v = k.dict.values[slot]
            return BoundMethod(obj, v) if v.__class__ is Function else v
    return attribute_lookup(machine, obj, name)[0]


def store_attr(machine: Any, obj: Any, name: str, value: Any) -> None:
    c = obj.__class__
    if c is Instance:
        obj.dict.set(name, value)
    elif c is Class:
        obj.set_attr(name, value)
    else:
        raise VMTypeError(f"cannot set attribute '{name}' on '{type_name(obj)}'")


def delete_attr(obj: Any, name: str) -> None:
    c = obj.__class__
    if c is Instance:
        if name not in obj.dict.index:
            raise VMAttributeError(f"'{obj.cls.name}' object has no attribute '{name}'")
        obj.dict.delete(name)
    elif c is Class:
        if name not in obj.dict.index:
            raise VMAttributeError(f"class '{obj.name}' has no attribute '{name}'")
        obj.del_attr(name)
    else:
        raise VMTypeError(f"cannot delete attribute '{name}' on '{type_name(obj)}'")


__all__ = [
    "INT_MAX", "INT_MIN", "Location", "LookupSite", "attribute_lookup", "binary_op",
    "compare_op", "contains", "delete_attr", "get_attr", "get_iter", "int_arith",
    "store_attr", "store_subscr", "subscr", "unary_negative", "unary_not", "values_equal",
]
