"""Builtin functions and builtin methods of list, dict and str."""

from __future__ import annotations

import math
from typing import Any

from .errors import VMArityError, VMAttributeError, VMIndexError, VMTypeError, VMValueError
from .isa import CMP_LT, Op
from .semantics import (
    attribute_lookup,
    binary_op,
    compare_op,
    delete_attr,
    get_iter,
    store_attr,
)
from .values import (
    FALSE,
    INT_MAX,
    INT_MIN,
    STOP,
    TRUE,
    Bool,
    Builtin,
    Class,
    Dict,
    Instance,
    Int,
    RangeIter,
    as_bool,
    make_int,
    to_str,
    truthy,
    type_name,
    wrap_int,
)


def _arity(name: str, args: list, lo: int, hi: int | None = None) -> None:
    hi = lo if hi is None else hi
    if not lo <= len(args) <= hi:
        want = str(lo) if lo == hi else f"{lo} to {hi}"
        raise VMArityError(f"{name}() takes {want} arguments ({len(args)} given)")


def _int_arg(name: str, v: Any) -> int:
    c = v.__class__
    if c is Int:
        return v.v
    if c is Bool:
        return v.b
    raise VMTypeError(f"{name}() expected an int, got '{type_name(v)}'")


def _str_arg(name: str, v: Any) -> str:
    if v.__class__ is not str:
        raise VMTypeError(f"{name}() expected a str, got '{type_name(v)}'")
    return v


def iterate(v: Any):
    """Host-side iteration over any iterable value (yields boxed values)."""
    it = get_iter(v)
    while True:
        x = it.next()
        if x is STOP:
            return
        yield x


def _sum(m: Any, args: list) -> Any:
    _arity("sum", args, 1, 2)
    acc = args[1] if len(args) == 2 else Int(0)
    items = iterate(args[0])
    if acc.__class__ is Int:
        # plain int/bool runs accumulate on the host; wrapping once at the
        # end equals wrapping after every addition
        n = acc.v
        for x in items:
            c = x.__class__
            if c is Int:
                n += x.v
            elif c is Bool:
                n += x.b
            else:
                acc = binary_op(m, Op.BINARY_ADD, Int(wrap_int(n)), x)
                break
        else:
            return Int(wrap_int(n))
    for x in items:
        acc = binary_op(m, Op.BINARY_ADD, acc, x)
    return acc


def _len(m: Any, args: list) -> Any:
    _arity("len", args, 1)
    v = args[0]
    if v.__class__ in (str, list, Dict):
        return Int(len(v))
    raise VMTypeError(f"object of type '{type_name(v)}' has no len()")


def _range(m: Any, args: list) -> Any:
    _arity("range", args, 1, 3)
    nums = [_int_arg("range", a) for a in args]
    if len(nums) == 1:
        return RangeIter(0, nums[0], 1)
    step = nums[2] if len(nums) == 3 else 1
    if step == 0:
        raise VMValueError("range() step must not be zero")
    return RangeIter(nums[0], nums[1], step)


def _print(m: Any, args: list) -> Any:
    m.write(" ".join(to_str(a) for a in args) + "\n")
    return None


def _ord(m: Any, args: list) -> Any:
    _arity("ord", args, 1)
    s = _str_arg("ord", args[0])
    if len(s) != 1:
        raise VMTypeError(f"ord() expected a character, but string of length {len(s)} found")
    return Int(ord(s))


def _chr(m: Any, args: list) -> Any:
    _arity("chr", args, 1)
    n = _int_arg("chr", args[0])
    if not 0 <= n <= 0x10FFFF:
        raise VMValueError("chr() arg not in range")
    return chr(n)


def _abs(m: Any, args: list) -> Any:
    _arity("abs", args, 1)
    v = args[0]
    c = v.__class__
    if c is Int:
        return make_int(abs(v.v))
    if c is float:
        return abs(v)
    if c is Bool:
        return Int(v.b)
    raise VMTypeError(f"bad operand type for abs(): '{type_name(v)}'")


def _extreme(name: str, want_less: bool):
    def fn(m: Any, args: list) -> Any:
        if not args:
            raise VMArityError(f"{name}() expected at least 1 argument")
        items = list(iterate(args[0])) if len(args) == 1 else list(args)
        if not items:
            raise VMValueError(f"{name}() arg is an empty sequence")
        best = items[0]
        for x in items[1:]:
            # keep the first of equal elements, like the host language
            if want_less:
                better = compare_op(m, CMP_LT, x, best) is TRUE
            else:
                better = compare_op(m, CMP_LT, best, x) is TRUE
            if better:
                best = x
        return best

    return fn


def _str(m: Any, args: list) -> Any:
    _arity("str", args, 0, 1)
    return to_str(args[0]) if args else ""


def _int(m: Any, args: list) -> Any:
    _arity("int", args, 0, 1)
    if not args:
        return Int(0)
    v = args[0]
    c = v.__class__
    if c is Int:
        return v
    if c is Bool:
        return Int(v.b)
    if c is float:
        if math.isnan(v) or math.isinf(v):
            raise VMValueError(f"cannot convert float {v!r} to integer")
        return make_int(int(v))
    if c is str:
        try:
            n = int(v.strip())
        except ValueError:
            raise VMValueError(f"invalid literal for int(): {v!r}") from None
        if not INT_MIN <= n <= INT_MAX:
            raise VMValueError(f"int literal out of range: {v!r}")
        return Int(n)
    raise VMTypeError(f"int() argument must be a string or a number, not '{type_name(v)}'")


def _float(m: Any, args: list) -> Any:
    _arity("float", args, 0, 1)
    if not args:
        return 0.0
    v = args[0]
    c = v.__class__
    if c is float:
        return v
    if c is Int:
        return float(v.v)
    if c is Bool:
        return float(v.b)
    if c is str:
        try:
            return float(v)
        except ValueError:
            raise VMValueError(f"could not convert string to float: {v!r}") from None
    raise VMTypeError(f"float() argument must be a string or a number, not '{type_name(v)}'")


def _bool(m: Any, args: list) -> Any:
    _arity("bool", args, 0, 1)
    return as_bool(args and truthy(args[0]))


def _getattr(m: Any, args: list) -> Any:
    _arity("getattr", args, 2, 3)
    name = _str_arg("getattr", args[1])
    try:
        return attribute_lookup(m, args[0], name)[0]
    except VMAttributeError:
        if len(args) == 3:
            return args[2]
        raise


def _setattr(m: Any, args: list) -> Any:
    _arity("setattr", args, 3)
    store_attr(m, args[0], _str_arg("setattr", args[1]), args[2])
    return None


def _delattr(m: Any, args: list) -> Any:
    _arity("delattr", args, 2)
    delete_attr(args[0], _str_arg("delattr", args[1]))
    return None


def _hasattr(m: Any, args: list) -> Any:
    _arity("hasattr", args, 2)
    try:
        attribute_lookup(m, args[0], _str_arg("hasattr", args[1]))
    except VMAttributeError:
        return FALSE
    return TRUE


def _setparent(m: Any, args: list) -> Any:
    """setparent(C, P): rebind C's parent class (P may be None)."""
    _arity("setparent", args, 2)
    cls, parent = args
    if cls.__class__ is not Class or not (parent is None or parent.__class__ is Class):
        raise VMTypeError("setparent() expects a class and a class or None")
    cls.set_parent(parent)
    return None


def _isinstance(m: Any, args: list) -> Any:
    _arity("isinstance", args, 2)
    obj, cls = args
    if cls.__class__ is not Class:
        raise VMTypeError("isinstance() arg 2 must be a class")
    k = obj.cls if obj.__class__ is Instance else None
    while k is not None:
        if k is cls:
            return TRUE
        k = k.parent
    return FALSE


FUNCTIONS = {
    "sum": _sum, "len": _len, "range": _range, "print": _print, "ord": _ord,
    "chr": _chr, "abs": _abs, "min": _extreme("min", True), "max": _extreme("max", False),
    "str": _str, "int": _int, "float": _float, "bool": _bool, "getattr": _getattr,
    "setattr": _setattr, "delattr": _delattr, "hasattr": _hasattr,
    "setparent": _setparent, "isinstance": _isinstance,
}
BUILTINS = {name: Builtin(name, fn) for name, fn in FUNCTIONS.items()}


# -- methods: fn(machine, receiver, args)

def _list_append(m: Any, lst: list, args: list) -> Any:
    _arity("append", args, 1)
    lst.append(args[0])
    return None


def _list_pop(m: Any, lst: list, args: list) -> Any:
    _arity("pop", args, 0, 1)
    if not lst:
        raise VMIndexError("pop from empty list")
    i = _int_arg("pop", args[0]) if args else -1
    if not -len(lst) <= i < len(lst):
        raise VMIndexError("pop index out of range")
    return lst.pop(i)


def _list_insert(m: Any, lst: list, args: list) -> Any:
    _arity("insert", args, 2)
    lst.insert(_int_arg("insert", args[0]), args[1])
    return None


def _dict_get(m: Any, d: Dict, args: list) -> Any:
    _arity("get", args, 1, 2)
    return d.get(args[0], args[1] if len(args) == 2 else None)


def _dict_keys(m: Any, d: Dict, args: list) -> Any:
    _arity("keys", args, 0)
    return list(d.keys)


def _dict_values(m: Any, d: Dict, args: list) -> Any:
    _arity("values", args, 0)
    return list(d.values)


def _dict_pop(m: Any, d: Dict, args: list) -> Any:
    _arity("pop", args, 1)
    v = d.get(args[0])
    d.delete(args[0])
    return v


def _str_split(m: Any, s: str, args: list) -> Any:
    _arity("split", args, 0, 1)
    if args:
        sep = _str_arg("split", args[0])
        if not sep:
            raise VMValueError("empty separator")
        return s.split(sep)
    return s.split()


def _str_join(m: Any, s: str, args: list) -> Any:
    _arity("join", args, 1)
    parts = []
    for x in iterate(args[0]):
        parts.append(_str_arg("join", x))
    return s.join(parts)


def _str_upper(m: Any, s: str, args: list) -> Any:
    _arity("upper", args, 0)
    return s.upper()


def _str_lower(m: Any, s: str, args: list) -> Any:
    _arity("lower", args, 0)
    return s.lower()


METHODS = {
    list: {"append": _list_append, "pop": _list_pop, "insert": _list_insert},
    Dict: {"get": _dict_get, "keys": _dict_keys, "values": _dict_values, "pop": _dict_pop},
    str: {"split": _str_split, "join": _str_join, "upper": _str_upper, "lower": _str_lower},
}
