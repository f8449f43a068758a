"""Runtime value model.

Boxed representation used by the stack VM, by containers, and at every
boundary of the register VM:

    Int        fixed 63-bit two's-complement integer (wraps on overflow)
    float      host float
    Bool       interned singletons TRUE / FALSE
    None       host None
    str        host str
    list       host list (mutable, ordered)
    Dict       ordered entry arrays plus a key index; slots are addressable
    Function, Class, Instance, BoundMethod, Builtin, BoundBuiltin
    ListIter, StrIter, RangeIter
"""

from __future__ import annotations

from typing import Any, Callable

from .errors import VMKeyError, VMTypeError

INT_BITS = 63
INT_MIN = -(1 << (INT_BITS - 1))
INT_MAX = (1 << (INT_BITS - 1)) - 1
_INT_SPAN = 1 << INT_BITS
_INT_MASK = _INT_SPAN - 1


def wrap_int(n: int) -> int:
    """Reduce a host integer to the 63-bit two's-complement range."""
    if INT_MIN <= n <= INT_MAX:
        return n
    return ((n - INT_MIN) & _INT_MASK) + INT_MIN


class Int:
    __slots__ = ("v",)

    def __init__(self, v: int) -> None:
        self.v = v

    def __eq__(self, other: object) -> bool:
        return other.__class__ is Int and other.v == self.v  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash(self.v)

    def __repr__(self) -> str:
        return f"Int({self.v})"


def make_int(n: int) -> Int:
    return Int(wrap_int(n))


class Bool:
    __slots__ = ("b",)

    def __init__(self, b: int) -> None:
        self.b = b

    def __repr__(self) -> str:
        return "TRUE" if self.b else "FALSE"


TRUE = Bool(1)
FALSE = Bool(0)


def as_bool(flag: object) -> Bool:
    return TRUE if flag else FALSE


class _Stop:
    __slots__ = ()

    def __repr__(self) -> str:
        return "STOP"


STOP = _Stop()

# Bumped whenever any class gains or loses a key or changes its parent.
# Class-dict lookup hints record it and are invalidated by any change.
CLASS_EPOCH = [0]


def hkey(v: Any) -> Any:
    """Host hash key for a boxed value used as a Dict key."""
    c = v.__class__
    if c is str or v is None or c is float:
        return v
    if c is Int:
        return v.v
    if c is Bool:
        return v.b
    if c is list or c is Dict:
        raise VMTypeError(f"unhashable type: '{type_name(v)}'")
    return v


class Dict:
    """Insertion-ordered dict with stable, addressable slots.

    ``generation`` changes on every insert of a new key and on every delete
    (deletes compact the arrays, shifting later slots).
    """

    __slots__ = ("keys", "values", "index", "generation")

    def __init__(self, items: Any = None) -> None:
        self.keys: list = []
        self.values: list = []
        self.index: dict = {}
        self.generation = 0
        if items:
            for k, v in items:
                self.set(k, v)

    def __len__(self) -> int:
        return len(self.keys)

    def __repr__(self) -> str:
        return f"Dict({list(zip(self.keys, self.values))!r})"

    def slot_of(self, key: Any) -> int:
        return self.index.get(hkey(key), -1)

    def contains(self, key: Any) -> bool:
        return hkey(key) in self.index

    def get(self, key: Any, default: Any = STOP) -> Any:
        slot = self.index.get(hkey(key))
        if slot is None:
            if default is STOP:
                raise VMKeyError(to_repr(key))
            return default
        return self.values[slot]

    def set(self, key: Any, value: Any) -> None:
        h = hkey(key)
        slot = self.index.get(h)
        if slot is None:
            self.index[h] = len(self.keys)
            self.keys.append(key)
            self.values.append(value)
            self.generation += 1
        else:
            self.values[slot] = value

    def delete(self, key: Any) -> None:
        h = hkey(key)
        slot = self.index.pop(h, None)
        if slot is None:
            raise VMKeyError(to_repr(key))
        del self.keys[slot]
        del self.values[slot]
        for k in self.keys[slot:]:
            self.index[hkey(k)] -= 1
        self.generation += 1

    def items(self) -> list:
        return list(zip(self.keys, self.values))


class Function:
    __slots__ = ("name", "code", "defaults", "globals")

    def __init__(self, name: str, code: Any, defaults: tuple, globals: Dict) -> None:
        self.name = name
        self.code = code
        self.defaults = defaults
        self.globals = globals

    def __repr__(self) -> str:
        return f"<function {self.name}>"


class Class:
    __slots__ = ("name", "dict", "parent")

    def __init__(self, name: str, parent: Class | None = None) -> None:
        self.name = name
        self.dict = Dict()
        self.parent = parent

    def __repr__(self) -> str:
        return f"<class {self.name}>"

    def find(self, name: str) -> tuple[Class, int] | None:
        """Locate ``name`` along the parent chain: (owning class, slot)."""
        k: Class | None = self
        while k is not None:
            slot = k.dict.index.get(name)
            if slot is not None:
                return k, slot
            k = k.parent
        return None

    def set_attr(self, name: str, value: Any) -> None:
        if name not in self.dict.index:
            CLASS_EPOCH[0] += 1
        self.dict.set(name, value)

    def del_attr(self, name: str) -> None:
        self.dict.delete(name)
        CLASS_EPOCH[0] += 1

    def set_parent(self, parent: Class | None) -> None:
        k = parent
        while k is not None:
            if k is self:
                raise VMTypeError("class hierarchy would contain a cycle")
            k = k.parent
        self.parent = parent
        CLASS_EPOCH[0] += 1


class Instance:
    __slots__ = ("cls", "dict")

    def __init__(self, cls: Class) -> None:
        self.cls = cls
        self.dict = Dict()

    def __repr__(self) -> str:
        return f"<{self.cls.name} instance>"


class BoundMethod:
    __slots__ = ("self", "func")

    def __init__(self, obj: Any, func: Any) -> None:
        self.self = obj
        self.func = func

    def __repr__(self) -> str:
        return f"<bound method {getattr(self.func, 'name', '?')}>"


class Builtin:
    """Host-implemented callable: ``fn(machine, args) -> value``."""

    __slots__ = ("name", "fn")

    def __init__(self, name: str, fn: Callable) -> None:
        self.name = name
        self.fn = fn

    def __repr__(self) -> str:
        return f"<builtin {self.name}>"


class BoundBuiltin:
    """Builtin method bound to a receiver: ``fn(machine, obj, args)``."""

    __slots__ = ("obj", "name", "fn")

    def __init__(self, obj: Any, name: str, fn: Callable) -> None:
        self.obj = obj
        self.name = name
        self.fn = fn

    def __repr__(self) -> str:
        return f"<method {self.name} of {type_name(self.obj)}>"


class ListIter:
    __slots__ = ("seq", "i")

    def __init__(self, seq: list) -> None:
        self.seq = seq
        self.i = 0

    def next(self) -> Any:
        i = self.i
        if i < len(self.seq):
            self.i = i + 1
            return self.seq[i]
        return STOP


class StrIter(ListIter):
    __slots__ = ()


class RangeIter:
    __slots__ = ("cur", "stop", "step")

    def __init__(self, start: int, stop: int, step: int) -> None:
        self.cur = start
        self.stop = stop
        self.step = step

    def next_raw(self) -> Any:
        c = self.cur
        if (c < self.stop) if self.step > 0 else (c > self.stop):
            self.cur = c + self.step
            return c
        return STOP

    def next(self) -> Any:
        c = self.next_raw()
        return c if c is STOP else Int(c)


ITERATORS = (ListIter, StrIter, RangeIter)


def type_name(v: Any) -> str:
    c = v.__class__
    if c is Int:
        return "int"
    if c is int:
        return "int"  # tagged word seen through a register
    if c is float:
        return "float"
    if c is Bool:
        return "bool"
    if v is None:
        return "NoneType"
    if c is str:
        return "str"
    if c is list:
        return "list"
    if c is Dict:
        return "dict"
    if c is Function or c is Builtin:
        return "function"
    if c is BoundMethod or c is BoundBuiltin:
        return "method"
    if c is Class:
        return "class"
    if c is Instance:
        return v.cls.name
    if c in ITERATORS:
        return "iterator"
    return c.__name__


def truthy(v: Any) -> bool:
    if v is TRUE:
        return True
    if v is FALSE or v is None:
        return False
    c = v.__class__
    if c is Int:
        return v.v != 0
    if c is float:
        return v != 0.0
    if c is str or c is list or c is Dict:
        return len(v) > 0
    return True


def _fmt_float(f: float) -> str:
    return repr(f)


def to_repr(v: Any, _seen: set | None = None) -> str:
    c = v.__class__
    if c is str:
        return repr(v)
    if c is list or c is Dict:
        seen = _seen if _seen is not None else set()
        if id(v) in seen:
            return "[...]" if c is list else "{...}"
        seen.add(id(v))
        try:
            if c is list:
                return "[" + ", ".join(to_repr(x, seen) for x in v) + "]"
            return "{" + ", ".join(
                f"{to_repr(k, seen)}: {to_repr(x, seen)}" for k, x in zip(v.keys, v.values)
            ) + "}"
        finally:
            seen.discard(id(v))
    return to_str(v)


def to_str(v: Any) -> str:
    c = v.__class__
    if c is str:
        return v
    if c is Int:
        return str(v.v)
    if c is float:
        return _fmt_float(v)
    if c is Bool:
        return "True" if v.b else "False"
    if v is None:
        return "None"
    if c is list or c is Dict:
        return to_repr(v)
    if c is Function:
        return f"<function {v.name}>"
    if c is Class:
        return f"<class {v.name}>"
    if c is Instance:
        return f"<{v.cls.name} instance>"
    if c is Builtin:
        return f"<builtin {v.name}>"
    if c is BoundMethod or c is BoundBuiltin:
        return "<bound method>"
    if c in ITERATORS:
        return "<iterator>"
    return repr(v)


def from_host(x: Any) -> Any:
    """Convert a host value (int/float/bool/str/None/list/dict) to boxed form."""
    if x is True or x is False:
        return as_bool(x)
    if isinstance(x, int):
        return make_int(x)
    if isinstance(x, (float, str)) or x is None:
        return x
    if isinstance(x, list):
        return [from_host(e) for e in x]
    if isinstance(x, dict):
        return Dict((from_host(k), from_host(v)) for k, v in x.items())
    return x


def to_host(v: Any) -> Any:
    """Inverse of :func:`from_host` for plain data (used by tests and tools)."""
    c = v.__class__
    if c is Int:
        return v.v
    if c is int:
        return v >> 1
    if c is Bool:
        return bool(v.b)
    if c is list:
        return [to_host(e) for e in v]
    if c is Dict:
        return {to_host(k): to_host(x) for k, x in zip(v.keys, v.values)}
    return v


def snapshot(v: Any, _seen: dict | None = None) -> Any:
    """Structural, identity-free description of a value graph (for diffing runs)."""
    seen = {} if _seen is None else _seen
    c = v.__class__
    if c is Int:
        return ("int", v.v)
    if c is int:
        return ("int", v >> 1)
    if c is Bool:
        return ("bool", v.b)
    if c is float or c is str or v is None:
        return v
    key = id(v)
    if key in seen:
        return ("ref", seen[key])
    seen[key] = len(seen)
    if c is list:
        return ("list", tuple(snapshot(x, seen) for x in v))
    if c is Dict:
        return ("dict", tuple((snapshot(k, seen), snapshot(x, seen)) for k, x in zip(v.keys, v.values)))
    if c is Instance:
        return ("instance", v.cls.name, snapshot(v.dict, seen))
    if c is Class:
        return ("class", v.name)
    if c is Function:
        return ("function", v.name)
    return (type_name(v),)
