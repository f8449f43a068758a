"""Host-Python reference implementations, written independently of the VMs."""

from __future__ import annotations

import itertools

INT_BITS = 63


def wrap63(n: int) -> int:
    span = 1 << INT_BITS
    n %= span
    return n - span if n >= span // 2 else n


def _trunc_quot(x: int, y: int) -> int:
    q = abs(x) // abs(y)
    return q if (x < 0) == (y < 0) else -q


def c_div(x: int, y: int) -> int:
    return wrap63(_trunc_quot(x, y))


def c_mod(x: int, y: int) -> int:
    return wrap63(x - y * _trunc_quot(x, y))


def lcg(s: int) -> int:
    return (s * 1103515245 + 12345) % 2147483648


def flips(perm: tuple[int, ...]) -> int:
    p = list(perm)
    n = 0
    while p[0] != 0:
        k = p[0]
        p[: k + 1] = reversed(p[: k + 1])
        n += 1
    return n


def fannkuch(n: int) -> int:
    """Brute force over every permutation."""
    return max(flips(p) for p in itertools.permutations(range(n)))


def count_threshold_outputs() -> str:
    s = 12345
    xs = []
    for _ in range(100000):
        s = lcg(s)
        xs.append(s % 1000)
    return " ".join(str(sum(x < t for x in xs)) for t in (250, 500, 900))


def _matrix(n: int, seed: int) -> list[list[int]]:
    s = seed
    m = []
    for _ in range(n):
        row = []
        for _ in range(n):
            s = lcg(s)
            row.append(s % 100)
        m.append(row)
    return m


def matmul_outputs(n: int = 50) -> str:
    a, b = _matrix(n, 42), _matrix(n, 7)
    c = [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    total = sum(map(sum, c))
    return f"{total} {c[0][0]} {c[n - 1][n - 1]}"


def quicksort_outputs() -> str:
    s = 4242
    a = []
    for _ in range(5000):
        s = lcg(s)
        a.append((s >> 8) % 100000)
    b = sorted(a)
    return f"True True {b[0]} {b[2500]} {b[4999]}"
