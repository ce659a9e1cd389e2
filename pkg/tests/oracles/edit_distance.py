"""Brute-force edit distance: the minimum cost over every edit script (no dynamic programming)."""

from __future__ import annotations


def enumerate_scripts(a, b):
    """Yield the cost of every match/substitute/delete/insert script turning ``a`` into ``b``."""
    a, b = tuple(a), tuple(b)

    def rec(i, j, cost):
        if i == len(a) and j == len(b):
            yield cost
            return
        if i < len(a):
            yield from rec(i + 1, j, cost + 1)
        if j < len(b):
            yield from rec(i, j + 1, cost + 1)
        if i < len(a) and j < len(b):
            yield from rec(i + 1, j + 1, cost + (a[i] != b[j]))

    yield from rec(0, 0, 0)


def brute_force_distance(a, b) -> int:
    return min(enumerate_scripts(a, b))


def apply_script(a, ops, b):
    """Independent replay of an alignment's ops (used to check ``Alignment.apply``)."""
    out = []
    for op in ops:
        if op.op == "match":
            out.append(a[op.i])
        elif op.op in ("sub", "ins"):
            out.append(b[op.j])
    return out


def recursive_distance(a, b) -> int:
    """Top-down suffix recursion (memoised), for pairs too long to enumerate every script."""
    from functools import lru_cache

    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a) or j == len(b):
            return (len(a) - i) + (len(b) - j)
        return min(rec(i + 1, j) + 1, rec(i, j + 1) + 1, rec(i + 1, j + 1) + (a[i] != b[j]))

    return rec(0, 0)
