"""Tiny expression language for classical annotations and controls.

Expressions are nested tuples in prefix form, mirroring the JSON wire
format ["xor", "y1", "y2"]: an expression is an int constant, a variable
name (str), or a tuple (op, arg...) with op in OPS.
"""

from __future__ import annotations

from typing import Iterable, Set, Union

Expr = Union[int, str, tuple]

OPS = {"xor", "not", "add", "sub", "mul", "eq", "cond", "mod"}


def evaluate(expr: Expr, env: dict) -> int:
    if isinstance(expr, bool):
        return int(expr)
    if isinstance(expr, int):
        return expr
    if isinstance(expr, str):
        return int(env[expr])
    op, *args = expr
    vals = None
    if op != "cond":
        vals = [evaluate(a, env) for a in args]
    if op == "xor":
        out = 0
        for v in vals:
            out ^= v
        return out
    if op == "not":
        return 1 - (vals[0] & 1)
    if op == "add":
        return sum(vals)
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        out = 1
        for v in vals:
            out *= v
        return out
    if op == "mod":
        return vals[0] % vals[1]
    if op == "eq":
        return int(vals[0] == vals[1])
    if op == "cond":
        c = evaluate(args[0], env)
        return evaluate(args[1] if c else args[2], env)
    raise ValueError(f"unknown operator {op!r}")


def free_vars(expr: Expr) -> Set[str]:
    if isinstance(expr, str):
        return {expr}
    if isinstance(expr, tuple):
        out: Set[str] = set()
        for a in expr[1:]:
            out |= free_vars(a)
        return out
    return set()


def rename_vars(expr: Expr, mapping: dict) -> Expr:
    """Rename variables per mapping; unknown names pass through."""
    if isinstance(expr, str):
        return mapping.get(expr, expr)
    if isinstance(expr, tuple):
        return (expr[0],) + tuple(rename_vars(a, mapping) for a in expr[1:])
    return expr


def to_json(expr: Expr):
    if isinstance(expr, tuple):
        return [expr[0]] + [to_json(a) for a in expr[1:]]
    return expr


def from_json(value) -> Expr:
    if isinstance(value, list):
        if not value or value[0] not in OPS:
            raise ValueError(f"bad expression {value!r}")
        return (value[0],) + tuple(from_json(a) for a in value[1:])
    if isinstance(value, (int, str)):
        return value
    raise ValueError(f"bad expression {value!r}")
