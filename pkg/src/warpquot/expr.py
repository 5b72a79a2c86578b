"""Restricted arithmetic expression grammar for scenario files.

Supports numbers, declared variable names, + - * / ** and unary minus, and a
fixed function table (trig, hyperbolics, exp/log, sqrt, abs, min/max,
smoothstep).  Expressions are parsed with the ast module, validated against a
whitelist and compiled to nested closures; no general-purpose interpreter is
invoked on scenario content.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

from .errors import ScenarioError


def smoothstep(t: float) -> float:
    """0 for t <= 0, 1 for t >= 1, cubic 3t^2 - 2t^3 between."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * (3.0 - 2.0 * t)


_FUNCTIONS: dict[str, Callable] = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "asin": math.asin, "acos": math.acos, "atan": math.atan, "atan2": math.atan2,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt,
    "abs": abs, "min": min, "max": max, "pow": pow,
    "smoothstep": smoothstep,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def compile_expr(src: str, variables: Sequence[str]) -> Callable:
    """Compile ``src`` to a function of a coordinate vector (ordered as
    ``variables``).  Raises ScenarioError with position info on anything
    outside the grammar."""
    names = {name: i for i, name in enumerate(variables)}
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ScenarioError(
            f"expression {src!r}: syntax error at line {exc.lineno}, column {exc.offset}") from exc

    def bad(node, what):
        return ScenarioError(
            f"expression {src!r}: {what} at column {getattr(node, 'col_offset', '?')}")

    def build(node) -> Callable:
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
                c = float(node.value)
                return lambda v, _c=c: _c
            raise bad(node, f"literal {node.value!r} is not a number")
        if isinstance(node, ast.Name):
            if node.id in names:
                i = names[node.id]
                return lambda v, _i=i: float(v[_i])
            if node.id in _CONSTANTS:
                c = _CONSTANTS[node.id]
                return lambda v, _c=c: _c
            raise bad(node, f"unknown name {node.id!r} (declared: {sorted(names)})")
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise bad(node, f"operator {type(node.op).__name__} not allowed")
            left, right = build(node.left), build(node.right)
            return lambda v, _l=left, _r=right, _op=op: _op(_l(v), _r(v))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                inner = build(node.operand)
                return lambda v, _f=inner: -_f(v)
            if isinstance(node.op, ast.UAdd):
                return build(node.operand)
            raise bad(node, f"unary {type(node.op).__name__} not allowed")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise bad(node, "only calls to the fixed function table are allowed")
            if node.keywords:
                raise bad(node, "keyword arguments not allowed")
            fn = _FUNCTIONS[node.func.id]
            args = [build(a) for a in node.args]
            return lambda v, _fn=fn, _a=args: float(_fn(*[f(v) for f in _a]))
        raise bad(node, f"construct {type(node).__name__} not allowed")

    return build(tree)
