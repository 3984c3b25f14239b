"""Tiny arithmetic grammar for initial-condition strings.

Supports ``+ - * / ^`` (``^`` is power, right-associative), unary minus,
parentheses, numeric literals, ``sin``, ``cos``, ``exp``, the constant ``pi``
and whichever variable names the caller allows (``x``, ``y`` by default).
Parsed with :mod:`ast` against a whitelist; nothing is passed to ``eval``.
"""

import ast
import operator

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": np.pi}


class ExpressionError(ValueError):
    pass


def _check(node, names):
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos and exp may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0], names)
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"bad literal {node.value!r}")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], env))
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    return float(node.value)


class Expression:
    """Compiled expression; call with keyword arrays for its variables."""

    def __init__(self, text, names=("x", "y")):
        if not isinstance(text, str):
            raise ExpressionError("expression must be a string")
        self.text = text
        self.names = tuple(names)
        if "**" in text:
            raise ExpressionError("use '^' for powers")
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        _check(tree, self.names)
        self._tree = tree

    def __call__(self, **env):
        missing = [n for n in self.names if n not in env]
        if missing:
            raise ExpressionError(f"missing variables {missing}")
        shape = np.broadcast(*[np.asarray(env[n]) for n in self.names]).shape if env else ()
        out = _eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"


def evaluate(text, names=("x", "y"), **env):
    return Expression(text, names)(**env)
