"""User-supplied metrics (component expressions over chart variables and named constants) and curves.

Grammar: numbers, + - * / ** (or ^), parentheses, sin cos tan sinh cosh tanh exp log sqrt, pi,
chart variable names and constant names. Derivatives come from central differences of the
evaluated metric (christoffel_mode = finite-difference).
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .errors import ConfigError
from .curves import ParamCurve
from .manifolds import FINITE_DIFFERENCE, ChartMetric

ALLOWED_FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "pi": sp.pi,
}

_TRANSFORMS = standard_transformations + (convert_xor,)


def parse_component(text: str, variables: Sequence[str], constants: Mapping[str, float], key: str) -> sp.Expr:
    """Parse one metric component; unknown names raise ConfigError naming the key."""
    symbols = {name: sp.Symbol(name, real=True) for name in list(variables) + list(constants)}
    local = {**ALLOWED_FUNCTIONS, **symbols}
    try:
        expr = parse_expr(str(text), local_dict=local, transformations=_TRANSFORMS, evaluate=True)
    except Exception as e:  # sympy raises SyntaxError, TokenError, TypeError, NameError...
        raise ConfigError(key, f"cannot parse expression {text!r}: {e}") from None
    if not isinstance(expr, sp.Expr):
        raise ConfigError(key, f"expression {text!r} is not a scalar expression")
    unknown = {str(s) for s in expr.free_symbols} - set(symbols)
    if unknown:
        raise ConfigError(key, f"unknown names {sorted(unknown)} in {text!r}")
    allowed = {f for f in ALLOWED_FUNCTIONS.values() if isinstance(f, sp.FunctionClass)}
    disallowed = sorted({str(f.func) for f in expr.atoms(sp.Function) if f.func not in allowed})
    if disallowed:
        raise ConfigError(key, f"unsupported functions {disallowed} in {text!r}")
    if expr.has(sp.I) or expr.has(sp.zoo) or expr.has(sp.nan):
        raise ConfigError(key, f"expression {text!r} is not real-valued")
    return expr


def user_chart(
    components: Sequence[Sequence[str]],
    variables: Sequence[str] = ("x1", "x2", "x3"),
    constants: Mapping[str, float] | None = None,
    name: str = "user",
) -> ChartMetric:
    """Build a ChartMetric from a 3x3 table of component expressions.

    The table must be symmetric as text-level expressions (g_ij and g_ji simplify to the same thing).
    """
    constants = dict(constants or {})
    if len(variables) != 3 or len(set(variables)) != 3:
        raise ConfigError("manifold.variables", f"need three distinct chart variables, got {list(variables)}")
    clash = set(variables) & set(constants)
    if clash:
        raise ConfigError("manifold.constants", f"names used both as variable and constant: {sorted(clash)}")
    if len(components) != 3 or any(len(row) != 3 for row in components):
        raise ConfigError("manifold.components", "need a 3x3 table of expressions")

    exprs = [[parse_component(components[i][j], variables, constants, f"manifold.components[{i}][{j}]")
              for j in range(3)] for i in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            if sp.simplify(exprs[i][j] - exprs[j][i]) != 0:
                raise ConfigError(f"manifold.components[{i}][{j}]", "metric table is not symmetric")

    var_symbols = [sp.Symbol(v, real=True) for v in variables]
    const_subs = {sp.Symbol(k, real=True): float(v) for k, v in constants.items()}
    matrix = sp.Matrix(3, 3, lambda i, j: exprs[i][j].subs(const_subs))
    func = sp.lambdify(var_symbols, matrix, "numpy")

    def metric(x: np.ndarray) -> np.ndarray:
        return np.asarray(func(*x), dtype=float)

    return ChartMetric(
        name=name,
        metric_fn=metric,
        christoffel_mode=FINITE_DIFFERENCE,
        params={k: float(v) for k, v in constants.items()},
    )


def expression_curve(
    chart: ChartMetric,
    position: Sequence[str],
    t_range: tuple[float, float],
    period: float | None = None,
    constants: Mapping[str, float] | None = None,
    name: str = "expression_curve",
) -> ParamCurve:
    """Curve t -> (x1(t), x2(t), x3(t)) in chart coordinates; velocity and acceleration are exact derivatives."""
    constants = dict(constants or {})
    if len(position) != 3:
        raise ConfigError("curve.position", "need three coordinate expressions in t")
    if "t" in constants:
        raise ConfigError("manifold.constants", "'t' is reserved for the curve parameter")
    t = sp.Symbol("t", real=True)
    const_subs = {sp.Symbol(k, real=True): float(v) for k, v in constants.items()}
    exprs = [parse_component(text, ("t",), constants, f"curve.position[{i}]").subs(const_subs)
             for i, text in enumerate(position)]
    pos = sp.lambdify(t, sp.Matrix(exprs), "numpy")
    vel = sp.lambdify(t, sp.Matrix([sp.diff(e, t) for e in exprs]), "numpy")
    acc = sp.lambdify(t, sp.Matrix([sp.diff(e, t, 2) for e in exprs]), "numpy")

    def as_point(fn):
        return lambda u: np.asarray(fn(u), dtype=float).reshape(3)

    return ParamCurve(
        chart=chart,
        pos_fn=as_point(pos),
        vel_fn=as_point(vel),
        acc_fn=as_point(acc),
        t_range=(float(t_range[0]), float(t_range[1])),
        period=period,
        name=name,
        params={k: float(v) for k, v in constants.items()},
    )
