"""Evaluation of small closed-form expressions given as strings.

Expressions are ordinary Python/numpy syntax evaluated with no builtins and a
fixed namespace of vectorized math functions, e.g. ``"sqrt(pi - pi*r**2)"``
or ``"t**2*log(1+t)"``.
"""

import numpy as np

_FUNCTIONS = {
    "pi": np.pi,
    "e": np.e,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "expm1": np.expm1,
    "log": np.log,
    "log1p": np.log1p,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arctan": np.arctan,
    "tanh": np.tanh,
    "abs": np.abs,
    "maximum": np.maximum,
    "minimum": np.minimum,
    "where": np.where,
    "clip": np.clip,
    "sign": np.sign,
}


def evaluate(expression, variables):
    """Evaluate ``expression`` with the given variable bindings.

    Parameters
    ----------
    expression : str
        The expression text.
    variables : dict
        Extra names (arrays or scalars) visible to the expression.
    """
    namespace = dict(_FUNCTIONS)
    namespace.update(variables)
    try:
        code = compile(expression, "<expression>", "eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expression!r}: {exc.msg}") from None
    for name in code.co_names:
        if name not in namespace:
            raise ValueError(f"unknown name {name!r} in expression {expression!r}")
    with np.errstate(all="ignore"):
        return eval(code, {"__builtins__": {}}, namespace)
