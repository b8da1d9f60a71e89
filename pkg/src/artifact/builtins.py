"""Builtin functions of the modelling language.

Every builtin is total: bad input yields ``None`` (the language's Null)
instead of raising.  Values are represented by plain Python objects:

* Null   -> ``None``
* Bool   -> ``bool``
* Int    -> ``int``
* Real   -> ``float``
* Vector -> ``tuple`` of floats
* Str    -> ``str``

``bool`` is a subclass of ``int`` in Python, so type tests below use
``type(x) is ...`` rather than ``isinstance``.
"""

import math

_NUM = (int, float)


def is_num(x):
    t = type(x)
    return t is int or t is float


def _add(a, b):
    ta, tb = type(a), type(b)
    if ta is int and tb is int:
        return a + b
    if (ta is int or ta is float) and (tb is int or tb is float):
        return float(a) + float(b)
    if ta is str:
        if tb is str:
            return a + b
        if tb is int:
            return a + str(b)
    return None


def _sub(a, b):
    ta, tb = type(a), type(b)
    if ta is int and tb is int:
        return a - b
    if (ta is int or ta is float) and (tb is int or tb is float):
        return float(a) - float(b)
    return None


def _mul(a, b):
    ta, tb = type(a), type(b)
    if ta is int and tb is int:
        return a * b
    if (ta is int or ta is float) and (tb is int or tb is float):
        return float(a) * float(b)
    return None


def _div(a, b):
    ta, tb = type(a), type(b)
    if (ta is int or ta is float) and (tb is int or tb is float):
        if b == 0:
            return None
        return float(a) / float(b)
    return None


def _mod(a, b):
    if type(a) is int and type(b) is int and b != 0:
        return a % b
    return None


def _neg(a):
    t = type(a)
    if t is int or t is float:
        return -a
    return None


def _eq(a, b):
    if a is None or b is None:
        return None
    ta, tb = type(a), type(b)
    if ta is tb:
        return a == b
    if (ta is int or ta is float) and (tb is int or tb is float):
        return a == b
    return False


def _ne(a, b):
    r = _eq(a, b)
    return None if r is None else not r


def _cmp(op):
    def f(a, b):
        ta, tb = type(a), type(b)
        if (ta is int or ta is float) and (tb is int or tb is float):
            return op(a, b)
        return None
    return f


_lt = _cmp(lambda a, b: a < b)
_le = _cmp(lambda a, b: a <= b)
_gt = _cmp(lambda a, b: a > b)
_ge = _cmp(lambda a, b: a >= b)


def _and(a, b):
    if type(a) is bool and type(b) is bool:
        return a and b
    return None


def _or(a, b):
    if type(a) is bool and type(b) is bool:
        return a or b
    return None


def _not(a):
    if type(a) is bool:
        return not a
    return None


def _ite(c, a, b):
    # selects; the unselected branch may be Null
    if c is True:
        return a
    if c is False:
        return b
    return None


def _index(v, i):
    if type(v) is tuple and type(i) is int and 0 <= i < len(v):
        return v[i]
    return None


def _vector(*xs):
    out = []
    for x in xs:
        t = type(x)
        if t is not int and t is not float:
            return None
        out.append(float(x))
    return tuple(out)


def _str(x):
    t = type(x)
    if t is int:
        return str(x)
    if t is str:
        return x
    if t is bool:
        return "true" if x else "false"
    if t is float:
        return repr(x)
    return None


def _len(v):
    if type(v) is tuple or type(v) is str:
        return len(v)
    return None


def _abs(x):
    t = type(x)
    if t is int or t is float:
        return abs(x)
    return None


def _exp(x):
    if is_num(x):
        try:
            return math.exp(x)
        except OverflowError:
            return None
    return None


def _log(x):
    if is_num(x) and x > 0:
        return math.log(x)
    return None


def _sqrt(x):
    if is_num(x) and x >= 0:
        return math.sqrt(x)
    return None


def _pow(a, b):
    if is_num(a) and is_num(b):
        try:
            r = float(a) ** float(b)
        except (OverflowError, ZeroDivisionError):
            return None
        return r if type(r) is float else None
    return None


def _append(v, x):
    if type(v) is tuple and is_num(x):
        return v + (float(x),)
    return None


def _slice(v, start, n):
    if type(v) is tuple and type(start) is int and type(n) is int:
        if 0 <= start and 0 <= n and start + n <= len(v):
            return v[start:start + n]
    return None


def _set(v, i, x):
    if type(v) is tuple and type(i) is int and 0 <= i < len(v) and is_num(x):
        return v[:i] + (float(x),) + v[i + 1:]
    return None


def _sum(v):
    if type(v) is tuple:
        return math.fsum(v)
    return None


def _fill(n, x):
    if type(n) is int and n >= 0 and is_num(x):
        return (float(x),) * n
    return None


def _normalize(v):
    if type(v) is tuple and v:
        s = math.fsum(v)
        if s > 0 and all(x >= 0 for x in v):
            return tuple(x / s for x in v)
    return None


def _floor(x):
    if is_num(x) and math.isfinite(x):
        return int(math.floor(x))
    return None


def _int(x):
    t = type(x)
    if t is int:
        return x
    if t is bool:
        return int(x)
    if t is float and math.isfinite(x):
        return int(x)
    return None


def _float(x):
    t = type(x)
    if t is int or t is float:
        return float(x)
    return None


def _min(a, b):
    if is_num(a) and is_num(b):
        return a if a <= b else b
    return None


def _max(a, b):
    if is_num(a) and is_num(b):
        return a if a >= b else b
    return None


# name -> (arity, function); arity None means variadic
BUILTINS = {
    "+": (2, _add),
    "-": (2, _sub),
    "*": (2, _mul),
    "/": (2, _div),
    "%": (2, _mod),
    "neg": (1, _neg),
    "==": (2, _eq),
    "!=": (2, _ne),
    "<": (2, _lt),
    "<=": (2, _le),
    ">": (2, _gt),
    ">=": (2, _ge),
    "and": (2, _and),
    "or": (2, _or),
    "not": (1, _not),
    "ite": (3, _ite),
    "index": (2, _index),
    "vector": (None, _vector),
    "str": (1, _str),
    "len": (1, _len),
    "abs": (1, _abs),
    "exp": (1, _exp),
    "log": (1, _log),
    "sqrt": (1, _sqrt),
    "pow": (2, _pow),
    "append": (2, _append),
    "slice": (3, _slice),
    "set": (3, _set),
    "sum": (1, _sum),
    "fill": (2, _fill),
    "normalize": (1, _normalize),
    "floor": (1, _floor),
    "int": (1, _int),
    "float": (1, _float),
    "min": (2, _min),
    "max": (2, _max),
}

ALIASES = {"string": "str"}

# builtins written as operators in source text
OPERATORS = frozenset(["+", "-", "*", "/", "%", "neg", "==", "!=", "<", "<=", ">", ">=",
                       "and", "or", "not", "ite", "index", "vector"])

FUNCTIONS = frozenset(k for k in BUILTINS if k not in OPERATORS)


def resolve(name):
    """Canonical builtin name for ``name`` or ``None``."""
    name = ALIASES.get(name, name)
    return name if name in BUILTINS else None


def apply(name, args):
    arity, fn = BUILTINS[name]
    if arity is not None and len(args) != arity:
        return None
    return fn(*args)
