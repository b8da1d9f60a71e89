"""Reference big-step interpreter and program density.

A program state maps every variable of the program to a value, plus the
reserved key ``DENSITY`` holding the log-density accumulated so far.
A trace is a plain ``dict`` from address strings to values; a missing
key reads as Null.

Execution either finishes with a final state or is *Undefined* for one
of these reasons:

* ``null-param``: a distribution argument evaluated to Null
* ``non-string-address``: the address expression is not a string
* ``null-trace-value``: the trace has no value at the address
* ``non-boolean-condition``: an ``if``/``while`` condition is not a Bool
* ``step-budget-exhausted``: more ``while`` condition checks than allowed

The interpreter here walks the AST directly.  It is deliberately simple
and serves as the oracle for the CFG executor in :mod:`artifact.cfg`.
"""

import math

from . import builtins as _bi
from . import distributions as _dist
from .lang import Assign, Call, Const, If, Sample, Seq, Skip, Var, While, variables
from .rng import Stream

DENSITY = "$p"
DEFAULT_BUDGET = 10 ** 7

NULL_PARAM = "null-param"
NON_STRING_ADDRESS = "non-string-address"
NULL_TRACE_VALUE = "null-trace-value"
NON_BOOLEAN_CONDITION = "non-boolean-condition"
BUDGET_EXHAUSTED = "step-budget-exhausted"


class Undefined(Exception):
    """Why an execution has no result.  Returned (not raised) by the public API."""

    def __init__(self, reason, address=None):
        super().__init__(reason)
        self.reason = reason
        self.address = address

    def __eq__(self, other):
        return isinstance(other, Undefined) and other.reason == self.reason

    def __hash__(self):
        return hash(self.reason)

    def __repr__(self):
        return "Undefined(%r)" % self.reason


def initial_state(program, params=None):
    """All variables Null, density zero, then ``params`` bound."""
    state = dict.fromkeys(sorted(variables(program)))
    state[DENSITY] = 0.0
    if params:
        state.update(params)
    return state


def keys(trace):
    """Addresses with a non-Null value."""
    return {a for a, v in trace.items() if v is not None}


def check_sample(addr, args):
    """Shared precondition of sample and read statements."""
    for a in args:
        if a is None:
            raise Undefined(NULL_PARAM)
    if type(addr) is not str:
        raise Undefined(NON_STRING_ADDRESS)


def eval_expr(e, state):
    if type(e) is Const:
        return e.value
    if type(e) is Var:
        return state[e.name]
    return _bi.apply(e.op, [eval_expr(a, state) for a in e.args])


# -- compiled expressions -----------------------------------------------------

def compile_expr(e):
    """Compile an expression to a Python function of the state.

    Produces the same values as :func:`eval_expr` since both call the
    same builtin implementations in the same order.
    """
    env = {}
    names = {}

    def fn_name(op):
        if op not in names:
            names[op] = "_b%d" % len(names)
            env[names[op]] = _bi.BUILTINS[op][1]
        return names[op]

    def gen(x):
        if type(x) is Const:
            k = "_c%d" % len(env)
            env[k] = x.value
            return k
        if type(x) is Var:
            return "s[%r]" % x.name
        arity = _bi.BUILTINS[x.op][0]
        if arity is not None and len(x.args) != arity:
            k = "_c%d" % len(env)
            env[k] = None
            return k
        return "%s(%s)" % (fn_name(x.op), ", ".join(gen(a) for a in x.args))

    return eval("lambda s: " + gen(e), env)


# -- interpreter --------------------------------------------------------------

class _Run:
    def __init__(self, trace, budget):
        self.trace = trace
        self.budget = budget
        self.checks = 0

    def value(self, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        return v

    def exec(self, s, state):
        t = type(s)
        if t is Seq:
            self.exec(s.first, state)
            self.exec(s.second, state)
        elif t is Assign:
            state[s.var] = eval_expr(s.expr, state)
        elif t is Sample:
            addr = eval_expr(s.addr, state)
            args = [eval_expr(a, state) for a in s.args]
            check_sample(addr, args)
            dist = _dist.get(s.dist)
            value = self.value(addr, dist, args)
            state[DENSITY] += dist.logpdf(value, args)
            state[s.var] = value
        elif t is If:
            c = eval_expr(s.cond, state)
            if c is True:
                self.exec(s.then, state)
            elif c is False:
                self.exec(s.orelse, state)
            else:
                raise Undefined(NON_BOOLEAN_CONDITION)
        elif t is While:
            # while E do S  ==  if E then (S; while E do S) else skip
            while True:
                self.checks += 1
                if self.checks > self.budget:
                    raise Undefined(BUDGET_EXHAUSTED)
                c = eval_expr(s.cond, state)
                if c is True:
                    self.exec(s.body, state)
                elif c is False:
                    break
                else:
                    raise Undefined(NON_BOOLEAN_CONDITION)
        elif t is Skip:
            pass
        else:
            raise TypeError("not a statement: %r" % (s,))


def execute(program, trace, state=None, budget=DEFAULT_BUDGET):
    """Run ``program`` on ``trace``; returns the final state or an ``Undefined``."""
    if state is None:
        state = initial_state(program)
    else:
        state = dict(state)
    try:
        _Run(trace, budget).exec(program, state)
    except Undefined as u:
        return u
    return state


def density(program, trace, state=None, budget=DEFAULT_BUDGET):
    """Log-density of ``trace`` (``-inf`` for density zero) or an ``Undefined``."""
    r = execute(program, trace, state, budget)
    if isinstance(r, Undefined):
        return r
    return r[DENSITY]


class _Sampler(_Run):
    # draws every missing address from its own prior, keyed by address
    def __init__(self, trace, budget, seed):
        super().__init__(trace, budget)
        self.seed = seed
        self.drawn = {}

    def value(self, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            v = dist.sample(Stream.keyed(self.seed, addr), args)
            if v is None:
                raise Undefined(NULL_TRACE_VALUE, addr)
        self.drawn[addr] = v
        return v


def sample_forward(program, seed, state=None, data=None, budget=DEFAULT_BUDGET):
    """Forward-sample a trace: ``(trace, log_density)`` or an ``Undefined``.

    Addresses present in ``data`` keep their value; every other address is
    drawn from its distribution with a stream keyed by ``(seed, address)``.
    The returned trace holds exactly the addresses that were executed, so
    it is minimal.
    """
    state = initial_state(program) if state is None else dict(state)
    run = _Sampler(data or {}, budget, seed)
    try:
        run.exec(program, state)
    except Undefined as u:
        return u
    return run.drawn, state[DENSITY]


def is_minimal(program, trace, state=None, budget=DEFAULT_BUDGET):
    """Defined on ``trace`` and Undefined once any single key is removed."""
    if isinstance(execute(program, trace, state, budget), Undefined):
        return False
    for a in keys(trace):
        smaller = {k: v for k, v in trace.items() if k != a}
        if not isinstance(execute(program, smaller, state, budget), Undefined):
            return False
    return True


def log_mean_exp(xs):
    m = max(xs)
    if m == float("-inf"):
        return m
    return m + math.log(math.fsum(math.exp(x - m) for x in xs) / len(xs))
