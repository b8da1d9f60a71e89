"""Control-flow graphs and the small-step executor.

Translation scheme (node ids are dense and handed out in translation
order: ``Start`` is 0, statement nodes follow in source order with a
branch before its arms and the join after them, ``End`` is last):

* assignment / sample: one node;
* ``S1; S2``: the exit of ``S1`` feeds the entry of ``S2``;
* ``if E then S1 else S2``: ``Branch -> S1 | S2 -> Join`` (an empty arm
  links the branch straight to the join);
* ``while E do S``: ``Branch -> S -> Branch`` with the false edge going
  to the ``Join`` (an empty body makes a self loop on the branch).

A branch's successors are ``(true, false)``.  Every branch is paired with
its join; the *region* of a branch is the set of nodes of its arms or
loop body.
"""

from dataclasses import dataclass, field

from . import distributions as _dist
from .lang import Assign, If, Sample, Seq, Skip, While, pp_expr, pp_stmt
from .semantics import (BUDGET_EXHAUSTED, DEFAULT_BUDGET, DENSITY, NON_BOOLEAN_CONDITION,
                        NULL_TRACE_VALUE, Undefined, check_sample, compile_expr, initial_state)

START, END, ASSIGN, SAMPLE, BRANCH, JOIN = "start", "end", "assign", "sample", "branch", "join"


@dataclass(eq=False)
class Node:
    id: int
    kind: str
    stmt: object = None
    loop: bool = False  # branch/join of a while loop
    pair: int = None  # join of a branch, branch of a join

    @property
    def line(self):
        return getattr(self.stmt, "line", 0)

    @property
    def var(self):
        return self.stmt.var

    def label(self):
        if self.kind in (START, END):
            return self.kind
        if self.kind == BRANCH:
            return "%s %s" % ("while" if self.loop else "if", pp_expr(self.stmt.cond))
        if self.kind == JOIN:
            return "join"
        return pp_stmt(self.stmt)


@dataclass(eq=False)
class Cfg:
    nodes: list
    succ: list
    program: object
    region: dict = field(default_factory=dict)

    @property
    def start(self):
        return 0

    @property
    def end(self):
        return len(self.nodes) - 1

    def preds(self):
        out = [[] for _ in self.nodes]
        for n, ss in enumerate(self.succ):
            for s in ss:
                out[s].append(n)
        return out

    def edges(self):
        """``(src, dst, label)`` with label ``true``/``false`` on branch edges."""
        out = []
        for n, ss in enumerate(self.succ):
            if self.nodes[n].kind == BRANCH:
                out.append((n, ss[0], "true"))
                out.append((n, ss[1], "false"))
            else:
                out.extend((n, s, None) for s in ss)
        return out

    def sample_nodes(self):
        return [n.id for n in self.nodes if n.kind == SAMPLE]

    def branches(self):
        return [n.id for n in self.nodes if n.kind == BRANCH]

    def branch_parents(self, n):
        """Branches whose region contains node ``n``."""
        return {b for b, r in self.region.items() if n in r}

    def dot(self, name="cfg"):
        return to_dot(self, name)


def build(program):
    """Translate a statement AST into its CFG."""
    nodes = []
    succ = []
    region = {}

    def new(kind, stmt=None, loop=False):
        nodes.append(Node(len(nodes), kind, stmt, loop))
        succ.append([None])
        return len(nodes) - 1

    def connect(tails, target):
        for n, slot in tails:
            succ[n][slot] = target

    def go(s):
        # returns (entry, tails) or (None, None) for a statement with no nodes
        t = type(s)
        if t is Skip:
            return None, None
        if t is Seq:
            e1, t1 = go(s.first)
            e2, t2 = go(s.second)
            if e1 is None:
                return e2, t2
            if e2 is None:
                return e1, t1
            connect(t1, e2)
            return e1, t2
        if t is Assign:
            n = new(ASSIGN, s)
            return n, [(n, 0)]
        if t is Sample:
            n = new(SAMPLE, s)
            return n, [(n, 0)]
        if t is If:
            b = new(BRANCH, s)
            succ[b] = [None, None]
            e1, t1 = go(s.then)
            e2, t2 = go(s.orelse)
            j = new(JOIN, s)
            region[b] = frozenset(range(b + 1, j))
            succ[b] = [j if e1 is None else e1, j if e2 is None else e2]
            if t1:
                connect(t1, j)
            if t2:
                connect(t2, j)
            nodes[b].pair, nodes[j].pair = j, b
            return b, [(j, 0)]
        if t is While:
            b = new(BRANCH, s, loop=True)
            succ[b] = [None, None]
            e, tl = go(s.body)
            j = new(JOIN, s, loop=True)
            region[b] = frozenset(range(b + 1, j))
            succ[b] = [b if e is None else e, j]
            if tl:
                connect(tl, b)
            nodes[b].pair, nodes[j].pair = j, b
            return b, [(j, 0)]
        raise TypeError("not a statement: %r" % (s,))

    start = new(START)
    entry, tails = go(program)
    end = new(END)
    succ[end] = []
    succ[start] = [end if entry is None else entry]
    if tails:
        connect(tails, end)
    return Cfg(nodes, [tuple(s) for s in succ], program, region)


def _dot_escape(s):
    return s.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(cfg, name="cfg", keep=None, extra_labels=None, edges=None):
    lines = ["digraph %s {" % name, "  node [shape=box, fontname=monospace];"]
    for n in cfg.nodes:
        if keep is not None and n.id not in keep:
            continue
        label = "%d: %s" % (n.id, n.label())
        if extra_labels and n.id in extra_labels:
            label = "%s [%s]" % (label, extra_labels[n.id])
        shape = ""
        if n.kind == BRANCH:
            shape = ", shape=diamond"
        elif n.kind in (START, END, JOIN):
            shape = ", shape=ellipse"
        lines.append('  n%d [label="%s"%s];' % (n.id, _dot_escape(label), shape))
    if edges is None:
        edges = [e for e in cfg.edges() if keep is None or e[0] in keep and e[1] in keep]
    for src, dst, lab in edges:
        if lab:
            lines.append('  n%d -> n%d [label="%s"];' % (src, dst, lab))
        else:
            lines.append("  n%d -> n%d;" % (src, dst))
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- compiled execution -------------------------------------------------------

# op codes
_ASSIGN, _SAMPLE, _IF, _LOOP, _GOTO = range(5)

# sample-node roles inside slices
VISIT, SCORE, READ, PLAIN = "visit", "score", "read", "sample"

# run outcomes
AT_END, EXITED, PAUSED = "end", "exit", "pause"


class Code:
    """Per-node operation table for fast execution of a CFG."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.end = cfg.end
        ops = []
        for n in cfg.nodes:
            ss = cfg.succ[n.id]
            if n.kind == ASSIGN:
                ops.append((_ASSIGN, n.stmt.var, compile_expr(n.stmt.expr), ss[0]))
            elif n.kind == SAMPLE:
                s = n.stmt
                ops.append((_SAMPLE, s.var, compile_expr(s.addr), _dist.get(s.dist),
                            tuple(compile_expr(a) for a in s.args), ss[0]))
            elif n.kind == BRANCH:
                ops.append((_LOOP if n.loop else _IF, compile_expr(n.stmt.cond), ss[0], ss[1]))
            elif n.kind == END:
                ops.append(None)
            else:
                ops.append((_GOTO, ss[0]))
        self.ops = ops


def run(code, state, ctx, node=0, budget=DEFAULT_BUDGET, roles=None, keep=None,
        pause=False, log=None):
    """Small-step execution from ``node`` until End.

    ``state`` is updated in place.  Sample nodes call
    ``ctx.sample(node, state, address, dist, args)`` which returns the value
    to bind.  With ``roles`` (a node -> role map) the first executed node
    dispatches to ``ctx.visit`` and later sample nodes to ``ctx.score`` or
    ``ctx.read``.  Execution stops early when it reaches a node outside
    ``keep`` (outcome ``EXITED``), or with ``pause`` when it arrives at any
    sample node after the first one (outcome ``PAUSED``).

    Returns ``(outcome, node)``; raises ``Undefined``.
    """
    ops = code.ops
    end = code.end
    checks = 0
    first = True
    while node != end:
        if keep is not None and node not in keep:
            return EXITED, node
        op = ops[node]
        kind = op[0]
        if kind == _SAMPLE and pause and not first:
            return PAUSED, node
        if log is not None:
            log.append(node)
        if kind == _ASSIGN:
            state[op[1]] = op[2](state)
            node = op[3]
        elif kind == _SAMPLE:
            addr = op[2](state)
            args = [f(state) for f in op[4]]
            check_sample(addr, args)
            if roles is None:
                value = ctx.sample(node, state, addr, op[3], args)
            else:
                role = VISIT if first else roles[node]
                if role is SCORE:
                    value = ctx.score(node, state, addr, op[3], args)
                elif role is READ:
                    value = ctx.read(node, state, addr, op[3], args)
                elif role is VISIT:
                    value = ctx.visit(node, state, addr, op[3], args)
                else:
                    value = ctx.sample(node, state, addr, op[3], args)
            state[op[1]] = value
            node = op[5]
        elif kind == _GOTO:
            node = op[1]
        else:
            if kind == _LOOP:
                checks += 1
                if checks > budget:
                    raise Undefined(BUDGET_EXHAUSTED)
            c = op[1](state)
            if c is True:
                node = op[2]
            elif c is False:
                node = op[3]
            else:
                raise Undefined(NON_BOOLEAN_CONDITION)
        first = False
    if log is not None:
        log.append(end)
    return AT_END, end


def unrolled_keys(cfg, sequence):
    """Identify each occurrence in a node sequence with a node of the unrolled CFG.

    The key of an occurrence is ``(node, iterations)`` where ``iterations``
    lists, for every enclosing while loop (outermost first, the loop's own
    branch included), how many times its body has completed.  Two
    executions reach the same unrolled node exactly when the keys match.
    """
    enclosing = {}
    loops = sorted(b for b in cfg.region if cfg.nodes[b].loop)
    for n in range(len(cfg.nodes)):
        enclosing[n] = [b for b in loops if n in cfg.region[b] or n == b]
    counter = {}
    out = []
    prev = None
    for n in sequence:
        if cfg.nodes[n].kind == BRANCH and cfg.nodes[n].loop:
            if prev is not None and (prev == n or prev in cfg.region[n]):
                counter[n] += 1
            else:
                counter[n] = 0
        out.append((n, tuple(counter.get(b, 0) for b in enclosing[n])))
        prev = n
    return out


class TraceContext:
    """Standard semantics: values come from the trace, densities accumulate.

    Inside a slice, read nodes take their value from the trace without
    adding to the density.
    """

    def __init__(self, trace):
        self.trace = trace

    def sample(self, node, state, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        state[DENSITY] += dist.logpdf(v, args)
        return v

    visit = score = sample

    def read(self, node, state, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        return v


def execute(code, trace, state=None, budget=DEFAULT_BUDGET, log=None):
    """CFG counterpart of :func:`artifact.semantics.execute`."""
    if state is None:
        state = initial_state(code.cfg.program)
    else:
        state = dict(state)
    try:
        run(code, state, TraceContext(trace), 0, budget, log=log)
    except Undefined as u:
        return u
    return state


def density(code, trace, state=None, budget=DEFAULT_BUDGET):
    r = execute(code, trace, state, budget)
    if isinstance(r, Undefined):
        return r
    return r[DENSITY]
