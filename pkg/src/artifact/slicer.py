"""Sliced sub-programs that resume execution from a checkpoint.

``slice_for_factor(k)`` keeps the nodes lying on some path from sample
node ``k`` to one of its dependents that does not pass through ``k`` again
on the way.  Sample nodes in the slice get a role:

* visit: node ``k`` itself, run first;
* score: a dependent of ``k``, contributes its density;
* read: any other sample node, which only binds the trace value.

Started from the state captured just before ``k`` ran, the slice computes
the part of the density that can change when the value at ``k``'s address
changes.

Paths that re-enter ``k`` are excluded.  That is a problem only if a value
produced by one execution of ``k`` can survive in a variable until ``k``
runs again and is then read.  An example is a running sum ``s = s + z``
inside a loop that a later sample reads.  The slice would then miss the
later dependents.  ``Analysis.loop_carried`` detects this case, and
``executable_slice`` falls back to ``widened_slice``, which allows paths
through ``k``.

``slice_for_smc(k)`` keeps the nodes on sample-free paths from ``k`` to the
next sample node (or End).  Running it advances a paused particle by one
sample statement.
"""

from collections import deque
from dataclasses import dataclass, field

from .cfg import READ, SAMPLE, SCORE, VISIT, Code, run, to_dot
from .lang import If, Sample, Seq, Skip, While, flatten, pp_expr, pp_stmt


@dataclass(eq=False)
class SlicedProgram:
    origin: int
    nodes: frozenset
    roles: dict  # sample node -> VISIT / SCORE / READ
    edges: tuple  # (src, dst, label) between retained nodes plus Start/End wiring
    dependents: frozenset
    widened: bool = False
    exec_roles: dict = field(default=None, repr=False)

    def __post_init__(self):
        r = dict(self.roles)
        # later executions of the origin contribute like any sample node
        r[self.origin] = SCORE
        self.exec_roles = r

    def role_of(self, n):
        return self.roles.get(n)


@dataclass(eq=False)
class SmcSlicedProgram:
    origin: int  # sample node, or Start for the entry slice
    nodes: frozenset
    terminals: frozenset  # sample nodes where the run pauses
    reaches_end: bool
    edges: tuple


def _forward(cfg, sources, blocked):
    seen = set()
    work = deque(sources)
    while work:
        n = work.popleft()
        if n in seen:
            continue
        seen.add(n)
        if n in blocked:
            continue
        work.extend(cfg.succ[n])
    return seen


def _backward(preds, targets, blocked):
    seen = set()
    work = deque(targets)
    while work:
        n = work.popleft()
        if n in seen:
            continue
        seen.add(n)
        if n in blocked:
            continue
        work.extend(preds[n])
    return seen


def _wire(cfg, k, nodes, dependents):
    inner = [(s, d, lab) for s, d, lab in cfg.edges() if s in nodes and d in nodes]
    has_succ = {s for s, _, _ in inner}
    out = [(cfg.start, k, None)] + inner
    for j in sorted(dependents):
        if j in nodes and j not in has_succ:
            out.append((j, cfg.end, None))
    return tuple(out)


def _roles(cfg, k, nodes, dependents):
    roles = {}
    for n in nodes:
        if cfg.nodes[n].kind != SAMPLE:
            continue
        if n == k:
            roles[n] = VISIT
        elif n in dependents:
            roles[n] = SCORE
        else:
            roles[n] = READ
    return roles


def slice_for_factor(analysis, k):
    """The slice of sample node ``k``, with paths that re-enter ``k`` excluded."""
    cfg = analysis.cfg
    deps = analysis.dependents(k)
    preds = cfg.preds()
    # reachable from k without passing through k again
    fwd = _forward(cfg, cfg.succ[k], {k})
    fwd.discard(k)
    targets = [j for j in deps if j != k]
    if k in deps:
        targets.extend(p for p in preds[k] if p != k)
        self_loop = k in cfg.succ[k]
    else:
        self_loop = False
    back = _backward(preds, targets, {k})
    nodes = {k} | (fwd & back)
    if self_loop:
        nodes.add(k)
    nodes = frozenset(nodes)
    return SlicedProgram(k, nodes, _roles(cfg, k, nodes, deps), _wire(cfg, k, nodes, deps), deps)


def widened_slice(analysis, k):
    """Like ``slice_for_factor`` but keeps paths through ``k`` as well."""
    cfg = analysis.cfg
    deps = analysis.dependents(k)
    preds = cfg.preds()
    fwd = _forward(cfg, cfg.succ[k], set())
    back = _backward(preds, list(deps), set())
    nodes = frozenset({k} | (fwd & back))
    return SlicedProgram(k, nodes, _roles(cfg, k, nodes, deps), _wire(cfg, k, nodes, deps),
                         deps, widened=True)


def executable_slice(analysis, k):
    """The slice the inference engines run for ``k``."""
    if analysis.loop_carried(k):
        return widened_slice(analysis, k)
    return slice_for_factor(analysis, k)


def slice_for_smc(cfg, k):
    """Nodes on sample-free paths from ``k`` (a sample node or Start) to the next sample node."""
    nodes = set([k])
    terminals = set()
    reaches_end = False
    work = deque(cfg.succ[k])
    edges = [(cfg.start, k, None)] if k != cfg.start else []
    seen = set()
    while work:
        n = work.popleft()
        if n in seen:
            continue
        seen.add(n)
        nodes.add(n)
        if cfg.nodes[n].kind == SAMPLE:
            terminals.add(n)
            continue
        if n == cfg.end:
            reaches_end = True
            continue
        work.extend(cfg.succ[n])
    for s, d, lab in cfg.edges():
        if s in nodes and d in nodes and not (s in terminals and s != k) and s != cfg.end:
            edges.append((s, d, lab))
    for t in sorted(terminals):
        edges.append((t, cfg.end, None))
    return SmcSlicedProgram(k, frozenset(nodes), frozenset(terminals), reaches_end, tuple(edges))


def entry_slice(cfg):
    return slice_for_smc(cfg, cfg.start)


def run_slice(code, sl, checkpoint, ctx, copy=True):
    """Execute a slice from ``checkpoint``.

    Returns ``(outcome, node, state)``.  For a factor slice the outcome is
    ``AT_END`` or ``EXITED``.  For an SMC slice it is ``PAUSED`` with the
    next sample node, or ``AT_END``.
    """
    state = dict(checkpoint) if copy else checkpoint
    if isinstance(sl, SmcSlicedProgram):
        outcome, node = run(code, state, ctx, sl.origin, pause=True)
    else:
        outcome, node = run(code, state, ctx, sl.origin, roles=sl.exec_roles, keep=sl.nodes)
    return outcome, node, state


class Slices:
    """Lazily built slices for every sample node of a program."""

    def __init__(self, analysis, code=None):
        self.analysis = analysis
        self.code = code if code is not None else Code(analysis.cfg)
        self._factor = {}
        self._smc = {}

    def factor(self, k):
        s = self._factor.get(k)
        if s is None:
            s = self._factor[k] = executable_slice(self.analysis, k)
        return s

    def smc(self, k):
        s = self._smc.get(k)
        if s is None:
            s = self._smc[k] = slice_for_smc(self.analysis.cfg, k)
        return s


# -- listings -----------------------------------------------------------------

def listing(cfg, sl):
    """Source-like listing of a slice: retained statements, roles in place of ``sample``."""
    node_of = {}
    for n in cfg.nodes:
        if n.stmt is not None and n.kind != "join":
            node_of[id(n.stmt)] = n.id
    keep = sl.nodes
    roles = sl.roles if isinstance(sl, SlicedProgram) else {}
    lines = []

    def emit(s, depth):
        pad = "    " * depth
        for part in flatten(s):
            if isinstance(part, Skip):
                continue
            n = node_of.get(id(part))
            if isinstance(part, (If, While)):
                if n in keep:
                    if isinstance(part, While):
                        lines.append("%swhile %s do" % (pad, pp_expr(part.cond)))
                        emit(part.body, depth + 1)
                    else:
                        lines.append("%sif %s then" % (pad, pp_expr(part.cond)))
                        emit(part.then, depth + 1)
                        lines.append(pad + "else")
                        emit(part.orelse, depth + 1)
                else:
                    # control node dropped; retained statements inside are shown flat
                    emit(part.then if isinstance(part, If) else part.body, depth)
                    if isinstance(part, If):
                        emit(part.orelse, depth)
            elif n in keep:
                if isinstance(part, Sample):
                    role = roles.get(n, "sample")
                    lines.append("%s%s = %s(%s, %s(%s))" % (
                        pad, part.var, role, pp_expr(part.addr), part.dist,
                        ", ".join(pp_expr(a) for a in part.args)))
                else:
                    lines.append(pad + pp_stmt(part))

    emit(cfg.program, 0)
    return "\n".join(lines) + "\n"


def slice_dot(cfg, sl, name="slice"):
    if isinstance(sl, SlicedProgram):
        labels = dict(sl.roles)
    else:
        labels = {t: "pause" for t in sl.terminals}
    keep = set(sl.nodes) | {cfg.start, cfg.end}
    return to_dot(cfg, name, keep=keep, extra_labels=labels, edges=sl.edges)
