"""Static provenance analysis and the factorisation it induces.

The analysis works on CFG nodes.  A sample node stands for every address
it can generate, so results are sets of sample-node ids.

* ``reaching_definitions``: forward dataflow to a fixpoint.
* ``provnode(n, x)``: the sample nodes whose values may influence ``x``
  just before node ``n``.  Worklist over ``(node, variable)`` pairs; each
  reaching definition contributes its own inputs and the conditions of
  the branches it sits under.
* ``factor(k)``: the sample nodes the density factor of sample node ``k``
  may depend on.
* ``dependents(k)``: the sample nodes whose factors depend on ``k``.

The density of any trace splits into one factor per sample node: the
sum of that node's log-pdf terms over all of its executions.
"""

import json
from collections import deque
from dataclasses import dataclass

from .cfg import ASSIGN, BRANCH, SAMPLE, Code, TraceContext, build, run, to_dot
from .lang import Call, Const, free_vars
from .semantics import DEFAULT_BUDGET, DENSITY, NULL_TRACE_VALUE, Undefined, initial_state


class GraphExportError(Exception):
    pass


class NonConstantAddress(GraphExportError):
    pass


class DuplicateAddress(GraphExportError):
    pass


def defined_var(node):
    if node.kind in (ASSIGN, SAMPLE):
        return node.stmt.var
    return None


def used_vars(node):
    """Variables read when executing ``node``."""
    if node.kind == ASSIGN:
        return free_vars(node.stmt.expr)
    if node.kind == SAMPLE:
        out = set(free_vars(node.stmt.addr))
        for a in node.stmt.args:
            out |= free_vars(a)
        return out
    if node.kind == BRANCH:
        return free_vars(node.stmt.cond)
    return set()


def reaching_definitions(cfg):
    """``rd[n][x]`` = definition nodes of ``x`` reaching the entry of ``n``."""
    n_nodes = len(cfg.nodes)
    preds = cfg.preds()
    defs = [defined_var(n) for n in cfg.nodes]
    empty = {}
    ins = [empty] * n_nodes
    outs = [empty] * n_nodes
    work = deque(range(n_nodes))
    queued = [True] * n_nodes
    while work:
        n = work.popleft()
        queued[n] = False
        merged = {}
        for p in preds[n]:
            for x, ds in outs[p].items():
                cur = merged.get(x)
                merged[x] = ds if cur is None else cur | ds
        ins[n] = merged
        x = defs[n]
        if x is None:
            out = merged
        else:
            out = dict(merged)
            out[x] = frozenset([n])
        if out != outs[n]:
            outs[n] = out
            for s in cfg.succ[n]:
                if not queued[s]:
                    queued[s] = True
                    work.append(s)
    return ins


def live_variables(cfg):
    """``live[n]`` = variables read on some path from the entry of ``n`` before redefinition."""
    n_nodes = len(cfg.nodes)
    preds = cfg.preds()
    uses = [used_vars(n) for n in cfg.nodes]
    defs = [defined_var(n) for n in cfg.nodes]
    live_in = [frozenset()] * n_nodes
    work = deque(reversed(range(n_nodes)))
    queued = [True] * n_nodes
    while work:
        n = work.popleft()
        queued[n] = False
        out = set()
        for s in cfg.succ[n]:
            out |= live_in[s]
        out.discard(defs[n])
        new = frozenset(out | uses[n])
        if new != live_in[n]:
            live_in[n] = new
            for p in preds[n]:
                if not queued[p]:
                    queued[p] = True
                    work.append(p)
    return live_in


@dataclass(frozen=True)
class FactorSet:
    """Dependencies of the density factor of sample node ``node``."""

    node: int
    data_deps: frozenset  # via the address and distribution arguments
    control_deps: frozenset  # via conditions of enclosing branches
    dependents: frozenset  # sample nodes whose factors depend on this one

    @property
    def deps(self):
        return self.data_deps | self.control_deps

    @property
    def nodes(self):
        """The factor's node set, including the node itself."""
        return self.deps | {self.node}


class Analysis:
    """Provenance analysis of one CFG."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.rd = reaching_definitions(cfg)
        self.bp = {n.id: frozenset(cfg.branch_parents(n.id)) for n in cfg.nodes}
        self._prov = {}
        self._factors = None
        self._live = None

    def reaching(self, n, x):
        return self.rd[n].get(x, frozenset())

    def provnode(self, n, x):
        key = (n, x)
        hit = self._prov.get(key)
        if hit is not None:
            return hit
        nodes = self.cfg.nodes
        result = set()
        marked = set()
        queue = deque([(n, x)])
        while queue:
            m, y = queue.popleft()
            for d in self.rd[m].get(y, ()):
                node = nodes[d]
                if node.kind == SAMPLE:
                    result.add(d)
                    inputs = free_vars(node.stmt.addr)
                else:
                    inputs = free_vars(node.stmt.expr)
                for z in inputs:
                    if (d, z) not in marked:
                        marked.add((d, z))
                        queue.append((d, z))
                for b in self.bp[d]:
                    for z in free_vars(nodes[b].stmt.cond):
                        if (b, z) not in marked:
                            marked.add((b, z))
                            queue.append((b, z))
        out = frozenset(result)
        self._prov[key] = out
        return out

    def provnode_expr(self, n, e):
        out = set()
        for y in sorted(free_vars(e)):
            out |= self.provnode(n, y)
        return frozenset(out)

    def _compute_factors(self):
        nodes = self.cfg.nodes
        data = {}
        control = {}
        for k in self.cfg.sample_nodes():
            s = nodes[k].stmt
            d = set(self.provnode_expr(k, s.addr))
            for a in s.args:
                d |= self.provnode_expr(k, a)
            c = set()
            for b in self.bp[k]:
                c |= self.provnode_expr(b, nodes[b].stmt.cond)
            data[k] = frozenset(d)
            control[k] = frozenset(c)
        dependents = {k: set() for k in data}
        for j in data:
            for k in data[j] | control[j]:
                dependents[k].add(j)
        self._factors = {k: FactorSet(k, data[k], control[k], frozenset(dependents[k])) for k in data}

    @property
    def factors(self):
        if self._factors is None:
            self._compute_factors()
        return self._factors

    def factor(self, k):
        return self.factors[k]

    def dependents(self, k):
        return self.factors[k].dependents

    def existence_deps(self, j):
        """Sample nodes that may decide whether node ``j`` runs or which address it uses.

        A node outside this set can only change the distribution arguments of
        ``j``, never the presence or the name of the address ``j`` samples.
        """
        f = self.factors[j]
        return f.control_deps | self.provnode_expr(j, self.cfg.nodes[j].stmt.addr)

    @property
    def live(self):
        if self._live is None:
            self._live = live_variables(self.cfg)
        return self._live

    def loop_carried(self, k):
        """Variables live at sample node ``k`` whose value may come from an earlier run of ``k``.

        When this is empty, the only way a value of ``k`` can reach a later
        dependent is along a path that does not pass through ``k`` again.
        """
        return frozenset(y for y in self.live[k] if k in self.provnode(k, y))

    # -- addresses -------------------------------------------------------

    def constant_address(self, k):
        a = self.cfg.nodes[k].stmt.addr
        if isinstance(a, Const) and type(a.value) is str:
            return a.value
        return None

    def address_pattern(self, k):
        """Constant address, ``prefix*`` for ``"prefix" + ...``, otherwise ``*``."""
        a = self.cfg.nodes[k].stmt.addr
        while isinstance(a, Call) and a.op == "+":
            a = a.args[0]
        if isinstance(a, Const) and type(a.value) is str:
            return a.value if a is self.cfg.nodes[k].stmt.addr else a.value + "*"
        return "*"

    def node_label(self, k):
        """Constant address, or the address pattern tagged with the node id."""
        a = self.constant_address(k)
        return a if a is not None else "%s@%d" % (self.address_pattern(k), k)

    def address_set(self, k):
        """Factor set of ``k`` as labels (constant addresses or node names)."""
        return frozenset(self.node_label(n) for n in self.factors[k].nodes)

    # -- graph exports ---------------------------------------------------

    def bayes_net(self):
        """Parents per address; needs constant, pairwise distinct addresses."""
        labels = {}
        for k in self.cfg.sample_nodes():
            a = self.constant_address(k)
            if a is None:
                raise NonConstantAddress("sample node %d has a computed address" % k)
            if a in labels.values():
                raise DuplicateAddress("address %r is used by more than one sample statement" % a)
            labels[k] = a
        parents = {}
        for k, f in self.factors.items():
            parents[labels[k]] = sorted(labels[j] for j in f.nodes if j != k)
        return parents

    def markov_net(self):
        """One clique per factor, over node labels."""
        return [sorted(self.address_set(k)) for k in sorted(self.factors)]

    def bayes_dot(self):
        parents = self.bayes_net()
        lines = ["digraph bayes {"]
        for a in sorted(parents):
            lines.append('  "%s";' % a)
        for a in sorted(parents):
            for p in parents[a]:
                lines.append('  "%s" -> "%s";' % (p, a))
        lines.append("}")
        return "\n".join(lines) + "\n"

    def markov_dot(self):
        labels = sorted({x for c in self.markov_net() for x in c})
        edges = set()
        for c in self.markov_net():
            for i, a in enumerate(c):
                for b in c[i + 1:]:
                    edges.add((a, b))
        lines = ["graph markov {"]
        for a in labels:
            lines.append('  "%s";' % a)
        for a, b in sorted(edges):
            lines.append('  "%s" -- "%s";' % (a, b))
        lines.append("}")
        return "\n".join(lines) + "\n"

    def report(self):
        """Factor report as a JSON-ready dict."""
        out = []
        for k in sorted(self.factors):
            f = self.factors[k]
            node = self.cfg.nodes[k]
            out.append({
                "node": k,
                "line": node.line,
                "statement": node.label(),
                "address": self.node_label(k),
                "data_deps": sorted(f.data_deps),
                "control_deps": sorted(f.control_deps),
                "factor": sorted(self.address_set(k)),
                "dependents": sorted(f.dependents),
            })
        doc = {"factors": out, "markov_net": self.markov_net()}
        try:
            doc["bayes_net"] = self.bayes_net()
        except GraphExportError as e:
            doc["bayes_net"] = None
            doc["bayes_net_error"] = "%s: %s" % (type(e).__name__, e)
        return doc

    def report_json(self):
        return json.dumps(self.report(), indent=2, sort_keys=True) + "\n"

    def dot(self):
        labels = {k: "deps %s" % sorted(self.factors[k].deps) for k in self.factors}
        return to_dot(self.cfg, "factors", extra_labels=labels)


def analyze(program_or_cfg):
    cfg = program_or_cfg if hasattr(program_or_cfg, "nodes") else build(program_or_cfg)
    return Analysis(cfg)


class _FactorContext(TraceContext):
    def __init__(self, trace):
        super().__init__(trace)
        self.terms = {}

    def sample(self, node, state, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        lp = dist.logpdf(v, args)
        state[DENSITY] += lp
        self.terms[node] = self.terms.get(node, 0.0) + lp
        return v


def factor_values(code, trace, state=None, budget=DEFAULT_BUDGET):
    """Log-value of every factor on ``trace`` (nodes never executed give 0)."""
    if not isinstance(code, Code):
        code = Code(code)
    st = initial_state(code.cfg.program) if state is None else dict(state)
    ctx = _FactorContext(trace)
    try:
        run(code, st, ctx, 0, budget)
    except Undefined as u:
        return u
    return {k: ctx.terms.get(k, 0.0) for k in code.cfg.sample_nodes()}


def evaluate_factor(code, k, trace, state=None, budget=DEFAULT_BUDGET):
    vals = factor_values(code, trace, state, budget)
    if isinstance(vals, Undefined):
        return vals
    return vals[k]
