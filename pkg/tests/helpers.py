"""Shared test utilities: small programs, trace generators and dynamic oracles."""

import math

from artifact import corpus
from artifact.cfg import AT_END, run
from artifact.lang import parse
from artifact.model import Model
from artifact.rng import Stream
from artifact.semantics import DENSITY, Undefined, sample_forward

# compact sizes keep the per-model loops in the property tests quick
SMALL = {"allocation": 6, "gmm_fixed": 8, "gmm_variable": 8, "hmm": 8, "hmm_unrolled": 8,
         "lda_fixed": 12, "linear_regression": 8, "dirichlet_process": 8, "urn": 6,
         "marsaglia": 6}


def small(name, seed=0):
    return corpus.load(name, SMALL.get(name), seed)


def model(src, params=None, data=None, **kw):
    return Model(src, params, data, **kw)


def forward_traces(m, n, seed=0):
    """``n`` defined forward samples (full traces, data included)."""
    out = []
    s = 0
    while len(out) < n and s < 20 * n + 100:
        r = m.forward((seed, s))
        s += 1
        if not isinstance(r, Undefined):
            out.append(r[0])
    return out


def perturbed_traces(m, n, seed=0):
    """Forward samples plus traces with a key dropped, a junk key, or an odd value."""
    base = forward_traces(m, n, seed)
    out = []
    rng = Stream.keyed("perturb", seed)
    odd = ["s", True, 1.5, -1, (0.5, 0.5), 0]
    for i, tr in enumerate(base):
        kind = i % 4
        t = dict(tr)
        keys = sorted(t)
        if kind == 1 and keys:
            del t[keys[rng.randrange(len(keys))]]
        elif kind == 2:
            t["unused_address"] = 3.0
        elif kind == 3 and keys:
            t[keys[rng.randrange(len(keys))]] = odd[rng.randrange(len(odd))]
        out.append(t)
    return out


def same(a, b):
    """Exact equality that tells 1, 1.0 and True apart and treats nan as equal to nan."""
    if type(a) is not type(b):
        return False
    if type(a) is float:
        return a == b or (math.isnan(a) and math.isnan(b))
    if type(a) is tuple:
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    return a == b


class Recorder:
    """Standard trace semantics that also notes which node sampled each address."""

    def __init__(self, trace):
        self.trace = trace
        self.node_of = {}
        self.calls = {}

    def sample(self, node, state, addr, dist, args):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined("null-trace-value", addr)
        self.node_of.setdefault(addr, set()).add(node)
        self.calls[addr] = (dist, list(args), dict(state), node)
        state[DENSITY] += dist.logpdf(v, args)
        return v


def stepwise(m, trace):
    """Execute node by node: ``[(node, state before node)]`` and the recorder, or Undefined."""
    code = m.code
    st = m.initial_state()
    rec = Recorder(trace)
    seq = []
    node = 0
    try:
        while True:
            seq.append((node, dict(st)))
            outcome, nxt = run(code, st, rec, node, m.budget, keep={node})
            if outcome == AT_END:
                seq.append((nxt, dict(st)))
                break
            node = nxt
    except Undefined as u:
        return u, rec
    return seq, rec


def redraw(m, trace, addr, seed):
    """Trace equal to ``trace`` except a fresh prior draw at ``addr`` (completed forward)."""
    _, rec = stepwise(m, trace)
    dist, args, _, _ = rec.calls[addr]
    v = dist.sample(Stream.keyed("redraw", seed, addr), args)
    if v is None:
        return None
    clamp = dict(trace)
    clamp[addr] = v
    r = sample_forward(m.program, ("complete", seed), m.initial_state(), clamp, m.budget)
    if isinstance(r, Undefined):
        return None
    return r[0]
