"""Execution contexts: what sample, visit, score and read statements do.

Every context has the four methods the CFG executor dispatches to.  Each
one gets ``(node, state, address, dist, args)`` and returns the value to
bind.  Random draws come from streams keyed by what the value is for, so
two engines that visit addresses in a different order still draw the same
numbers.

Values are looked up first in ``latent`` (the current latent trace) and
then in ``data`` (observed addresses, never proposed).
"""

from ..rng import Stream
from ..semantics import DENSITY, NULL_TRACE_VALUE, Undefined


class SingleOccurrenceError(Exception):
    """An address was generated twice within one execution."""


def _draw(dist, args, key):
    v = dist.sample(Stream.keyed(*key), args)
    if v is None:
        raise Undefined(NULL_TRACE_VALUE, key[-1])
    return v


def _lookup(latent, data, addr):
    v = latent.get(addr)
    if v is None:
        v = data.get(addr)
    return v


class InitCtx:
    """Forward sampling from the prior, recording everything a chain needs.

    ``records[addr] = (node, pre-sample state, log pdf)`` for latent addresses.
    """

    def __init__(self, data, key, latent=None):
        self.data = data
        self.key = key
        self.given = latent or {}
        self.latent = {}
        self.records = {}
        self.logp = 0.0

    def sample(self, node, state, addr, dist, args):
        v = self.data.get(addr)
        if v is not None:
            lp = dist.logpdf(v, args)
            self.logp += lp
            return v
        if addr in self.latent:
            raise SingleOccurrenceError(addr)
        pre = dict(state)
        v = self.given.get(addr)
        if v is None:
            v = _draw(dist, args, self.key + (addr,))
        lp = dist.logpdf(v, args)
        self.logp += lp
        self.latent[addr] = v
        self.records[addr] = (node, pre, lp)
        return v

    visit = score = sample

    def read(self, node, state, addr, dist, args):
        raise AssertionError("full runs have no read nodes")


class FullProposalCtx:
    """Whole-program LMH proposal: resample ``alpha``, draw fresh addresses, copy the rest."""

    def __init__(self, latent, data, alpha, key):
        self.old = latent
        self.data = data
        self.alpha = alpha
        self.key = key
        self.latent = {}
        self.lps = {}
        self.logp = 0.0
        self.logq = 0.0
        self.proposed = 0
        self.calls = 0  # sample statements executed

    def sample(self, node, state, addr, dist, args):
        self.calls += 1
        v = self.data.get(addr)
        if v is not None:
            self.logp += dist.logpdf(v, args)
            return v
        if addr in self.latent:
            raise SingleOccurrenceError(addr)
        if addr == self.alpha:
            v = None
        else:
            v = self.old.get(addr)
        if v is None:
            v = _draw(dist, args, self.key + (addr,))
            lp = dist.logpdf(v, args)
            self.logq += lp
            self.proposed += 1
        else:
            lp = dist.logpdf(v, args)
        self.logp += lp
        self.latent[addr] = v
        self.lps[addr] = lp
        return v


class ForwardCtx:
    """Slice run on the proposed trace.

    visit: propose a new value for ``alpha``; score: propose only if the
    address is missing from the current trace; read: current value.  The
    pre-sample state of every sample statement met is cached.
    """

    def __init__(self, latent, data, key):
        self.latent = latent
        self.data = data
        self.key = key
        self.dp = 0.0
        self.dq = 0.0
        self.proposed = 0
        self.values = {}  # latent address -> value in the proposed trace
        self.states = {}  # latent address -> (node, pre-sample state)
        self.fresh = []
        self.calls = 0

    def visit(self, node, state, addr, dist, args):
        self.calls += 1
        self.states[addr] = (node, dict(state))
        v = _draw(dist, args, self.key + (addr,))
        lp = dist.logpdf(v, args)
        self.dp += lp
        self.dq -= lp
        self.proposed += 1
        self.values[addr] = v
        return v

    def score(self, node, state, addr, dist, args):
        self.calls += 1
        v = self.data.get(addr)
        if v is not None:
            self.dp += dist.logpdf(v, args)
            return v
        if addr in self.values:
            raise SingleOccurrenceError(addr)
        self.states[addr] = (node, dict(state))
        v = self.latent.get(addr)
        if v is None:
            v = _draw(dist, args, self.key + (addr,))
            lp = dist.logpdf(v, args)
            self.dq -= lp
            self.proposed += 1
            self.fresh.append(addr)
        else:
            lp = dist.logpdf(v, args)
        self.dp += lp
        self.values[addr] = v
        return v

    def read(self, node, state, addr, dist, args):
        self.calls += 1
        v = self.data.get(addr)
        if v is not None:
            return v
        v = self.latent.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        self.states[addr] = (node, dict(state))
        self.values[addr] = v
        return v

    sample = score


class BackwardCtx:
    """Slice run on the current trace, scoring the reverse move.

    Latent addresses met at score nodes that the forward run did not reach
    are dropped by the proposal; their prior terms enter the reverse
    proposal density.
    """

    def __init__(self, latent, data, forward):
        self.latent = latent
        self.data = data
        self.seen = forward.values
        self.dp = 0.0
        self.dq = 0.0
        self.dropped = []
        self.calls = 0

    def _value(self, addr):
        self.calls += 1
        v = self.latent.get(addr)
        if v is None:
            v = self.data.get(addr)
            if v is None:
                raise Undefined(NULL_TRACE_VALUE, addr)
        return v

    def visit(self, node, state, addr, dist, args):
        v = self._value(addr)
        lp = dist.logpdf(v, args)
        self.dp -= lp
        self.dq += lp
        return v

    def score(self, node, state, addr, dist, args):
        v = self._value(addr)
        lp = dist.logpdf(v, args)
        self.dp -= lp
        if addr not in self.seen and addr not in self.data:
            self.dq += lp
            self.dropped.append(addr)
        return v

    def read(self, node, state, addr, dist, args):
        return self._value(addr)

    sample = score


class SliceDensityCtx:
    """Density of a slice on a fixed trace: visit and score add, read does not."""

    def __init__(self, trace):
        self.trace = trace
        self.logp = 0.0
        self.terms = 0

    def _value(self, addr):
        v = self.trace.get(addr)
        if v is None:
            raise Undefined(NULL_TRACE_VALUE, addr)
        return v

    def visit(self, node, state, addr, dist, args):
        v = self._value(addr)
        self.logp += dist.logpdf(v, args)
        self.terms += 1
        return v

    score = sample = visit

    def read(self, node, state, addr, dist, args):
        return self._value(addr)


class SmcCtx:
    """Particle advance: observed addresses add their log pdf to the state's density.

    Latent addresses are drawn from their prior (the proposal), so their
    prior and proposal terms cancel and they add nothing to the weight.
    """

    def __init__(self, latent, data, key):
        self.latent = latent
        self.data = data
        self.key = key
        self.observed = 0

    def sample(self, node, state, addr, dist, args):
        v = self.data.get(addr)
        if v is not None:
            state[DENSITY] += dist.logpdf(v, args)
            self.observed += 1
            return v
        v = self.latent.get(addr)
        if v is None:
            v = _draw(dist, args, self.key + (addr,))
            self.latent[addr] = v
        return v

    visit = score = sample
