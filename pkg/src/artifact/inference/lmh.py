"""Single-site Metropolis-Hastings over traces, from scratch and sliced.

Both engines share the randomness of every step ``s``:

* ``Stream.keyed(seed, "lmh", s)`` picks the address (uniform over the
  sorted latent keys) and then the acceptance uniform;
* a proposed value for address ``a`` comes from ``Stream.keyed(seed, s, a)``.

The proposal for a latent address is its prior.  The acceptance ratio
includes ``|keys(tr)| / |keys(tr')|`` for the uniform choice of address,
so the chain also targets the posterior when the number of latent
addresses changes.

``LMH`` re-runs the whole program for every proposal.  ``FactoredLMH``
runs the slice of the chosen address's sample node twice from the stored
checkpoint: once under ``ForwardCtx`` on the proposed trace and once under
``BackwardCtx`` on the current one.
"""

import bisect
import math
import warnings
from dataclasses import dataclass

from ..cfg import run
from ..rng import Stream
from ..semantics import Undefined
from .contexts import BackwardCtx, ForwardCtx, FullProposalCtx, InitCtx


@dataclass
class Step:
    step: int
    address: object
    accepted: bool
    prob: float
    logp: float
    proposed: int = 0  # number of proposal-density terms in the forward move
    undefined: str = None
    work: int = 0  # sample statements executed to evaluate the proposal


def _accept_prob(log_a):
    if log_a != log_a:  # nan
        return 0.0
    return 1.0 if log_a >= 0.0 else math.exp(log_a)


class LMH:
    """Baseline engine: every proposal re-executes the whole program."""

    factored = False

    def __init__(self, model, seed=0, latent=None):
        self.model = model
        self.seed = seed
        self.data = model.data
        self.state0 = model.initial_state()
        ctx = InitCtx(self.data, (seed, "init"), latent)
        run(model.code, dict(self.state0), ctx, 0, model.budget)
        self.latent = ctx.latent
        self.logp = ctx.logp
        self._init(ctx)
        self.keys = sorted(self.latent)
        self.steps = 0

    def _init(self, ctx):
        self.lps = {a: r[2] for a, r in ctx.records.items()}

    def choose(self, s):
        st = Stream.keyed(self.seed, "lmh", s)
        alpha = self.keys[st.randrange(len(self.keys))]
        return alpha, st.random()

    def step(self):
        s = self.steps
        self.steps += 1
        if not self.keys:
            return Step(s, None, False, 0.0, self.logp)
        alpha, u = self.choose(s)
        return self._step(s, alpha, u)

    def _step(self, s, alpha, u):
        ctx = FullProposalCtx(self.latent, self.data, alpha, (self.seed, s))
        try:
            run(self.model.code, dict(self.state0), ctx, 0, self.model.budget)
        except Undefined as e:
            return Step(s, alpha, False, 0.0, self.logp, undefined=e.reason, work=ctx.calls)
        lps = self.lps
        new = ctx.latent
        dropped = [a for a in lps if a not in new]
        logq_back = lps[alpha]
        for a in dropped:
            logq_back += lps[a]
        n_old, n_new = len(lps), len(new)
        log_a = (ctx.logp - self.logp) + (logq_back - ctx.logq)
        if n_old != n_new:
            log_a += math.log(n_old) - math.log(n_new)
        prob = _accept_prob(log_a)
        accepted = u < prob
        if accepted:
            changed = n_old != n_new or dropped
            self.latent = new
            self.lps = ctx.lps
            self.logp = ctx.logp
            if changed:
                self.keys = sorted(new)
        return Step(s, alpha, accepted, prob, self.logp, ctx.proposed, work=ctx.calls)

    def run(self, n):
        return [self.step() for _ in range(n)]


class FactoredLMH(LMH):
    """Sliced engine: a proposal runs only the slice of the chosen address's node."""

    factored = True

    def _init(self, ctx):
        # address -> (sample node, state just before the sample statement)
        self.checkpoints = {a: (r[0], r[1]) for a, r in ctx.records.items()}

    def _step(self, s, alpha, u):
        model = self.model
        node, ck = self.checkpoints[alpha]
        sl = model.slices.factor(node)
        fwd = ForwardCtx(self.latent, self.data, (self.seed, s))
        bwd = None
        try:
            run(model.code, dict(ck), fwd, node, model.budget, roles=sl.exec_roles, keep=sl.nodes)
            bwd = BackwardCtx(self.latent, self.data, fwd)
            run(model.code, dict(ck), bwd, node, model.budget, roles=sl.exec_roles, keep=sl.nodes)
        except Undefined as e:
            work = fwd.calls + (bwd.calls if bwd is not None else 0)
            return Step(s, alpha, False, 0.0, self.logp, undefined=e.reason, work=work)
        n_old = len(self.keys)
        n_new = n_old + len(fwd.fresh) - len(bwd.dropped)
        log_a = (fwd.dp + bwd.dp) + (fwd.dq + bwd.dq)
        if n_old != n_new:
            log_a += math.log(n_old) - math.log(n_new)
        prob = _accept_prob(log_a)
        accepted = u < prob
        if accepted:
            self._splice(fwd, bwd)
        return Step(s, alpha, accepted, prob, self.logp, fwd.proposed, work=fwd.calls + bwd.calls)

    def _splice(self, fwd, bwd):
        latent = self.latent
        latent.update(fwd.values)
        self.checkpoints.update(fwd.states)
        keys = self.keys
        for a in bwd.dropped:
            del latent[a]
            del self.checkpoints[a]
            keys.pop(bisect.bisect_left(keys, a))
        for a in fwd.fresh:
            bisect.insort(keys, a)
        self.logp += fwd.dp + bwd.dp


def make_lmh(model, seed=0, factored=False, latent=None):
    """Engine for ``model``; the sliced engine needs single-occurrence addresses."""
    if factored and not model.single_occurrence:
        warnings.warn("%s: addresses may repeat within one run; using the baseline engine"
                      % model.name)
        factored = False
    cls = FactoredLMH if factored else LMH
    return cls(model, seed, latent)
