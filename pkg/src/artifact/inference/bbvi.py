"""Black-box variational inference with score-function gradients.

Traces are drawn from the mean-field guide ``Q_phi`` by running the
program and sampling every latent address from its variational family.
Given a drawn trace, the per-address gradient terms are

* standard: ``grad log q_a(v_a) * (log P(tr) - log Q(tr))``;
* Rao-Blackwellised: ``grad log q_a(v_a) * D_a``, where ``D_a`` comes from
  running the slice of the address's sample node from its checkpoint.
  The visit adds ``log p - log q_a``, a score adds ``log p``, a read adds
  nothing.  A score node whose execution or address may depend on the
  visited node also subtracts the guide term ``log q`` of its latent
  address.  Without it the estimator is biased whenever the set of latent
  addresses depends on the visited value (``guide_terms=False`` gives the
  estimator without the correction, for comparison).

An address missing from a trace contributes a zero term.  Values for an
address ``a`` in sample ``j`` of step ``s`` come from
``Stream.keyed(seed, "bbvi", s, j, a)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..cfg import run
from ..rng import Stream
from ..semantics import NULL_TRACE_VALUE, Undefined
from .families import IncompatibleModel, LogitNormalFamily, family_for, signature

STANDARD, RAO = "standard", "rao"


class BBVIError(Exception):
    pass


class Params:
    """Per-address variational parameters, created when an address is first seen."""

    def __init__(self):
        self.fams = {}
        self.phi = {}
        self._dist = {}

    def get(self, addr, dist, args):
        fam = self.fams.get(addr)
        if fam is None:
            fam = family_for(dist, args)
            self.fams[addr] = fam
            self.phi[addr] = fam.init()
            self._dist[addr] = dist
        elif dist is not self._dist[addr] or not _same_support(fam, dist, args):
            raise IncompatibleModel("address %r changes its support" % addr)
        return fam, self.phi[addr]

    def copy(self):
        out = Params()
        out.fams = dict(self.fams)
        out._dist = dict(self._dist)
        out.phi = {a: p.copy() for a, p in self.phi.items()}
        return out

    def n_params(self):
        return sum(len(p) for p in self.phi.values())


def _same_support(fam, dist, args):
    if fam.tag in ("categorical", "dirichlet", "discrete") or isinstance(fam, LogitNormalFamily):
        return signature(family_for(dist, args)) == signature(fam)
    return True


class QCtx:
    """Draw a trace from the guide, recording values, log q and checkpoints."""

    def __init__(self, params, data, key, keep_states):
        self.params = params
        self.data = data
        self.key = key
        self.keep_states = keep_states
        self.values = {}
        self.lqs = {}
        self.states = {}
        self.logp = 0.0
        self.logq = 0.0

    def sample(self, node, state, addr, dist, args):
        v = self.data.get(addr)
        if v is not None:
            self.logp += dist.logpdf(v, args)
            return v
        if addr in self.values:
            raise BBVIError("address %r is sampled twice in one run" % addr)
        fam, phi = self.params.get(addr, dist, args)
        if self.keep_states:
            self.states[addr] = (node, dict(state))
        v = fam.sample(phi, Stream.keyed(*self.key, addr))
        lq = fam.logq(v, phi)
        self.logp += dist.logpdf(v, args)
        self.logq += lq
        self.values[addr] = v
        self.lqs[addr] = lq
        return v

    visit = score = sample


class BBVICtx:
    """Slice run for one address: the visit adds log p - log q, scores add log p.

    Scores at nodes in ``qnodes`` also subtract the guide term of a latent address.
    """

    def __init__(self, values, data, lqs, alpha, qnodes=frozenset()):
        self.values = values
        self.data = data
        self.lqs = lqs
        self.logq = lqs[alpha]
        self.qnodes = qnodes
        self.delta = 0.0

    def _value(self, addr):
        v = self.values.get(addr)
        if v is None:
            v = self.data.get(addr)
            if v is None:
                raise Undefined(NULL_TRACE_VALUE, addr)
        return v

    def visit(self, node, state, addr, dist, args):
        v = self._value(addr)
        self.delta += dist.logpdf(v, args) - self.logq
        return v

    def score(self, node, state, addr, dist, args):
        v = self._value(addr)
        self.delta += dist.logpdf(v, args)
        if node in self.qnodes:
            lq = self.lqs.get(addr)
            if lq is not None:
                self.delta -= lq
        return v

    sample = score

    def read(self, node, state, addr, dist, args):
        return self._value(addr)


@dataclass
class Draw:
    values: dict
    lqs: dict
    states: dict
    logp: float
    logq: float


def draw(model, params, key, keep_states=False):
    ctx = QCtx(params, model.data, key, keep_states)
    try:
        run(model.code, model.initial_state(), ctx, 0, model.budget)
    except Undefined as e:
        raise BBVIError("a guide trace is undefined (%s at %r)" % (e.reason, e.address))
    return Draw(ctx.values, ctx.lqs, ctx.states, ctx.logp, ctx.logq)


def guide_nodes(model, k):
    """Score nodes of ``k``'s slice whose latent guide term stays in the Rao term."""
    cache = model.cache.setdefault("guide_nodes", {})
    hit = cache.get(k)
    if hit is None:
        a = model.analysis
        hit = cache[k] = frozenset(j for j in a.dependents(k) if k in a.existence_deps(j))
    return hit


def terms(model, params, d, variant, guide_terms=True):
    """Per-address single-sample gradient terms of one drawn trace."""
    out = {}
    if variant == STANDARD:
        f = d.logp - d.logq
        for a, v in d.values.items():
            out[a] = params.fams[a].grad(v, params.phi[a]) * f
        return out
    for a, v in d.values.items():
        node, ck = d.states[a]
        sl = model.slices.factor(node)
        qn = guide_nodes(model, node) if guide_terms else frozenset()
        ctx = BBVICtx(d.values, model.data, d.lqs, a, qn)
        run(model.code, dict(ck), ctx, node, model.budget, roles=sl.exec_roles, keep=sl.nodes)
        out[a] = params.fams[a].grad(v, params.phi[a]) * ctx.delta
    return out


def draws(model, params, n, seed, step=0, keep_states=True):
    return [draw(model, params, (seed, "bbvi", step, j), keep_states) for j in range(n)]


def estimate(model, params, samples, variant):
    """Average of the single-sample terms; absent addresses count as zero."""
    total = {a: np.zeros_like(p) for a, p in params.phi.items()}
    for d in samples:
        for a, g in terms(model, params, d, variant).items():
            total[a] += g
    n = len(samples)
    return {a: g / n for a, g in total.items()}


def grad_standard(model, params, n, seed, step=0):
    return estimate(model, params, draws(model, params, n, seed, step, False), STANDARD)


def grad_rao(model, params, n, seed, step=0):
    return estimate(model, params, draws(model, params, n, seed, step, True), RAO)


def term_variance(model, params, samples, variant):
    """Variance of each parameter's single-sample term, averaged over all parameters."""
    addrs = sorted({a for d in samples for a in d.values})
    rows = []
    for d in samples:
        t = terms(model, params, d, variant)
        rows.append(np.concatenate([t[a] if a in t else np.zeros(len(params.phi[a]))
                                    for a in addrs]))
    m = np.array(rows)
    if not np.all(np.isfinite(m)):
        raise BBVIError("non-finite gradient terms")
    return float(m.var(axis=0).mean())


def variance_report(model, params=None, n=1000, seed=0, step=0):
    """Both estimators on the same ``n`` guide traces."""
    if params is None:
        params = Params()
    samples = draws(model, params, n, seed, step, True)
    std = term_variance(model, params, samples, STANDARD)
    rao = term_variance(model, params, samples, RAO)
    if rao > 0:
        red = std / rao
    else:
        red = 1.0 if std == 0 else math.inf
    return {"standard": std, "rao": rao, "reduction": red, "n": n, "params": params.n_params()}


class Adam:
    def __init__(self, lr=0.05, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m, self.v, self.t = {}, {}, {}

    def ascend(self, params, grads):
        for a, g in grads.items():
            if a not in self.m:
                self.m[a] = np.zeros_like(g)
                self.v[a] = np.zeros_like(g)
                self.t[a] = 0
            self.t[a] += 1
            t = self.t[a]
            self.m[a] = self.b1 * self.m[a] + (1 - self.b1) * g
            self.v[a] = self.b2 * self.v[a] + (1 - self.b2) * g * g
            mhat = self.m[a] / (1 - self.b1 ** t)
            vhat = self.v[a] / (1 - self.b2 ** t)
            params.phi[a] = params.phi[a] + self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class OptimizeResult:
    params: Params
    records: list = field(default_factory=list)  # per step: elbo estimate, term variance


def optimize(model, variant=STANDARD, steps=100, samples=10, lr=0.05, seed=0, params=None,
             track_variance=False):
    """Stochastic gradient ascent on the ELBO with Adam."""
    params = Params() if params is None else params
    opt = Adam(lr)
    result = OptimizeResult(params)
    for s in range(steps):
        ds = draws(model, params, samples, seed, s, variant == RAO)
        grads = estimate(model, params, ds, variant)
        rec = {"step": s, "elbo": sum(d.logp - d.logq for d in ds) / len(ds)}
        if track_variance:
            rec["variance"] = term_variance(model, params, ds, variant)
        opt.ascend(params, grads)
        for a, p in params.phi.items():
            if not np.all(np.isfinite(p)):
                raise BBVIError("parameters of %r diverged at step %d: %s" % (a, s, p))
        result.records.append(rec)
    return result
