"""Sequential Monte Carlo over a data schedule, naive and iterative.

Step ``t`` targets the model truncated to its first ``t`` observations.
Particles propose latent values from their priors, so the log-weight
increment of a step is the log-likelihood of the newly executed
observations: ``log p_t(tr) - log p_{t-1}(tr)`` minus the proposal terms
of the fresh latents.

* ``smc_naive`` re-executes the truncated program from scratch for every
  particle and step, and differences the accumulated likelihoods.
* ``smc_iterative`` keeps each particle paused at a sample node and
  advances it slice by slice until one more observation has executed.

Randomness is keyed: a latent value of particle ``n`` drawn during step
``t`` at address ``a`` comes from ``Stream.keyed(seed, "smc", t, n, a)``
and the resampling uniform of step ``t`` from
``Stream.keyed(seed, "resample", t)``.  Both variants therefore make the
same draws, compute bit-identical weights and resample identically.
"""

import math
from dataclasses import dataclass, field

from ..cfg import run
from ..rng import Stream
from ..semantics import DENSITY, Undefined
from .contexts import SmcCtx


class DegenerateWeights(Exception):
    """Every particle has weight zero."""


@dataclass
class SmcStep:
    t: int
    increments: list  # per-particle log-weight increment before resampling
    ancestors: list  # resampled ancestor index per particle
    log_evidence: float  # running log normalising-constant estimate
    ess: float


@dataclass
class SmcResult:
    steps: list = field(default_factory=list)
    particles: list = field(default_factory=list)  # final latent traces

    @property
    def log_evidence(self):
        return self.steps[-1].log_evidence if self.steps else 0.0


def _log_mean_exp(xs):
    m = max(xs)
    if m == -math.inf:
        return m
    return m + math.log(math.fsum(math.exp(x - m) for x in xs) / len(xs))


def systematic_resample(logw, u):
    """Ancestor indices by systematic resampling with offset ``u`` in [0, 1)."""
    n = len(logw)
    m = max(logw)
    if m == -math.inf or m != m:
        raise DegenerateWeights("all particle weights are zero")
    w = [math.exp(x - m) for x in logw]
    total = math.fsum(w)
    out = []
    c = w[0] / total
    i = 0
    for j in range(n):
        p = (u + j) / n
        while p >= c and i < n - 1:
            i += 1
            c += w[i] / total
        out.append(i)
    return out


def _ess(logw):
    m = max(logw)
    w = [math.exp(x - m) for x in logw]
    s = math.fsum(w)
    return s * s / math.fsum(x * x for x in w)


def _delta(after, before):
    # a dead particle stays dead instead of turning into nan
    if after == -math.inf:
        return after
    return after - before


def n_steps(model):
    return int(model.params[model.truncate])


def _finish_step(result, seed, t, inc, log_z):
    log_z += _log_mean_exp(inc)
    anc = systematic_resample(inc, Stream.keyed(seed, "resample", t).random())
    result.steps.append(SmcStep(t, list(inc), anc, log_z, _ess(inc)))
    return anc, log_z


def smc_naive(model, n_particles, seed=0, steps=None):
    T = n_steps(model) if steps is None else steps
    latents = [{} for _ in range(n_particles)]
    totals = [0.0] * n_particles
    result = SmcResult()
    log_z = 0.0
    for t in range(1, T + 1):
        state0 = model.initial_state(**{model.truncate: t})
        inc = []
        for n in range(n_particles):
            ctx = SmcCtx(latents[n], model.data, (seed, "smc", t, n))
            st = dict(state0)
            try:
                run(model.code, st, ctx, 0, model.budget)
                total = st[DENSITY]
            except Undefined:
                total = -math.inf
            inc.append(_delta(total, totals[n]))
            totals[n] = total
        anc, log_z = _finish_step(result, seed, t, inc, log_z)
        latents = [dict(latents[a]) for a in anc]
        totals = [totals[a] for a in anc]
    result.particles = latents
    return result


@dataclass
class Particle:
    state: dict  # checkpoint, paused before ``node`` runs
    node: int
    latent: dict


def smc_iterative(model, n_particles, seed=0, steps=None):
    T = n_steps(model) if steps is None else steps
    code = model.code
    state0 = model.initial_state(**{model.truncate: T})
    parts = []
    for n in range(n_particles):
        st = dict(state0)
        _, node = run(code, st, None, 0, model.budget, pause=True)
        parts.append(Particle(st, node, {}))
    result = SmcResult()
    log_z = 0.0
    end = code.end
    for t in range(1, T + 1):
        inc = []
        for n, p in enumerate(parts):
            before = p.state[DENSITY]
            ctx = SmcCtx(p.latent, model.data, (seed, "smc", t, n))
            try:
                while p.node != end and not ctx.observed:
                    # one slice: run the pending sample and stop before the next one
                    _, p.node = run(code, p.state, ctx, p.node, model.budget, pause=True)
                inc.append(_delta(p.state[DENSITY], before))
            except Undefined:
                p.state[DENSITY] = -math.inf
                p.node = end
                inc.append(-math.inf)
        anc, log_z = _finish_step(result, seed, t, inc, log_z)
        parts = [Particle(dict(parts[a].state), parts[a].node, dict(parts[a].latent)) for a in anc]
    result.particles = [p.latent for p in parts]
    return result
