"""Mean-field variational families with closed-form score functions.

Each latent address gets a family chosen from its distribution's
``family`` tag.  Parameters are unconstrained real vectors:

==============  ==============================  ============================
tag             q                               parameters
==============  ==============================  ============================
normal          Normal(mu, exp(s))              (mu, s)
lognormal       exp(Normal(mu, exp(s)))         (mu, s)
logitnormal     a + (b-a) sigmoid(Normal)       (mu, s), bounds from args
bernoulli       Bernoulli(sigmoid(t))           (t,)
poisson         Poisson(exp(e))                 (e,)
categorical     Categorical(softmax(w))         w, one per category
discrete        a + Categorical(softmax(w))     w, one per value in [a, b]
dirichlet       Dirichlet(exp(e))               e, one per component
==============  ==============================  ============================

``grad(v, phi)`` is the gradient of ``log q(v | phi)`` with respect to ``phi``.
"""

import math

import numpy as np
from scipy.special import digamma

_LOG_2PI = math.log(2.0 * math.pi)
NEG_INF = float("-inf")


class IncompatibleModel(Exception):
    """An address changed its support type or dimension between executions."""


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softmax(w):
    m = max(w)
    e = [math.exp(x - m) for x in w]
    s = math.fsum(e)
    return [x / s for x in e]


class _Gaussian:
    # Normal on a transformed scale y = t(v); subclasses define the transform
    dim = 2

    def init(self):
        return np.zeros(2)

    def to_y(self, v):
        return v

    def from_y(self, y):
        return y

    def log_jac(self, v, y):
        # log |dy/dv|
        return 0.0

    def sample(self, phi, rng):
        return self.from_y(rng.gauss(float(phi[0]), math.exp(float(phi[1]))))

    def logq(self, v, phi):
        y = self.to_y(v)
        if y is None:
            return NEG_INF
        mu, s = float(phi[0]), float(phi[1])
        z = (y - mu) / math.exp(s)
        return -0.5 * z * z - s - 0.5 * _LOG_2PI + self.log_jac(v, y)

    def grad(self, v, phi):
        mu, s = float(phi[0]), float(phi[1])
        sig = math.exp(s)
        d = self.to_y(v) - mu
        return np.array([d / (sig * sig), d * d / (sig * sig) - 1.0])


class NormalFamily(_Gaussian):
    tag = "normal"


class LogNormalFamily(_Gaussian):
    tag = "lognormal"

    def to_y(self, v):
        return math.log(v) if v > 0 else None

    def from_y(self, y):
        return math.exp(y)

    def log_jac(self, v, y):
        return -y


class LogitNormalFamily(_Gaussian):
    tag = "logitnormal"

    def __init__(self, a, b):
        self.a, self.b = float(a), float(b)

    def to_y(self, v):
        u = (v - self.a) / (self.b - self.a)
        if not 0.0 < u < 1.0:
            return None
        return math.log(u) - math.log1p(-u)

    def from_y(self, y):
        return self.a + (self.b - self.a) * _sigmoid(y)

    def log_jac(self, v, y):
        u = (v - self.a) / (self.b - self.a)
        return -math.log(self.b - self.a) - math.log(u) - math.log1p(-u)


class BernoulliFamily:
    tag = "bernoulli"
    dim = 1

    def init(self):
        return np.zeros(1)

    def sample(self, phi, rng):
        return 1 if rng.random() < _sigmoid(float(phi[0])) else 0

    def logq(self, v, phi):
        t = float(phi[0])
        # log sigmoid(t) and log sigmoid(-t)
        if v == 1:
            return -math.log1p(math.exp(-t)) if t > -30 else t
        return -math.log1p(math.exp(t)) if t < 30 else -t

    def grad(self, v, phi):
        return np.array([v - _sigmoid(float(phi[0]))])


class PoissonFamily:
    tag = "poisson"
    dim = 1

    def init(self):
        return np.zeros(1)

    def sample(self, phi, rng):
        return int(rng.poisson(math.exp(float(phi[0]))))

    def logq(self, v, phi):
        e = float(phi[0])
        return v * e - math.exp(e) - math.lgamma(v + 1)

    def grad(self, v, phi):
        return np.array([v - math.exp(float(phi[0]))])


class CategoricalFamily:
    tag = "categorical"

    def __init__(self, k, offset=0):
        self.dim = k
        self.offset = offset

    def init(self):
        return np.zeros(self.dim)

    def sample(self, phi, rng):
        return self.offset + rng.categorical(_softmax([float(x) for x in phi]))

    def logq(self, v, phi):
        i = v - self.offset
        if not 0 <= i < self.dim:
            return NEG_INF
        w = [float(x) for x in phi]
        m = max(w)
        return w[i] - m - math.log(math.fsum(math.exp(x - m) for x in w))

    def grad(self, v, phi):
        g = -np.array(_softmax([float(x) for x in phi]))
        g[v - self.offset] += 1.0
        return g


class DirichletFamily:
    tag = "dirichlet"

    def __init__(self, k):
        self.dim = k

    def init(self):
        return np.zeros(self.dim)

    def sample(self, phi, rng):
        g = [rng.gamma(math.exp(float(e))) for e in phi]
        s = math.fsum(g)
        return tuple(x / s for x in g)

    def logq(self, v, phi):
        if any(not x > 0 for x in v):
            return NEG_INF
        a = np.exp(phi)
        out = math.lgamma(float(a.sum()))
        for ai, x in zip(a, v):
            out += (ai - 1.0) * math.log(x) - math.lgamma(ai)
        return float(out)

    def grad(self, v, phi):
        a = np.exp(phi)
        return a * (digamma(a.sum()) - digamma(a) + np.log(np.asarray(v)))


def family_for(dist, args):
    """Variational family for a sample statement with distribution ``dist``."""
    tag = dist.family
    if tag == "normal":
        return NormalFamily()
    if tag == "lognormal":
        return LogNormalFamily()
    if tag == "logitnormal":
        if dist.name == "Uniform":
            return LogitNormalFamily(args[0], args[1])
        return LogitNormalFamily(0.0, 1.0)
    if tag == "bernoulli":
        return BernoulliFamily()
    if tag == "poisson":
        return PoissonFamily()
    if tag == "categorical":
        return CategoricalFamily(len(args[0]))
    if tag == "discrete":
        return CategoricalFamily(args[1] - args[0] + 1, offset=args[0])
    if tag == "dirichlet":
        return DirichletFamily(len(args[0]))
    raise IncompatibleModel("no variational family for %s" % dist.name)


def signature(fam):
    """What must stay fixed for an address across executions."""
    extra = ()
    if isinstance(fam, LogitNormalFamily):
        extra = (fam.a, fam.b)
    elif isinstance(fam, CategoricalFamily):
        extra = (fam.offset,)
    return (fam.tag, fam.dim) + extra
