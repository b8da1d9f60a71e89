"""Distribution registry.

Log-densities are written out in closed form with ``math`` because they
sit on the hot path of every execution; scipy's ``logpdf`` has far too
much per-call overhead for scalar use.  The test-suite checks each one
against ``scipy.stats``.

Parameter conventions follow the scale parametrisation used by Julia's
Distributions package, which is what the benchmark models were written
against:

=================  ==================  =========================
name               parameters          support
=================  ==================  =========================
Normal             mu, sigma           real
Uniform            a, b                real in [a, b]
Bernoulli          p                   Int 0 / 1
Poisson            lambda              Int >= 0
Gamma              shape, scale        real > 0
InverseGamma       shape, scale        real > 0
Beta               a, b                real in [0, 1]
Exponential        scale               real >= 0
Categorical        probability vector  Int in [0, K)
Dirichlet          concentration vec   simplex vector
DiscreteUniform    a, b                Int in [a, b]
=================  ==================  =========================

Invalid parameters give density zero (``-inf``) and sampling returns
``None``.  A ``None`` sample becomes a Null trace entry, so the
execution is Undefined.  Categorical normalises its weight vector.
"""

import math

NEG_INF = float("-inf")
_LOG_2PI = math.log(2.0 * math.pi)
_SIMPLEX_TOL = 1e-9


def _num(x):
    t = type(x)
    return t is float or t is int


class Distribution:
    name = None
    arity = None
    # variational family used by BBVI, see inference.families
    family = None

    def logpdf(self, x, args):
        raise NotImplementedError

    def sample(self, rng, args):
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Normal(Distribution):
    name = "Normal"
    arity = 2
    family = "normal"

    def logpdf(self, x, args):
        mu, sigma = args
        if not (_num(x) and _num(mu) and _num(sigma)) or not sigma > 0:
            return NEG_INF
        z = (x - mu) / sigma
        return -0.5 * z * z - math.log(sigma) - 0.5 * _LOG_2PI

    def sample(self, rng, args):
        mu, sigma = args
        if not (_num(mu) and _num(sigma)) or not sigma > 0:
            return None
        return float(rng.gauss(mu, sigma))


class Uniform(Distribution):
    name = "Uniform"
    arity = 2
    family = "logitnormal"

    def logpdf(self, x, args):
        a, b = args
        if not (_num(x) and _num(a) and _num(b)) or not a < b:
            return NEG_INF
        if a <= x <= b:
            return -math.log(b - a)
        return NEG_INF

    def sample(self, rng, args):
        a, b = args
        if not (_num(a) and _num(b)) or not a < b:
            return None
        return float(rng.uniform(a, b))


class Bernoulli(Distribution):
    name = "Bernoulli"
    arity = 1
    family = "bernoulli"

    def logpdf(self, x, args):
        (p,) = args
        if not _num(p) or not 0.0 <= p <= 1.0 or type(x) is not int:
            return NEG_INF
        if x == 1:
            return math.log(p) if p > 0 else NEG_INF
        if x == 0:
            return math.log1p(-p) if p < 1 else NEG_INF
        return NEG_INF

    def sample(self, rng, args):
        (p,) = args
        if not _num(p) or not 0.0 <= p <= 1.0:
            return None
        return 1 if rng.random() < p else 0


class Poisson(Distribution):
    name = "Poisson"
    arity = 1
    family = "poisson"

    def logpdf(self, x, args):
        (lam,) = args
        if not _num(lam) or lam < 0 or type(x) is not int or x < 0:
            return NEG_INF
        if lam == 0:
            return 0.0 if x == 0 else NEG_INF
        return x * math.log(lam) - lam - math.lgamma(x + 1)

    def sample(self, rng, args):
        (lam,) = args
        if not _num(lam) or lam < 0:
            return None
        return int(rng.poisson(lam))


class Gamma(Distribution):
    name = "Gamma"
    arity = 2
    family = "lognormal"

    def logpdf(self, x, args):
        k, theta = args
        if not (_num(x) and _num(k) and _num(theta)) or not (k > 0 and theta > 0) or not x > 0:
            return NEG_INF
        return (k - 1) * math.log(x) - x / theta - math.lgamma(k) - k * math.log(theta)

    def sample(self, rng, args):
        k, theta = args
        if not (_num(k) and _num(theta)) or not (k > 0 and theta > 0):
            return None
        return float(rng.gamma(k) * theta)


class InverseGamma(Distribution):
    name = "InverseGamma"
    arity = 2
    family = "lognormal"

    def logpdf(self, x, args):
        a, theta = args
        if not (_num(x) and _num(a) and _num(theta)) or not (a > 0 and theta > 0) or not x > 0:
            return NEG_INF
        return a * math.log(theta) - math.lgamma(a) - (a + 1) * math.log(x) - theta / x

    def sample(self, rng, args):
        a, theta = args
        if not (_num(a) and _num(theta)) or not (a > 0 and theta > 0):
            return None
        g = rng.gamma(a)
        while g == 0.0:
            g = rng.gamma(a)
        return float(theta / g)


class Beta(Distribution):
    name = "Beta"
    arity = 2
    family = "logitnormal"

    def logpdf(self, x, args):
        a, b = args
        if not (_num(x) and _num(a) and _num(b)) or not (a > 0 and b > 0) or not 0.0 <= x <= 1.0:
            return NEG_INF
        lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        if x == 0.0 or x == 1.0:
            edge_shape = a if x == 0.0 else b
            if edge_shape == 1:
                return -lbeta
            return float("inf") if edge_shape < 1 else NEG_INF
        return (a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - lbeta

    def sample(self, rng, args):
        a, b = args
        if not (_num(a) and _num(b)) or not (a > 0 and b > 0):
            return None
        x = rng.gamma(a)
        y = rng.gamma(b)
        if x + y == 0.0:
            return 0.5
        return float(x / (x + y))


class Exponential(Distribution):
    name = "Exponential"
    arity = 1
    family = "lognormal"

    def logpdf(self, x, args):
        (theta,) = args
        if not (_num(x) and _num(theta)) or not theta > 0 or x < 0:
            return NEG_INF
        return -math.log(theta) - x / theta

    def sample(self, rng, args):
        (theta,) = args
        if not _num(theta) or not theta > 0:
            return None
        return float(rng.exponential() * theta)


def _weights(p):
    if type(p) is not tuple or not p:
        return None
    total = 0.0
    for w in p:
        if not w >= 0:
            return None
        total += w
    if not total > 0 or not math.isfinite(total):
        return None
    return total


class Categorical(Distribution):
    name = "Categorical"
    arity = 1
    family = "categorical"

    def logpdf(self, x, args):
        (p,) = args
        total = _weights(p)
        if total is None or type(x) is not int or not 0 <= x < len(p):
            return NEG_INF
        w = p[x]
        if w == 0:
            return NEG_INF
        return math.log(w) - math.log(total)

    def sample(self, rng, args):
        (p,) = args
        if _weights(p) is None:
            return None
        return rng.categorical(p)


class Dirichlet(Distribution):
    name = "Dirichlet"
    arity = 1
    family = "dirichlet"

    def logpdf(self, x, args):
        (alpha,) = args
        if type(alpha) is not tuple or not alpha or not all(a > 0 for a in alpha):
            return NEG_INF
        if type(x) is not tuple or len(x) != len(alpha):
            return NEG_INF
        if any(not v > 0 for v in x) or abs(math.fsum(x) - 1.0) > _SIMPLEX_TOL:
            return NEG_INF
        out = math.lgamma(math.fsum(alpha))
        for a, v in zip(alpha, x):
            out += (a - 1) * math.log(v) - math.lgamma(a)
        return out

    def sample(self, rng, args):
        (alpha,) = args
        if type(alpha) is not tuple or not alpha or not all(a > 0 for a in alpha):
            return None
        gs = [rng.gamma(a) for a in alpha]
        # floor keeps every coordinate strictly positive
        gs = [max(g, 1e-300) for g in gs]
        s = math.fsum(gs)
        return tuple(g / s for g in gs)


class DiscreteUniform(Distribution):
    name = "DiscreteUniform"
    arity = 2
    family = "discrete"

    def logpdf(self, x, args):
        a, b = args
        if type(a) is not int or type(b) is not int or a > b or type(x) is not int:
            return NEG_INF
        if a <= x <= b:
            return -math.log(b - a + 1)
        return NEG_INF

    def sample(self, rng, args):
        a, b = args
        if type(a) is not int or type(b) is not int or a > b:
            return None
        return a + rng.randrange(b - a + 1)


REGISTRY = {d.name: d() for d in (Normal, Uniform, Bernoulli, Poisson, Gamma, InverseGamma,
                                  Beta, Exponential, Categorical, Dirichlet, DiscreteUniform)}

ALIASES = {"Norm": "Normal", "Bern": "Bernoulli"}


def resolve(name):
    """Canonical distribution name for ``name`` or ``None``."""
    name = ALIASES.get(name, name)
    return name if name in REGISTRY else None


def get(name):
    return REGISTRY[ALIASES.get(name, name)]
