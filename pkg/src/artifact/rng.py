"""Keyed pseudo-random streams.

Inference engines that must agree bit-for-bit (baseline vs. factored
LMH, naive vs. iterative SMC) draw every random number from a stream
keyed by what the number is *for* (e.g. ``(seed, step, address)``)
rather than from one shared sequential generator.  Execution order then
no longer matters.

``Stream`` is a splitmix64 generator.  Constructing one costs a hash,
which is much cheaper than seeding a Mersenne twister.
"""

import hashlib
import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0


def key_int(*parts):
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little")


class Stream:
    __slots__ = ("_s", "_spare")

    def __init__(self, seed):
        self._s = seed & _MASK
        self._spare = None

    @classmethod
    def keyed(cls, *parts):
        return cls(key_int(*parts))

    def bits64(self):
        self._s = s = (self._s + _GOLDEN) & _MASK
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self):
        """Uniform on [0, 1)."""
        return (self.bits64() >> 11) * _INV53

    def uniform(self, a, b):
        return a + (b - a) * self.random()

    def randrange(self, n):
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError("empty range")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.bits64()
            if x < limit:
                return x % n

    def gauss(self, mu=0.0, sigma=1.0):
        # Marsaglia polar method, caching the second variate
        z = self._spare
        if z is not None:
            self._spare = None
            return mu + sigma * z
        while True:
            u = 2.0 * self.random() - 1.0
            v = 2.0 * self.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        f = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = v * f
        return mu + sigma * u * f

    def exponential(self):
        return -math.log(1.0 - self.random())

    def gamma(self, shape):
        """Gamma(shape, 1) by Marsaglia and Tsang."""
        if shape < 1.0:
            u = self.random()
            while u == 0.0:
                u = self.random()
            return self.gamma(shape + 1.0) * u ** (1.0 / shape)
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.gauss()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.random()
            if u < 1.0 - 0.0331 * x ** 4:
                return d * v
            if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
                return d * v

    def poisson(self, lam):
        if lam <= 0.0:
            return 0
        if lam < 30.0:
            # sequential inversion
            k = 0
            p = math.exp(-lam)
            c = p
            u = self.random()
            while u > c:
                k += 1
                p *= lam / k
                c += p
                if p == 0.0 and c < u:
                    break
            return k
        # transformed rejection (Hormann's PTRS)
        slam = math.sqrt(lam)
        loglam = math.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2)
        while True:
            u = self.random() - 0.5
            v = self.random()
            us = 0.5 - abs(u)
            k = int(math.floor((2 * a / us + b) * u + lam + 0.43))
            if us >= 0.07 and v <= vr:
                return k
            if k < 0 or (us < 0.013 and v > us):
                continue
            if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                    <= -lam + k * loglam - math.lgamma(k + 1)):
                return k

    def categorical(self, probs):
        total = math.fsum(probs)
        u = self.random() * total
        c = 0.0
        for i, p in enumerate(probs):
            c += p
            if u < c:
                return i
        # round-off: last index with positive mass
        for i in range(len(probs) - 1, -1, -1):
            if probs[i] > 0:
                return i
        return len(probs) - 1
