"""Seeded synthetic data for the corpus models.

A generator takes ``(size, stream)`` and returns ``(params, data)``:
``params`` are bound in the initial state, ``data`` maps observed
addresses to values.  The stream is ``Stream.keyed("data", name, seed)``,
so the data depend only on the model name, size and seed.
"""


def none(size, rng):
    return {}, {}


def allocation(size, rng):
    data = {}
    for i in range(size):
        m = -2.0 if rng.random() < 0.5 else 2.0
        data["x%d" % i] = rng.gauss(m, 1.0)
    return {"N": size}, data


def mixture(size, rng):
    centres = (-4.0, 0.0, 4.0)
    data = {"x%d" % i: rng.gauss(centres[rng.randrange(3)], 1.0) for i in range(size)}
    return {"N": size}, data


def hmm(size, rng):
    z = rng.randrange(2)
    data = {}
    for t in range(1, size + 1):
        if rng.random() < 0.1:
            z = 1 - z
        data["x%d" % t] = rng.gauss(-1.0 if z == 0 else 1.0, 1.0)
    return {"N": size}, data


def lda(size, rng, n_topics=3, vocab=10, doc_len=20):
    n_docs = -(-size // doc_len)
    lens = tuple(float(min(doc_len, size - d * doc_len)) for d in range(n_docs))
    # each topic favours a block of words
    topics = []
    for k in range(n_topics):
        w = [5.0 if (v * n_topics) // vocab == k else 1.0 for v in range(vocab)]
        s = sum(w)
        topics.append([x / s for x in w])
    data = {}
    i = 0
    for d in range(n_docs):
        g = [rng.gamma(1.0) for _ in range(n_topics)]
        theta = [x / sum(g) for x in g]
        for _ in range(int(lens[d])):
            z = rng.categorical(theta)
            data["w%d" % i] = rng.categorical(topics[z])
            i += 1
    params = {"N": size, "D": n_docs, "lens": lens,
              "alpha": (1.0,) * n_topics, "beta": (1.0,) * vocab}
    return params, data


def regression(size, rng):
    xs = tuple(rng.uniform(-5.0, 5.0) for _ in range(size))
    data = {"y%d" % i: 2.0 * x - 1.0 + rng.gauss(0.0, 1.0) for i, x in enumerate(xs)}
    return {"N": size, "xs": xs}, data


def urn(size, rng):
    n_balls = 6
    colours = [rng.randrange(2) for _ in range(n_balls)]
    data = {}
    for i in range(size):
        c = colours[rng.randrange(n_balls)]
        flip = rng.random() < 0.2
        data["obs%d" % i] = 1 - c if flip else c
    return {"N": size}, data


def pedestrian(size, rng):
    return {}, {"obs": 1.1}


def marsaglia(size, rng):
    return {"N": size}, {"y%d" % j: rng.gauss(0.7, 1.0) for j in range(size)}
