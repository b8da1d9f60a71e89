"""Bundled benchmark models.

``manifest.json`` lists every model with its source file, data generator,
default size, truncation parameter (the size parameter that SMC steps
through), single-occurrence flag and BBVI compatibility flag.  The data
generators live in ``data.py``.
"""

import json
from importlib import resources

from ..model import Model
from ..rng import Stream
from . import data as _generators


def manifest():
    text = resources.files(__package__).joinpath("manifest.json").read_text()
    return json.loads(text)


def names():
    return sorted(manifest())


def source(name):
    entry = _entry(name)
    return resources.files(__package__).joinpath("models", entry["source"]).read_text()


def _entry(name):
    m = manifest()
    if name not in m:
        raise KeyError("unknown corpus model %r (known: %s)" % (name, ", ".join(sorted(m))))
    return m[name]


def generate(name, size=None, seed=0):
    """``(params, data)`` for a corpus model."""
    entry = _entry(name)
    if size is None:
        size = entry["size"]
    cap = entry.get("max_size")
    if cap is not None and size is not None and size > cap:
        raise ValueError("%s supports at most %d data points" % (name, cap))
    gen = getattr(_generators, entry["generator"])
    return gen(size, Stream.keyed("data", name, seed))


def load(name, size=None, seed=0):
    """Corpus model with freshly generated data."""
    entry = _entry(name)
    params, data = generate(name, size, seed)
    return Model(source(name), params, data, name=name, truncate=entry["truncate"],
                 single_occurrence=entry["single_occurrence"], bbvi=entry["bbvi"])
