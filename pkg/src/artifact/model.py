"""A program bundled with its parameters, observed data and derived artefacts.

``params`` are bound in the initial state (constants, covariates, sizes).
``data`` maps observed addresses to values: inference engines clamp these
addresses and never propose them.
"""

from .analysis import Analysis
from .cfg import Code, build
from .cfg import density as cfg_density
from .cfg import execute as cfg_execute
from .lang import parse
from .semantics import DEFAULT_BUDGET, initial_state, sample_forward
from .slicer import Slices


class Model:
    def __init__(self, source, params=None, data=None, name="model", truncate=None,
                 single_occurrence=True, bbvi=True, smc=None, budget=DEFAULT_BUDGET):
        self.name = name
        self.source = source
        self.program = parse(source) if isinstance(source, str) else source
        self.params = dict(params or {})
        self.data = dict(data or {})
        self.truncate = truncate  # parameter giving the number of observations
        self.single_occurrence = single_occurrence
        self.bbvi = bbvi
        self.smc = truncate is not None if smc is None else smc
        self.budget = budget
        self.cfg = build(self.program)
        self.code = Code(self.cfg)
        self.analysis = Analysis(self.cfg)
        self.slices = Slices(self.analysis, self.code)
        self.cache = {}  # per-model derived data owned by inference engines

    def initial_state(self, **overrides):
        p = dict(self.params)
        p.update(overrides)
        return initial_state(self.program, p)

    def trace(self, latent):
        """Full trace: observed data plus ``latent``."""
        t = dict(self.data)
        t.update(latent)
        return t

    def density(self, trace):
        return cfg_density(self.code, trace, self.initial_state(), self.budget)

    def execute(self, trace, log=None):
        return cfg_execute(self.code, trace, self.initial_state(), self.budget, log=log)

    def forward(self, seed, **overrides):
        """Forward sample with data clamped: ``(trace, log_density)`` or ``Undefined``."""
        return sample_forward(self.program, seed, self.initial_state(**overrides), self.data,
                              self.budget)

    def latent_keys(self, trace):
        return {a for a, v in trace.items() if v is not None and a not in self.data}

    def __repr__(self):
        return "Model(%r)" % self.name
