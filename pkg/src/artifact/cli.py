"""Command-line front end.

Subcommands: ``parse``, ``cfg``, ``analyze``, ``slice`` work on ``.ppl``
files; ``run`` and ``bench`` work on corpus models (by name, or a ``.ppl``
path with optional ``--params``/``--data`` JSON files).

``run`` writes one JSON object per line: per-step records, then a final
``{"summary": ...}`` record.  Records contain no timings, so a repeated
invocation with the same seed produces byte-identical output.  ``bench``
measures wall-clock time and writes one JSON document.

The default seed comes from ``$ARTIFACT_SEED`` (0 if unset).  Exit codes:
0 success, 1 model error (parse, analysis or inference failure), 2 usage
error.
"""

import argparse
import json
import math
import os
import re
import statistics
import sys
import time
import warnings
from pathlib import Path

from . import corpus
from .analysis import Analysis, GraphExportError
from .cfg import build, to_dot
from .inference import bbvi, smc
from .inference.families import IncompatibleModel
from .inference.lmh import make_lmh
from .lang import ParseError, parse, pretty
from .model import Model
from .semantics import Undefined
from .slicer import executable_slice, listing, slice_dot, slice_for_smc

SEED_ENV = "ARTIFACT_SEED"
ALIASES = {"gmm": "gmm_fixed", "lda": "lda_fixed"}
LMH_SUITE = ["gmm_fixed", "gmm_variable", "lda_fixed", "hmm", "hmm_unrolled", "urn",
             "dirichlet_process", "linear_regression", "marsaglia", "hurricane", "geometric",
             "pedestrian"]
SMC_SUITE = ["gmm_fixed", "hmm", "lda_fixed", "hmm_unrolled", "gmm_variable",
             "dirichlet_process", "urn", "linear_regression", "marsaglia"]


class ModelError(Exception):
    """Reported with exit status 1."""


# -- helpers ------------------------------------------------------------------

def _default_seed():
    v = os.environ.get(SEED_ENV)
    if v is None or v == "":
        return 0
    try:
        return int(v)
    except ValueError:
        raise ModelError("%s must be an integer, got %r" % (SEED_ENV, v))


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ModelError("cannot read %s: %s" % (path, e.strerror))


def _program(path):
    return parse(_read(path))


def _write(out, text):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json_file(path):
    if path is None:
        return {}
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise ModelError("%s: invalid JSON (%s)" % (path, e))
    # JSON lists stand for vectors
    return {k: tuple(float(x) for x in v) if isinstance(v, list) else v for k, v in doc.items()}


def resolve_model(ref, size=None, seed=0, params=None, data=None, truncate=None):
    """Corpus model by name (``gmm``, ``gmm_fixed.ppl``) or a ``.ppl`` file path."""
    p = Path(ref)
    if p.suffix == ".ppl" and p.is_file():
        name = p.stem
        entry = corpus.manifest().get(ALIASES.get(name, name))
        if entry is not None and params is None and data is None:
            # a copy of a corpus program: use its generator and flags
            prm, dat = corpus.generate(ALIASES.get(name, name), size, seed)
            return Model(_read(p), prm, dat, name=name, truncate=entry["truncate"],
                         single_occurrence=entry["single_occurrence"], bbvi=entry["bbvi"])
        return Model(_read(p), _json_file(params), _json_file(data), name=name,
                     truncate=truncate)
    name = p.stem if p.suffix == ".ppl" else ref
    name = ALIASES.get(name, name)
    if name not in corpus.manifest():
        raise ModelError("no such model or file: %s" % ref)
    return corpus.load(name, size, seed)


def _pattern(addr):
    return re.sub(r"\d+", "#", addr) if isinstance(addr, str) else repr(addr)


class _Moments:
    """Running means of scalar values per address pattern."""

    def __init__(self):
        self.sum = {}
        self.n = {}

    def add(self, latent):
        for a, v in latent.items():
            if type(v) in (int, float, bool):
                k = _pattern(a)
                self.sum[k] = self.sum.get(k, 0.0) + float(v)
                self.n[k] = self.n.get(k, 0) + 1

    def report(self):
        return {k: {"mean": self.sum[k] / self.n[k], "count": self.n[k]} for k in sorted(self.sum)}


def _dump(rec):
    return json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n"


def _value(v):
    return list(v) if type(v) is tuple else v


# -- parse / cfg / analyze / slice -----------------------------------------------

def cmd_parse(args):
    prog = _program(args.path)
    _write(args.output, repr(prog) + "\n" if args.ast else pretty(prog))
    return 0


def cmd_cfg(args):
    cfg = build(_program(args.path))
    if args.dot:
        text = to_dot(cfg, Path(args.path).stem or "cfg")
    else:
        out = {n.id: [] for n in cfg.nodes}
        for src, dst, lab in cfg.edges():
            out[src].append("%d%s" % (dst, "" if lab is None else " [%s]" % lab))
        lines = ["%3d  %-40s -> %s" % (n.id, n.label(), ", ".join(out[n.id])) for n in cfg.nodes]
        text = "\n".join(lines) + "\n"
    _write(args.output, text)
    return 0


def cmd_analyze(args):
    a = Analysis(build(_program(args.path)))
    if args.bayes_dot:
        try:
            Path(args.bayes_dot).write_text(a.bayes_dot())
        except GraphExportError as e:
            raise ModelError("cannot export a Bayesian network: %s" % e)
    if args.markov_dot:
        Path(args.markov_dot).write_text(a.markov_dot())
    if args.json:
        _write(args.output, a.report_json())
        return 0
    lines = []
    for f in a.report()["factors"]:
        lines.append("%-12s {%s}" % (f["address"], ", ".join(f["factor"])))
    _write(args.output, "\n".join(lines) + "\n")
    return 0


def _find_node(a, at):
    for k in a.cfg.sample_nodes():
        if a.constant_address(k) == at:
            return k
    try:
        k = int(at)
    except ValueError:
        raise ModelError("no sample statement with address %r" % at)
    if k not in a.cfg.sample_nodes():
        raise ModelError("node %d is not a sample statement" % k)
    return k


def cmd_slice(args):
    a = Analysis(build(_program(args.path)))
    ks = a.cfg.sample_nodes() if args.at is None else [_find_node(a, args.at)]
    parts = []
    for k in ks:
        sl = slice_for_smc(a.cfg, k) if args.smc else executable_slice(a, k)
        if args.dot:
            parts.append(slice_dot(a.cfg, sl, "slice_%d" % k))
        else:
            parts.append("# slice at %s\n%s" % (a.node_label(k), listing(a.cfg, sl)))
    _write(args.output, "\n".join(parts))
    return 0


# -- run ----------------------------------------------------------------------

def _run_lmh(model, args, out, factored):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        eng = make_lmh(model, args.seed, factored=factored)
    for w in caught:
        print("warning: %s" % w.message, file=sys.stderr)
    moments = _Moments()
    samples = open(args.samples, "w") if args.samples else None
    accepted = 0
    try:
        for _ in range(args.iterations):
            st = eng.step()
            accepted += st.accepted
            out.write(_dump({"step": st.step, "address": st.address, "accepted": st.accepted,
                             "prob": st.prob, "logp": st.logp, "undefined": st.undefined}))
            moments.add(eng.latent)
            if samples is not None and args.thin and st.step % args.thin == 0:
                samples.write(_dump({"step": st.step, "trace": {a: _value(v) for a, v in
                                                               eng.latent.items()}}))
    finally:
        if samples is not None:
            samples.close()
    n = max(args.iterations, 1)
    return {"algorithm": "lmh-fast" if eng.factored else "lmh", "iterations": args.iterations,
            "acceptance_rate": accepted / n, "posterior_means": moments.report()}


def _run_bbvi(model, args, out, variant):
    if not model.bbvi:
        raise ModelError("%s has stochastic support: the set or type of its latent addresses "
                         "changes between runs, so no fixed mean-field guide exists" % model.name)
    res = bbvi.optimize(model, variant, steps=args.iterations, samples=args.samples_per_step,
                        lr=args.lr, seed=args.seed, track_variance=True)
    for r in res.records:
        out.write(_dump(r))
    guide = {a: {"family": res.params.fams[a].tag, "phi": [float(x) for x in p]}
             for a, p in sorted(res.params.phi.items(), key=lambda kv: str(kv[0]))}
    return {"algorithm": "bbvi-rb" if variant == bbvi.RAO else "bbvi",
            "iterations": args.iterations, "guide": guide}


def _run_smc(model, args, out, iterative):
    if model.truncate is None:
        raise ModelError("%s has no data schedule (no truncation parameter)" % model.name)
    fn = smc.smc_iterative if iterative else smc.smc_naive
    res = fn(model, args.particles, args.seed)
    for s in res.steps:
        out.write(_dump({"t": s.t, "weights": s.increments, "ancestors": s.ancestors,
                         "log_evidence": s.log_evidence, "ess": s.ess}))
    moments = _Moments()
    for p in res.particles:
        moments.add(p)
    return {"algorithm": "smc-iter" if iterative else "smc", "particles": args.particles,
            "steps": len(res.steps), "log_evidence": res.log_evidence,
            "posterior_means": moments.report()}


def cmd_run(args):
    model = resolve_model(args.model, args.size, args.data_seed, args.params, args.data,
                          args.truncate)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w")
    try:
        alg = args.algorithm
        if alg in ("lmh", "lmh-fast"):
            summary = _run_lmh(model, args, out, alg == "lmh-fast")
        elif alg in ("bbvi", "bbvi-rb"):
            summary = _run_bbvi(model, args, out, bbvi.RAO if alg == "bbvi-rb" else bbvi.STANDARD)
        else:
            summary = _run_smc(model, args, out, alg == "smc-iter")
        summary.update(model=model.name, seed=args.seed)
        out.write(_dump({"summary": summary}))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# -- bench --------------------------------------------------------------------

def _timed_steps(eng, n, warmup):
    for _ in range(warmup):
        eng.step()
    ts = []
    probs = []
    for _ in range(n):
        t0 = time.perf_counter_ns()
        st = eng.step()
        ts.append(time.perf_counter_ns() - t0)
        probs.append(st.prob)
    return ts, probs


def bench_lmh(name, args, seed):
    model = corpus.load(name, args.size, seed)
    cells = {}
    probs = {}
    latents = {}
    for factored in (False, True):
        eng = make_lmh(model, seed, factored=factored)
        ts, ps = _timed_steps(eng, args.iterations, args.warmup)
        cells["lmh-fast" if factored else "lmh"] = {
            "mean_us": statistics.fmean(ts) / 1e3, "median_us": statistics.median(ts) / 1e3}
        probs[factored] = ps
        latents[factored] = eng.latent
    match = latents[True] == latents[False] and all(
        abs(a - b) <= 1e-12 for a, b in zip(probs[True], probs[False]))
    acc = statistics.fmean(min(1.0, p) for p in probs[False]) if probs[False] else 0.0
    return {"runtime": cells, "speedup": cells["lmh"]["mean_us"] / cells["lmh-fast"]["mean_us"],
            "exact_match": match, "mean_acceptance_prob": acc}


def bench_bbvi(name, args, seed):
    model = corpus.load(name, args.size, seed)
    t0 = time.perf_counter()
    r = bbvi.variance_report(model, n=args.estimates, seed=seed)
    r["seconds"] = time.perf_counter() - t0
    return r


def bench_smc(name, args, seed):
    model = corpus.load(name, args.size, seed)
    out = {}
    res = {}
    for it in (False, True):
        t0 = time.perf_counter()
        res[it] = (smc.smc_iterative if it else smc.smc_naive)(model, args.particles, seed)
        out["smc-iter_s" if it else "smc_s"] = time.perf_counter() - t0
    out["speedup"] = out["smc_s"] / out["smc-iter_s"]
    out["weights_equal"] = all(a.increments == b.increments and a.ancestors == b.ancestors
                               for a, b in zip(res[False].steps, res[True].steps))
    out["final_ess"] = res[True].steps[-1].ess if res[True].steps else None
    out["log_evidence"] = res[True].log_evidence
    return out


def cmd_bench(args):
    suite = args.suite
    if args.models:
        names = args.models
    elif suite == "lmh":
        names = LMH_SUITE
    elif suite == "smc":
        names = SMC_SUITE
    else:
        names = [n for n, e in sorted(corpus.manifest().items()) if e["bbvi"]]
    fn = {"lmh": bench_lmh, "bbvi": bench_bbvi, "smc": bench_smc}[suite]
    report = {"suite": suite, "seed": args.seed, "repetitions": args.repetitions, "models": {}}
    for name in names:
        name = ALIASES.get(name, name)
        reps = []
        for r in range(args.repetitions):
            try:
                reps.append(fn(name, args, args.seed + r))
            except Exception as e:  # recorded, the suite continues
                reps.append({"error": "%s: %s" % (type(e).__name__, e)})
        report["models"][name] = {"repetitions": reps, "mean": _mean_numeric(reps)}
        print("bench %s: %s done" % (suite, name), file=sys.stderr)
    _write(args.output, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def _mean_numeric(reps):
    """Mean of every numeric field (nested one level) over error-free repetitions."""
    ok = [r for r in reps if "error" not in r]
    if not ok:
        return None
    out = {}
    for k, v in ok[0].items():
        if isinstance(v, bool) or v is None:
            out[k] = all(r.get(k) for r in ok) if isinstance(v, bool) else None
        elif isinstance(v, (int, float)):
            xs = [r[k] for r in ok]
            out[k] = statistics.fmean(xs) if all(math.isfinite(x) for x in xs) else None
        elif isinstance(v, dict):
            out[k] = _mean_numeric([r[k] for r in ok])
    return out


# -- argument parsing ---------------------------------------------------------

def build_parser():
    seed = _default_seed()
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="parse a program and print its canonical form")
    sp.add_argument("path")
    sp.add_argument("--ast", action="store_true", help="print the syntax tree instead")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("cfg", help="control-flow graph as a table or DOT")
    sp.add_argument("path")
    sp.add_argument("--dot", action="store_true")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_cfg)

    sp = sub.add_parser("analyze", help="factor sets and graph exports")
    sp.add_argument("path")
    sp.add_argument("--json", action="store_true", help="full report as JSON")
    sp.add_argument("--bayes-dot", metavar="FILE")
    sp.add_argument("--markov-dot", metavar="FILE")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("slice", help="sliced sub-programs as listings or DOT")
    sp.add_argument("path")
    sp.add_argument("--at", help="address or node id (default: every sample statement)")
    sp.add_argument("--smc", action="store_true", help="slice to the next sample statement")
    sp.add_argument("--dot", action="store_true")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_slice)

    sp = sub.add_parser("run", help="run an inference algorithm, streaming JSON lines")
    sp.add_argument("model", help="corpus model name or .ppl file")
    sp.add_argument("algorithm", choices=["lmh", "lmh-fast", "bbvi", "bbvi-rb", "smc", "smc-iter"])
    sp.add_argument("-n", "--iterations", type=int, default=1000)
    sp.add_argument("-p", "--particles", type=int, default=100)
    sp.add_argument("--samples-per-step", type=int, default=10, help="BBVI traces per step")
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--size", type=int, help="number of data points")
    sp.add_argument("--data-seed", type=int, default=0)
    sp.add_argument("--params", metavar="JSON", help="parameters for a .ppl file")
    sp.add_argument("--data", metavar="JSON", help="observed addresses for a .ppl file")
    sp.add_argument("--truncate", help="size parameter that SMC steps through")
    sp.add_argument("--samples", metavar="FILE", help="LMH: write latent traces here")
    sp.add_argument("--thin", type=int, default=1, help="LMH: keep every k-th trace")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="timed baseline-versus-sliced comparisons")
    sp.add_argument("suite", choices=["lmh", "bbvi", "smc"])
    sp.add_argument("--models", nargs="+")
    sp.add_argument("-r", "--repetitions", type=int, default=1)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--size", type=int)
    sp.add_argument("-n", "--iterations", type=int, default=1000, help="LMH steps")
    sp.add_argument("--warmup", type=int, default=100, help="untimed LMH steps")
    sp.add_argument("--estimates", type=int, default=1000, help="BBVI traces per estimate")
    sp.add_argument("-p", "--particles", type=int, default=100)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None):
    try:
        parser = build_parser()
    except ModelError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.fn(args)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
    except (ModelError, Undefined, IncompatibleModel, bbvi.BBVIError, smc.DegenerateWeights,
            GraphExportError, KeyError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
    return 1
