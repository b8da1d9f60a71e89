import math

import pytest
from hypothesis import given, settings

from artifact import corpus
from artifact.analysis import analyze
from artifact.cfg import AT_END, EXITED, PAUSED, READ, SAMPLE, SCORE, VISIT, Code, build, run
from artifact.inference.contexts import SliceDensityCtx, SmcCtx
from artifact.lang import parse
from artifact.semantics import DENSITY, Undefined
from artifact.slicer import (Slices, entry_slice, executable_slice, listing, run_slice,
                             slice_dot, slice_for_factor, slice_for_smc, widened_slice)

import helpers
import programs


def roles(src, label):
    a = analyze(parse(src))
    k = [n for n in a.factors if a.node_label(n) == label or
         a.cfg.nodes[n].label().startswith(label)][0]
    sl = executable_slice(a, k)
    return a, sl, {a.cfg.nodes[n].label().split(" =")[0]: r for n, r in sl.roles.items()}


def test_chain_slice_at_B():
    _, sl, r = roles(programs.CHAIN, "B")
    assert r == {"B": VISIT, "C": READ, "D": SCORE}
    assert not sl.widened


def test_chain_slice_at_A_skips_nothing_downstream():
    _, _, r = roles(programs.CHAIN, "A")
    assert r == {"A": VISIT, "B": SCORE, "C": SCORE, "D": READ, "E": SCORE}


def test_allocation_slice_at_z():
    a, sl, r = roles(programs.ALLOCATION, "z =")
    assert r == {"z": VISIT, "x": SCORE}
    text = listing(a.cfg, sl)
    assert "while" not in text and "i = i + 1" not in text
    assert text.splitlines() == ['z = visit("z" + str(i), Bernoulli(0.5))',
                                 "m = z == 1 ? -2.0 : 2.0",
                                 'x = score("x" + str(i), Normal(m, 1.0))']


def test_coin_loop_slice_keeps_the_loop():
    a, sl, r = roles(programs.COIN_LOOP, "b =")
    assert r == {"b": VISIT}
    assert listing(a.cfg, sl).startswith("while b == 1 do")
    # later draws in the same loop are scored by the same node
    assert sl.exec_roles[sl.origin] == SCORE


def test_run_slice_density_example():
    a = analyze(parse(programs.CHAIN))
    code = Code(a.cfg)
    k = [n for n in a.factors if a.node_label(n) == "B"][0]
    sl = executable_slice(a, k)
    tr = {"A": 0.5, "B": 1.0, "C": -1.0, "D": 0.25, "E": 2.0}
    ck = {"A": 0.5, DENSITY: 0.0}
    ctx = SliceDensityCtx(tr)
    outcome, _, st = run_slice(code, sl, ck, ctx)
    want = (-0.5 * (1.0 - 0.5) ** 2 - 0.5 * (0.25 - 0.0) ** 2 - math.log(2 * math.pi))
    assert outcome == EXITED  # E is not in the slice
    assert ctx.logp == pytest.approx(want, abs=1e-12)
    assert ctx.terms == 2 and st["C"] == -1.0


def test_loop_carried_state_widens_the_slice():
    src = """
s = 0.0
i = 0
while i < 3 do
    z = sample("z" + str(i), Normal(0.0, 1.0))
    s = s + z
    i = i + 1
y = sample("y", Normal(s, 1.0))
"""
    a = analyze(parse(src))
    k = [n for n in a.factors if a.cfg.nodes[n].label().startswith("z")][0]
    assert a.loop_carried(k) == {"s"}
    assert executable_slice(a, k).widened
    narrow = slice_for_factor(a, k)
    wide = widened_slice(a, k)
    assert narrow.nodes <= wide.nodes and wide.widened and not narrow.widened


def test_smc_slices():
    cfg = build(parse(programs.CHAIN))
    e = entry_slice(cfg)
    assert e.terminals == {1} and not e.reaches_end
    assert slice_for_smc(cfg, 1).terminals == {2}
    last = slice_for_smc(cfg, 5)
    assert last.terminals == frozenset() and last.reaches_end
    cfg = build(parse(programs.COIN_LOOP))
    k = [n.id for n in cfg.nodes if n.kind == SAMPLE][0]
    sl = slice_for_smc(cfg, k)
    assert sl.terminals == {k} and sl.reaches_end


def test_dot_exports():
    a = analyze(parse(programs.CHAIN))
    dot = slice_dot(a.cfg, executable_slice(a, 2))
    assert "visit" in dot and "score" in dot and "read" in dot
    dot = slice_dot(a.cfg, slice_for_smc(a.cfg, 1))
    assert "pause" in dot


def _ratio_cases(name, n=6):
    m = helpers.small(name)
    for i, tr in enumerate(helpers.forward_traces(m, n)):
        _, rec = helpers.stepwise(m, tr)
        for addr in sorted(m.latent_keys(tr)):
            tr2 = helpers.redraw(m, tr, addr, (name, i))
            if tr2 is None or set(tr2) != set(tr):
                continue
            _, _, state, node = rec.calls[addr]
            yield m, tr, tr2, node, state


def _slice_logp(m, node, state, tr):
    ctx = SliceDensityCtx(tr)
    run_slice(m.code, m.slices.factor(node), state, ctx)
    return ctx.logp


RATIO_MODELS = ["chain", "hurricane", "branching", "branching_dynamic", "mixed_mean",
                "geometric", "coin_loop", "allocation", "hmm", "hmm_unrolled", "gmm_fixed",
                "lda_fixed", "linear_regression", "poisson_address"]


@pytest.mark.parametrize("name", RATIO_MODELS)
def test_slice_gives_the_density_ratio(name):
    """Changing one value: the slice computes the whole change in log density."""
    count = 0
    for m, tr, tr2, node, state in _ratio_cases(name):
        full = m.density(tr2) - m.density(tr)
        part = _slice_logp(m, node, state, tr2) - _slice_logp(m, node, state, tr)
        if math.isinf(full):
            assert math.isinf(part) and (full > 0) == (part > 0)
        else:
            assert part == pytest.approx(full, abs=1e-9), name
        count += 1
    assert count > 0


def _advance(m, st, node, ctx):
    while node != m.code.end and not ctx.observed:
        _, node = run(m.code, st, ctx, node, m.budget, pause=True)
    return node


@pytest.mark.parametrize("name", ["allocation", "hmm", "gmm_fixed", "lda_fixed", "urn",
                                  "marsaglia", "linear_regression"])
def test_smc_continuation_matches_a_full_run(name):
    """Advancing slice by slice produces the same latents and likelihood as one full run."""
    m = helpers.small(name)
    T = int(m.params[m.truncate])
    for seed in range(3):
        st = m.initial_state()
        _, node = run(m.code, st, None, 0, m.budget, pause=True)
        latent = {}
        steps = 0
        for t in range(1, T + 1):
            ctx = SmcCtx(latent, m.data, (seed, t))
            node = _advance(m, st, node, ctx)
            steps += ctx.observed
        assert node == m.code.end and steps == T
        full = SmcCtx(dict(latent), m.data, ("unused",))
        st2 = m.initial_state()
        run(m.code, st2, full, 0, m.budget)
        assert full.latent == latent
        assert st2[DENSITY] == pytest.approx(st[DENSITY], abs=1e-9)


@settings(max_examples=40)
@given(programs.stmt, programs.trace)
def test_smc_slices_cover_every_path(s, tr):
    """Pausing at every sample statement never changes the final state."""
    code = Code(build(s))
    st0 = {"u": 0, "v": 0, "w": 0, DENSITY: 0.0}
    ctx = helpers.Recorder(tr)
    a = dict(st0)
    try:
        run(code, a, ctx, 0, 200)
    except Undefined:
        return
    b = dict(st0)
    node = 0
    ctx2 = helpers.Recorder(tr)
    for _ in range(500):
        outcome, node = run(code, b, ctx2, node, 200, pause=True)
        if outcome == AT_END:
            break
        assert outcome == PAUSED
    assert all(helpers.same(a[k], b[k]) for k in a)


def test_slices_cache():
    m = helpers.small("chain")
    s = Slices(m.analysis)
    assert s.factor(2) is s.factor(2)
    assert s.smc(2) is s.smc(2)
