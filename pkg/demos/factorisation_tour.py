"""Walk through the static pipeline on the hurricane model.

Parses the program, prints its control-flow graph, the factor set of every
sample statement and the slice that an LMH proposal at ``P0`` would run.

    python3 demos/factorisation_tour.py
"""

from artifact import corpus
from artifact.slicer import listing


def main():
    m = corpus.load("hurricane")
    print(m.source)
    print("control-flow graph: %d nodes" % len(m.cfg.nodes))
    for src, dst, label in m.cfg.edges():
        print("  %2d -> %2d %s" % (src, dst, label or ""))
    print("\nfactor sets (one per sample statement):")
    a = m.analysis
    for k in sorted(a.factors):
        print("  line %-2d %-3s %s" % (m.cfg.nodes[k].line, a.node_label(k),
                                       sorted(a.address_set(k))))
    k = min(k for k in a.factors if a.node_label(k) == "P0")
    print("\nslice run when the first P0 statement is resampled:")
    print(listing(m.cfg, m.slices.factor(k)))


if __name__ == "__main__":
    main()
