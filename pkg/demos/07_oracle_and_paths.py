"""Cross-check the tick engine against the brute-force walker, and the path-length padding."""

import time

from dfsnet import network as nw
from dfsnet import oracle as orc
from dfsnet import protocols as pr
from dfsnet.cli import oracle_cases

t0 = time.perf_counter()
worst = 0.0
graphs = {}
cases = oracle_cases(4)
for n, subset, entry in cases:
    g = graphs.setdefault(n, nw.build_ring_network(n))
    sched = nw.compile_schedule(g, nw.ring_order(n, entry, subset), entry)
    lm = orc.enumerate_logical_map(g, sched)
    engine = pr.conditioned_maps(g, sched)
    for outcome in ("Dv", "Dh"):
        worst = max(worst, orc.assert_equal_up_to_global_phase(engine[outcome], lm.matrix(outcome)))
print(f"{len(cases)} schedules up to four nodes, worst deviation {worst:.1e}, {time.perf_counter() - t0:.2f} s")

g = nw.build_ring_network(3)
sched = nw.compile_schedule(g, [0, 1, 2])
print("\ncenter pads:", {k: v for k, v in sched.settings.items() if k.startswith("PAD")})
print("unequal routes:", nw.validate_equal_arrival(g, sched) or "none")
longer = g.with_edge_length("PADc1", "out", g.edge("PADc1", "out").length + 1)
print("after lengthening path 1:", nw.validate_equal_arrival(longer, sched)[:3])
