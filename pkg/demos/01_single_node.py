"""One photon, one node: how the pair encoding steers the photon."""

import numpy as np

from dfsnet import network as nw
from dfsnet import protocols as pr

# Logical zero is |10> (atom 1 up), logical one is |01>.
g = nw.build_ring_network(1)
sched = nw.compile_schedule(g, [0])
print("switch settings:", {k: getattr(v, "value", v) for k, v in sched.settings.items()})

# Probe the photon right after the cavity round trip, after the HWP45 and
# after the HWP22.5 on the way out of the node.
for bit in (0, 1):
    idx = pr.logical_atom_string(1, [bit])
    state = nw.inject_photon(pr.logical_basis_state(1, [bit]), g, 0, pr.DIAGONAL_PHOTON)
    r = nw.propagate(state, g, sched, probes=("C0", "HWP45_0", "HWPout0"))
    print(f"\nlogical {bit}")
    for eid, port in (("C0", "3"), ("HWP45_0", "out"), ("HWPout0", "out")):
        h = r.probes[eid].get((port, "H"), np.zeros(4))[idx]
        v = r.probes[eid].get((port, "V"), np.zeros(4))[idx]
        print(f"  after {eid:8s} h={h.real:+.4f}  v={v.real:+.4f}")

# Zero leaves as V and is sent to the center; one leaves as H and moves on.
