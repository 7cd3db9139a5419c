"""Three nodes, one photon: the heralded three-qubit phase gate."""

import numpy as np

from dfsnet import network as nw
from dfsnet import protocols as pr

rng = np.random.default_rng(1)
beta = rng.normal(size=8) + 1j * rng.normal(size=8)
beta /= np.linalg.norm(beta)

g = nw.build_ring_network(3)
sched = nw.compile_schedule(g, [0, 1, 2])
state = nw.inject_photon(pr.logical_register(3, [0, 1, 2], beta), g, 0, pr.DIAGONAL_PHOTON)
r = nw.propagate(state, g, sched)
print("ticks until every amplitude rests on a detector:", r.ticks)
print("P(Dh) =", round(r.detector_probability("Dh"), 12), " P(Dv) =", round(r.detector_probability("Dv"), 12))

# The raw branch amplitudes, read back on the logical basis |000> .. |111>
index = [pr.logical_atom_string(3, [(m >> 2) & 1, (m >> 1) & 1, m & 1]) for m in range(8)]
(dh,) = r.detector_amplitudes["Dh"].values()
(dv,) = r.detector_amplitudes["Dv"].values()
print("\n m   sqrt2*Dh / beta   sqrt2*Dv / beta")
for m in range(8):
    print(f"{m:03b}   {np.sqrt(2) * dh[index[m]] / beta[m]:+.3f}     {np.sqrt(2) * dv[index[m]] / beta[m]:+.3f}")
# Dh copies the register; Dv carries an overall minus sign and flips |111>.

# Skipping the middle node gives a two-qubit gate between nodes 0 and 2.
skip = nw.compile_schedule(g, [0, 2])
maps = pr.conditioned_maps(g, skip)
print("\nDv map on nodes (0, 2):", np.round(np.sqrt(2) * np.diag(maps["Dv"]).real, 6))
