"""Toffoli from Hadamard, heralded three-qubit phase gate, Hadamard; repeated until Dv clicks."""

from collections import Counter

import numpy as np

from dfsnet import network as nw
from dfsnet import protocols as pr

g = nw.build_ring_network(3)
rng = np.random.default_rng(3)

print("input -> most likely output (after success)")
for m in range(8):
    bits = [(m >> 2) & 1, (m >> 1) & 1, m & 1]
    out = pr.toffoli(pr.logical_basis_state(3, bits), g, (0, 1), 2, rng=rng)
    amps = pr.logical_amplitudes(out.post_state, [0, 1, 2])
    print(f"  {m:03b} -> {int(np.argmax(np.abs(amps))):03b}   attempts {out.attempts_used}")

# Each attempt succeeds with probability 1/2, so attempts are geometric.
attempts = Counter(pr.toffoli(pr.logical_basis_state(3, [1, 1, 0]), g, (0, 1), 2, rng=rng).attempts_used
                   for _ in range(2000))
print("\nattempt histogram:", dict(sorted(attempts.items())))
print("mean attempts:", sum(k * v for k, v in attempts.items()) / 2000)
