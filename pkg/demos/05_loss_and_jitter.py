"""Photon loss only costs success rate; path phase jitter costs fidelity."""

from dfsnet import network as nw
from dfsnet import noise as nz

cp3 = nz.GateScenario(3, (0, 1, 2))
g = cp3.graph()
(ticks,) = nw.arrival_ticks(g, nw.compile_schedule(g, [0, 1, 2]), "Dv")
print("route length to Dv:", ticks, "ticks")

print("\nloss per tick   P(Dv)      0.5*(1-p)^T   F")
for row in nz.sweep(cp3, nz.NoiseParams(), "loss_per_element", [0, 0.001, 0.01, 0.05], trials=1):
    p = row["value"]
    print(f"{p:<14}  {row['success_prob']:.6f}   {0.5 * (1 - p) ** ticks:.6f}      {row['fidelity_mean']:.12f}")

# Two center paths carry amplitude at once after a jittered run, so use the
# multiport combiner that lets them interfere.
balanced = nz.GateScenario(3, (0, 1, 2), combiner="balanced")
print("\njitter sigma   F (mean +- stderr)")
for row in nz.sweep(balanced, nz.NoiseParams(), "path_jitter_sigma", [0, 0.05, 0.1, 0.2, 0.4], trials=4000, seed=5):
    print(f"{row['value']:<13}  {row['fidelity_mean']:.4f} +- {row['fidelity_stderr']:.4f}")

print("\nscattering phase error   F")
for eps in (-0.2, -0.1, 0.0, 0.1, 0.2):
    f = nz.monte_carlo_fidelity(balanced, nz.NoiseParams(scattering_phase_error=eps), 1).fidelity_mean
    print(f"{eps:+.2f}                    {f:.5f}")
