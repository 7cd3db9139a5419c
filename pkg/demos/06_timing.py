"""Gate durations for the default cavity and the dark-count penalty."""

from dfsnet.timing import TimingParams, dark_count_penalty, default_detection_window, timing_table, validate_regime

t = TimingParams()
for name, seconds in timing_table(t).items():
    print(f"{name:9s} {seconds * 1e6:6.2f} us")
print("regime warnings:", validate_regime(t) or "none")

window = default_detection_window(t)
print(f"\ndetection window {window * 1e6:.3f} us, dark-count penalty at 100 Hz: {dark_count_penalty(100, window):.3e}")

# A short pulse or weak coupling falls outside the model.
print(validate_regime(TimingParams(kappa_T=1)))
print(validate_regime(TimingParams(g_over_2pi=5e6)))
