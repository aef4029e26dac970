"""Sweep the two default radio links over distance.

Shows the defining feature of the scenario: 5G NR is several times
faster than LTE near the base station, but its rate collapses toward the
edge of its 200 m coverage and LTE overtakes it around 150 m.  A 50 KB
frame's air time follows directly from the rate.
"""

import numpy as np

from ratsteer import EnvConfig, data_rate, path_loss, sinr

cfg = EnvConfig()
lte, nr = cfg.rats
frame_bits = cfg.frame_bytes * 8

print(f"{'d [m]':>6} {'LTE rate':>12} {'NR rate':>12} "
      f"{'LTE frame':>11} {'NR frame':>11}")
for d in [1, 10, 25, 50, 75, 100, 125, 150, 175, 200, 300, 500, 707]:
    rl = data_rate(lte, d)
    rn = data_rate(nr, d)
    tl = frame_bits / rl * 1e3
    tn = frame_bits / rn * 1e3 if rn else float("inf")
    print(f"{d:>6} {rl / 1e6:>9.1f} Mb/s {rn / 1e6:>9.1f} Mb/s "
          f"{tl:>8.2f} ms {tn:>8.2f} ms")

# locate the crossover numerically
ds = np.linspace(1.0, 200.0, 20000)
diff = np.array([data_rate(nr, d) - data_rate(lte, d) for d in ds])
cross = ds[np.argmax(diff < 0)]
print(f"\nNR falls below LTE at about {cross:.1f} m "
      f"(NR coverage ends at {nr.max_range_m:.0f} m)")

d = 120.0
print(f"\nat {d:.0f} m: path loss LTE {path_loss(lte, d):.3e}, "
      f"NR {path_loss(nr, d):.3e}; SINR LTE {sinr(lte, d):.1f}, NR {sinr(nr, d):.1f}")
