"""Empirical regret of the two online learners against brute-force comparators.

Mixture weights: exponentiated gradient over two fixed Gaussian experts,
compared with the best fixed convex combination on a 0.01 grid.

Threshold: projected gradient steps with a 1/k schedule, compared with the
best fixed threshold on a 10^4-point grid.
"""
from idtdetect.evaluation import eg_regret_probe, ogd_regret_probe

eg = eg_regret_probe()
print(f"EG : loss {eg['eg_loss']:.2f} vs best fixed {eg['best_fixed_loss']:.2f} "
      f"(alpha={eg['best_alpha']:.2f}); regret {eg['regret']:.2f} <= {eg['bound']:.2f}")

ogd = ogd_regret_probe()
print(f"OGD: loss {ogd['ogd_loss']:.2f} vs best fixed {ogd['best_fixed_loss']:.2f} "
      f"(tau={ogd['best_tau']:.3f}); regret {ogd['regret']:.2f} <= {ogd['bound']:.2f}")
