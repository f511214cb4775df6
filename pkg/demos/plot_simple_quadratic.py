"""
Convergence on the simple quadratic
===================================

f(x, w) = (x - w)^2 + (w x)^2 with w ~ Uniform(-1, 1). The tightest lower
bound is c*(w) = w^4 / (1 + w^2) and its mean is pi/4 - 2/3. Each level of
the hierarchy gives a lower estimate p*_2s, and the gap closes as s grows.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ssos import P_STAR, NoiseDistribution, c_star, simple_quadratic
from ssos import assemble_primal, extract_lower_bound, lasserre_basis, solve
from ssos.extract import convergence_csv, convergence_study

f = simple_quadratic()
dist = NoiseDistribution.uniform(1)
print(f.to_text())

# primal and dual at s = 2..5; the dual column confirms strong duality
rows = convergence_study(f, dist, [2, 3, 4, 5], p_star=P_STAR)
print(convergence_csv(rows))
for r in rows:
    print(f"s={r.s}  primal {r.p_star_2s:.9f}  dual {r.d_star_2s:.9f}")

# the extracted polynomial c_2s(w) sits under c*(w) everywhere
w = np.linspace(-1, 1, 401)
fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
ax0.plot(w, c_star(w), "k", lw=2, label="c*(w)")
for s in (2, 3, 5):
    basis = lasserre_basis(1, 1, s)
    prob = assemble_primal(f, basis, 2 * s, dist)
    c = extract_lower_bound(solve(prob), prob)
    ax0.plot(w, c(w), "--", label=f"s={s}")
    print(f"s={s}: max c_2s - c* = {np.max(c(w) - c_star(w)):.2e}")
ax0.set_xlabel("w")
ax0.legend()

ax1.semilogy([r.s for r in rows], [r.gap for r in rows], "o-")
ax1.set_xlabel("s")
ax1.set_ylabel("p* - p*_2s")
fig.tight_layout()
fig.savefig("simple_quadratic.png", dpi=120)
