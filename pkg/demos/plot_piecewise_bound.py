"""
Piecewise-constant lower bound
==============================

Instead of one polynomial c(w), fix w on a grid and solve an ordinary SOS
problem at each point. The plateau values bound the pointwise minimum from
below and tighten as the degree grows.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ssos import c_star, piecewise_lower_bound, simple_quadratic

f = simple_quadratic()
bounds = {s: piecewise_lower_bound(f, (-1.0, 1.0), 11, s) for s in (2, 4)}
lb = bounds[4]
print(lb.to_csv(lb.grid))
print("max plateau - c*:", np.max(lb.values - c_star(lb.grid)))

w = np.linspace(-1, 1, 1001)
plt.plot(w, c_star(w), "k", label="c*(w)")
for s, b in bounds.items():
    plt.step(b.grid, b.values, where="post", label=f"pointwise SOS, s={s}")
plt.xlabel("w")
plt.legend()
plt.savefig("piecewise_bound.png", dpi=120)
