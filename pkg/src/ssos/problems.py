"""The simple quadratic test problem and its closed-form solution.

f(x, w) = (x - w)^2 + (w x)^2 is convex in x for every w, with minimizer
x*(w) = w / (1 + w^2) and minimum c*(w) = w^4 / (1 + w^2).  Under
w ~ Uniform(-1, 1) the optimal S-SOS value is E[c*] = pi/4 - 2/3.
"""
from __future__ import annotations

import math

import numpy as np

from .poly import Polynomial

P_STAR = math.pi / 4 - 2.0 / 3.0


def simple_quadratic() -> Polynomial:
    (x,), (w,) = Polynomial.variables(1, 1)
    return (x - w) ** 2 + (w * x) ** 2


def c_star(omega):
    w = np.asarray(omega, dtype=float)
    return w**4 / (1 + w**2)


def x_star(omega):
    w = np.asarray(omega, dtype=float)
    return w / (1 + w**2)
