"""
Newton's method for the square root of two
==========================================

Iterating ``x -> (x + 2/x) / 2`` until ``x*x`` is close to 2 converges to
``sqrt(2)`` from any positive start. The result barely depends on the start
point, so the derivative of the whole loop is close to zero even though
every single step has a nonzero derivative.
"""

import numpy as np

from chad.chad_transform import transform_program
from chad.deriv_check import check_program, SamplerConfig
from chad.library import entry
from chad.target_interp import linearize

program = entry("newton_sqrt2").program()
target = transform_program(program)

for x0 in [0.5, 1.0, 2.0, 10.0, -3.0]:
    primal, pullback = linearize(target, [np.array([x0])])
    g = pullback(np.array([1.0])).value[0]
    print(f"start {x0:5}: x = {primal.value[0]:.15f}, dx/dx0 = {g:.3e}")

# the check harness compares against finite differences at random starts
report = check_program(program, n_samples=50, sampler=SamplerConfig(low=0.25, high=3.0))
print(report.summary())
