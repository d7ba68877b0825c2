"""
Loops that read their context
=============================

The accumulate program sums ``y * c`` while stepping ``y`` by
``sigmoid(c)``. The loop body reads ``c`` from outside the loop, so the
transformation first widens the loop state with the captured variable and
then differentiates the widened loop. Both partial derivatives come out of a
single reverse pass.
"""

import numpy as np

from chad.chad_transform import transform_program
from chad.library import entry
from chad.source_interp import jacobian_fd, program_function
from chad.source_lang import pretty_program
from chad.target_interp import linearize

program = entry("accumulate").program()
print(pretty_program(program))

target = transform_program(program)
f = program_function(program)

rng = np.random.default_rng(0)
print(f"{'x':>7} {'c':>7} {'d/dx':>12} {'fd d/dx':>12} {'d/dc':>12} {'fd d/dc':>12}")
for _ in range(6):
    x, c = rng.uniform(-2, 2), rng.uniform(0.1, 2)
    _, pullback = linearize(target, [np.array([x]), np.array([c])])
    gx, gc = pullback(np.array([1.0])).value
    try:
        fd = jacobian_fd(f, [x, c])[0]
        fdx, fdc = f"{fd[0]:12.6f}", f"{fd[1]:12.6f}"
    except Exception as e:  # a probe crossed the loop exit condition
        fdx = fdc = f"{type(e).__name__:>12}"
    print(f"{x:7.3f} {c:7.3f} {gx[0]:12.6f} {fdx} {gc[0]:12.6f} {fdc}")
