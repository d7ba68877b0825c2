"""
Differentiating a while loop
============================

The halving program keeps multiplying its input by 0.5 until the value
drops to 1 or below. Its derivative is 0.5 raised to the number of steps,
which the transformed program recovers by folding over the loop's trace.
"""

import numpy as np

from chad.chad_transform import transform_program
from chad.library import entry
from chad.source_interp import eval_iterate, eval_program, jacobian_fd, program_function
from chad.source_lang import pretty_program
from chad.target_interp import linearize

program = entry("halving").program()
print(pretty_program(program))

# the source interpreter runs the loop directly
y = np.array([8.3])
print("halving(8.3) =", eval_program(program, [y]).value)

# the loop state visits 8.3, 4.15, 2.075, 1.0375 and exits at 0.51875
_, trace = eval_iterate({}, "y", program.body.body, y)
print("states:", [float(s[0]) for s in trace.states])

# transform once, then evaluate the primal and pull back a cotangent
target = transform_program(program)
primal, pullback = linearize(target, [y])
grad = pullback(np.array([1.0])).value
print("primal:", primal.value, " gradient:", grad, " = 0.5**4:", 0.5 ** 4)

# finite differences agree away from the branch boundaries at powers of two
print("finite differences:", jacobian_fd(program_function(program), y)[0, 0])

# the gradient is a step function of the input
for x in [1.5, 3.0, 5.0, 9.0, 17.0, 33.0]:
    _, pb = linearize(target, [np.array([x])])
    print(f"  d halving / dy at {x:5}: {pb(np.array([1.0])).value[0]}")
