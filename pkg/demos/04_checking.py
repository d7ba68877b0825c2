"""
Checking the transformation
===========================

Two independent oracles back the transformation. Finite differences check
the derivative of every corpus program at random points. The law suites
check the equations of both languages on randomly generated terms. A
deliberately broken transformation shows that the checks have teeth.
"""

from chad.chad_transform import Transformer
from chad.deriv_check import check_program, run_property_suites
from chad.library import entry

for name in ["mul", "sigmoid_mul", "let_chain", "tuple_match", "halving", "accumulate"]:
    print(check_program(entry(name).program(), n_samples=50).summary())


class Shifted(Transformer):
    """Sends every variable's cotangent to its neighbour's slot."""

    def coproj(self, i, n, term):
        return super().coproj((i + 1) % n, n, term)


print()
print("with a broken coprojection:")
for name in ["mul", "tuple_match"]:
    rep = check_program(entry(name).program(), n_samples=20, transformer=Shifted)
    print(f"  {name}: {rep.verdict}, {len(rep.failures)} failing rows")

print()
suite = run_property_suites(seed=0, iterations=50)
for law in suite.laws:
    print(f"  {law.name:32} {law.instances:4} instances, {law.failures} failures")
