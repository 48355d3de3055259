"""Trace inequalities for dyadic measures on the unit cube.

Prints the best trace constant C, the sampled capacity constant c2 and the
dyadic sum c5 for Lebesgue measure, a point mass and a random measure, at
increasing depth.  For Lebesgue measure c5 = (4/3)(1 - 4^-(D+1)); for a unit
point mass c5 = 2^(D+1) - 1 and C grows like 2^(D/2).
"""

import numpy as np

from accretiv import trace

if __name__ == "__main__":
    rng = np.random.default_rng(3)
    for D in (2, 3, 4):
        side = 2 ** D
        measures = {
            "lebesgue": trace.DyadicMeasure.lebesgue(D),
            "point": trace.DyadicMeasure.point(D, (0.3, 0.6, 0.45)),
            "random": trace.DyadicMeasure((0.0,) * 3, (1.0,) * 3, D,
                                          rng.exponential(size=(side,) * 3) / side ** 3),
        }
        for name, mu in measures.items():
            rep = trace.trace_report(mu, conditions=("c", "c2", "c5"))
            print(f"D = {D} {name:>9}: C^2 = {rep.c ** 2:9.4g}  c2 = {rep.c2:9.4g}  c5 = {rep.c5:9.4g}")
        print()
