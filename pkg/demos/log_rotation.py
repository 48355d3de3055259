"""Accretivity of the log-rotation operator as the rotation strength grows.

A = I + i*lam*log|x| J, b = -x|x|^2, c = -2|x|^2 on [-1, 1]^2.  The real
triple is (I, btilde, 0) with btilde = (-d2 g, d1 g), g = (lam/2) log|x|, so
accretivity is decided by theta(lam) = ||btilde||_commutator <= 1.  The
script prints the sweep and compares the crossing with 1/J and 2/J, where
J is the Jacobian constant of log|x|.
"""

import numpy as np

from accretiv import accretivity as ac, catalog, coefficients as co, hodge, schrodinger as sc
from accretiv.grid import GridSpec


def sweep(points, lams):
    grid = GridSpec.box([2.0, 2.0], points)
    rows = []
    for lam in lams:
        red = co.reduce(catalog.log_rotation(lam, grid))
        fm = sc.assemble_triple(red)
        theta = ac.commutator_norm(red.btilde, fm).theta if lam > 0 else 0.0
        rows.append((lam, theta, ac.triple_lambda_min(red)))
    J = hodge.jacobian_constant(catalog.log_window(grid), grid).value
    return rows, J


if __name__ == "__main__":
    lams = np.linspace(0.0, 3.0, 7)
    for points in (32, 64):
        rows, J = sweep(points, lams)
        print(f"{points}^2 grid, J = {J:.4f}")
        print(f"{'lambda':>8} {'theta':>8} {'lambda_min':>11} {'verdict':>14}")
        for lam, theta, lmin in rows:
            verdict = "accretive" if theta <= 1 else "not-accretive"
            print(f"{lam:8.3f} {theta:8.4f} {lmin:11.4g} {verdict:>14}")
        slope = np.mean([t / l for l, t, _ in rows if l > 0])
        print(f"theta = 1 at lambda = {1 / slope:.4f};  1/J = {1 / J:.4f},  2/J = {2 / J:.4f}\n")
