"""Nonnegativity certificates and the gauge transform on random operators.

For random complex coefficients on small grids the direct Hermitian test and
the real-triple test give the same verdict.  Whenever the Schroedinger form
is positive, a vector field g built from its ground state certifies it.  The
second half shows how the spectrum of the real triple moves under a gauge
u = z exp(-i lam) as the grid is refined.
"""

import numpy as np

from accretiv import accretivity as ac, coefficients as co, schrodinger as sc
from accretiv.catalog import random_coefficients
from accretiv.grid import GridSpec


def certificate_round(rng, count=20):
    for k in range(count):
        cs = random_coefficients(rng, GridSpec.box([1.0, 1.0], 8))
        direct, prop1 = ac.check(cs)
        line = f"#{k:2d} direct {direct.verdict:>13}  triple {prop1.verdict:>13}"
        fm = sc.assemble_triple(co.reduce(cs))
        me = sc.min_eig(fm)
        if me.value > me.tolerance:
            cert = sc.construct_g_certificate(fm)
            line += f"  form certificate passed = {cert.passed}, min margin {cert.min_margin:.4g}"
        print(line)


def gauge_gap(n, N, seed=0):
    rng = np.random.default_rng(seed)
    g = GridSpec.box([1.0] * n, N)
    x = g.coords()
    A = np.broadcast_to(np.eye(n), g.shape + (n, n)) * (1.5 + 0.3 * np.cos(np.pi * x[0]))[..., None, None]
    b = np.stack([(1 + 2j) * np.sin(np.pi * xi + rng.uniform()) for xi in x], axis=-1)
    c = 3 * np.cos(2 * np.pi * x[-1]) + 1j
    lam = np.cos(np.pi * x[0] + 0.3) * np.cos(np.pi * x[-1])
    red = co.reduce(co.CoefficientSet(g, A.astype(complex), b, c))
    return abs(ac.triple_lambda_min(red) - ac.triple_lambda_min(ac.gauge_transform(red, lam)))


if __name__ == "__main__":
    certificate_round(np.random.default_rng(1))
    print()
    for n, Ns in ((1, (64, 128, 256, 512)), (2, (16, 32, 64))):
        gaps = [gauge_gap(n, N) for N in Ns]
        ratios = [gaps[k] / gaps[k + 1] for k in range(len(gaps) - 1)]
        print(f"{n}-D gauge gap {['%.2e' % v for v in gaps]}, ratio per halving "
              f"{[round(r, 2) for r in ratios]}")
