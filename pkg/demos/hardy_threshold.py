"""Critical Hardy coupling on a truncated interval.

For -h'' - kappa h / x^2 on (delta, 1) with Dirichlet ends the critical
coupling is 1/4 + (pi / ln(1/delta))^2, which reaches the Hardy constant 1/4
only as delta -> 0.  The script compares the discrete critical kappa with
that value and runs the Riccati certificates on both sides of 1/4.
"""

from accretiv import one_dim as od

if __name__ == "__main__":
    print(f"{'delta':>8} {'N':>6} {'discrete':>9} {'closed form':>12}")
    for delta, N in ((1e-1, 1000), (1e-2, 2000), (1e-3, 4000), (1e-4, 8000)):
        base = od.hardy_coefficients(0.0, delta, N)
        kc = od.critical_coupling(base, 1 / base.grid.axis_nodes(0) ** 2)
        print(f"{delta:8.0e} {N:6d} {kc:9.4f} {od.hardy_threshold_closed_form(delta):12.4f}")

    delta = 1e-3
    grid = od.hardy_coefficients(0.0, delta).grid
    for kappa in (0.249, 0.3, 0.5):
        shot = od.riccati_shoot(lambda x: kappa / x ** 2, 1.0, -1 / (2 * delta), grid=grid)
        where = "" if shot.survived else f" (blow-up at x = {shot.blowup_at:.3g})"
        print(f"shooting from f = -1/(2 delta), kappa = {kappa}: survived = {shot.survived}{where}")

    cert = od.riccati_from_groundstate(od.hardy_coefficients(0.2, delta))
    print(f"ground-state certificate at kappa = 0.2: passed = {cert.passed}, "
          f"min margin = {cert.min_margin:.4f} (= discrete lambda_min)")
