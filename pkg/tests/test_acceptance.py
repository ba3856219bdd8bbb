"""One test per acceptance criterion; each prints a PASS/FAIL line with its measurements.

The lines are also collected into the terminal summary under "acceptance criteria".
"""
import numpy as np
import pytest
from scipy.optimize import brentq

import starplanet.minimizer.scf as scf
from starplanet.diagnostics import (
    component_shift_test, component_threshold, exponent_fit, g_functions, local_min_probe,
    separation_ratio, support_stats, symmetry_check, two_blob_system, uniform_gap,
)
from starplanet.eos import PolytropicEos
from starplanet.field import GridDensity, inertia_expansion, moments, potential_bound, potential_values
from starplanet.lane_emden import (
    e0_of_mass, lambda_of_mass, profile_from_central_density, rescale, solve_lane_emden, solve_unit,
)
from starplanet.minimizer import SolverConfig, ep_residual, el_residual, minimize

from conftest import ACCEPTANCE, solve

MASSES = [0.05, 0.1, 0.2, 0.5, 1.0]


def report(number, title, passed, **measured):
    detail = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in measured.items())
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
    ACCEPTANCE.append(line)
    print(line)
    assert passed, line


def test_criterion_01_analytic_polytrope(unit2, single2):
    radius_err = abs(unit2.radius / np.sqrt(np.pi / 2) - 1)
    xi = np.linspace(1e-6, np.pi, 2001)
    theta_err = float(np.max(np.abs(solve_lane_emden(1.0).theta(xi) - np.sin(xi) / xi)))
    rho = single2.system.patches[0].rho
    _, c, _ = moments(rho)
    x, y, z = rho.coords()
    r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    k = np.sqrt(2 * np.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(r < np.pi / k, np.sin(k * r) / (2 * np.pi * np.where(r > 0, r, 1.0)), 0.0)
    l1 = float(np.abs(rho.values - exact).sum() * rho.h**3)
    report(1, "gamma=2 analytic polytrope", single2.converged and radius_err <= 1e-4 and theta_err <= 1e-8
           and l1 <= 0.02 and rho.dims == (48, 48, 48),
           radius_rel_err=radius_err, theta_err=theta_err, grid_L1=l1, grid=str(rho.dims))


def test_criterion_02_scaling_law():
    slopes = {}
    for gamma in (1.8, 2.0, 2.5):
        unit = solve_unit(PolytropicEos(1.0, gamma))
        fit = exponent_fit([(m, -e0_of_mass(unit, m)) for m in MASSES])
        slopes[gamma] = fit.slope - (5 * gamma - 6) / (3 * gamma - 4)
    worst = max(abs(v) for v in slopes.values())
    report(2, "energy scaling exponent", worst <= 1e-3, worst_slope_err=worst)


def test_criterion_03_multiplier_formula():
    worst = 0.0
    for gamma in (1.8, 2.0, 2.5):
        eos = PolytropicEos(1.0, gamma)
        unit = solve_unit(eos)
        le = unit.solution

        def e0_shoot(m):
            # independent route: root-find the central density that gives mass m
            f = lambda lc: np.log(profile_from_central_density(eos, np.exp(lc), le).mass / m)
            return profile_from_central_density(eos, np.exp(brentq(f, -40, 40, xtol=1e-15, rtol=1e-15)), le).e0

        for m in MASSES:
            closed = lambda_of_mass(unit, m)
            surface = -m / rescale(unit, m).radius
            step = 1e-4 * m
            fd = (e0_shoot(m + step) - e0_shoot(m - step)) / (2 * step)
            for a, b in ((closed, surface), (closed, fd), (surface, fd)):
                worst = max(worst, abs(a / b - 1))
    report(3, "multiplier closed form vs surface vs derivative", worst <= 1e-3, worst_pairwise_rel=worst)


def test_criterion_04_inertia_expansion(rng):
    worst = 0.0
    for _ in range(100):
        h = rng.uniform(0.05, 0.5)
        a_vals = rng.random(tuple(rng.integers(2, 8, 3))) ** rng.uniform(0.5, 3)
        b_vals = rng.random(tuple(rng.integers(2, 8, 3))) ** rng.uniform(0.5, 3)
        origin = rng.normal(size=3)
        shift = np.array([a_vals.shape[0] + rng.integers(0, 6), rng.integers(-4, 5), rng.integers(-4, 5)])
        a = GridDensity(a_vals, h, origin)
        b = GridDensity(b_vals, h, origin + h * shift)
        # direct route: both pieces on one lattice
        lo = np.minimum(0, shift)
        hi = np.maximum(a_vals.shape, shift + b_vals.shape)
        whole = np.zeros(tuple(hi - lo))
        sa, sb = -lo, shift - lo
        whole[sa[0]:sa[0] + a_vals.shape[0], sa[1]:sa[1] + a_vals.shape[1], sa[2]:sa[2] + a_vals.shape[2]] += a_vals
        whole[sb[0]:sb[0] + b_vals.shape[0], sb[1]:sb[1] + b_vals.shape[1], sb[2]:sb[2] + b_vals.shape[2]] += b_vals
        g = GridDensity(whole, h, origin + h * lo)
        x, y, _ = g.coords()
        w = whole * h**3
        xb, yb = np.sum(w * x) / w.sum(), np.sum(w * y) / w.sum()
        direct = float(np.sum(w * ((x - xb) ** 2 + (y - yb) ** 2)))
        worst = max(worst, abs(inertia_expansion(a, b) / direct - 1))
    report(4, "inertia expansion identity", worst <= 1e-10, pairs=100, worst_rel=worst)


def test_criterion_05_potential_bound(rng, monkeypatch):
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(3, 20))
        vals = rng.random((n, n, n)) ** rng.uniform(0.2, 6)
        if i % 3 == 0:
            vals *= rng.random((n, n, n)) < 0.2
        if i % 3 == 1:
            ax = np.arange(n) - (n - 1) / 2
            vals = vals * ((ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2) <= (n / 3) ** 2)
        if not vals.max() > 0:
            vals[0, 0, 0] = 1.0
        h = rng.uniform(0.01, 2)
        worst = max(worst, potential_values(vals, h).max() / potential_bound(vals, h))
    # the standing assertion on solver iterates: record every check it performs
    checked = []
    original = scf._check_potential_bound

    def spy(sys, state):
        original(sys, state)
        checked.append(1)

    monkeypatch.setattr(scf, "_check_potential_bound", spy)
    res = minimize(SolverConfig(J=0.5, m=0.2, cells_per_radius=8))
    report(5, "potential sup-norm bound", worst <= 1.0 and len(checked) >= res.iterations,
           random_densities=100, worst_ratio=worst, iterate_checks=len(checked))


def test_criterion_06_residuals():
    rows = {}
    ok = True
    for m in (0.1, 0.2):
        fine = solve(J=0.5, m=m, gamma=2.0)
        coarse = solve(J=0.5, m=m, gamma=2.0, cells_per_radius=8)
        el = el_residual(fine)
        el_ok = all(r <= 10 * fine.config.tol_fixedpoint * abs(lam) for r, lam in zip(el, fine.multipliers))
        ep_fine, ep_coarse = ep_residual(fine), ep_residual(coarse)
        dims = {p.rho.dims for p in fine.system.patches}
        ok &= fine.converged and coarse.converged and el_ok and ep_fine <= 0.1 and ep_coarse / ep_fine >= 1.7
        ok &= dims == {(48, 48, 48)}
        rows[m] = (max(r / abs(lam) for r, lam in zip(el, fine.multipliers)), ep_fine, ep_coarse / ep_fine)
    report(6, "Euler-Lagrange and Euler-Poisson residuals", ok,
           **{f"m{m}_el_over_lam": v[0] for m, v in rows.items()},
           **{f"m{m}_ep": v[1] for m, v in rows.items()},
           **{f"m{m}_ep_ratio": v[2] for m, v in rows.items()})


def test_criterion_07_kepler(sweep2, sweep25, rot2_m02, rot2_m01):
    ratios = [separation_ratio(r) for r in [*sweep2.values(), *sweep25.values(), rot2_m01, rot2_m02]
              if r.converged and r.config.m <= 0.2]
    gaps = [uniform_gap(eps, 1.2533, 0.5) for eps in (1e-2, 1e-3, 1e-4)]
    g0 = g_functions(1.0, 0.0, 0.0, 0.5)[1]
    ok = len(ratios) >= 6 and all(0.9 < x < 1.1 for x in ratios) and g0 == 0.0 and gaps[0] > gaps[1] > gaps[2]
    report(7, "Kepler separation window", ok, points=len(ratios), min_ratio=min(ratios),
           max_ratio=max(ratios), g0_at_1=g0, uniform_gaps=" ".join(f"{g:.3g}" for g in gaps))


def test_criterion_08_rate_laws(sweep25):
    gamma = 2.5
    eos = PolytropicEos(1.0, gamma)
    ms = sorted(sweep25)
    assert all(sweep25[m].converged for m in ms)
    planets = {m: support_stats(sweep25[m].patch("planet").rho) for m in ms}
    stars = {m: support_stats(sweep25[m].patch("star").rho) for m in ms}
    expected = 2 / (3 * gamma - 4)
    slope = exponent_fit([(m, planets[m].linf) for m in ms]).slope
    scaled_r = [planets[m].radius / eos.scaling_coeffs(m)[1] for m in ms]
    star_linf = [stars[m].linf for m in ms]
    radius_spread = max(scaled_r) / min(scaled_r)
    star_var = (max(star_linf) - min(star_linf)) / max(star_linf)
    ok = abs(slope / expected - 1) <= 0.15 and radius_spread <= 1.5 and star_var < 0.2
    report(8, "small-m rate laws at gamma=2.5", ok, linf_slope=slope, expected=expected,
           radius_over_B_spread=radius_spread, star_linf_variation=star_var)


def test_criterion_09_component_shift(unit2):
    m, J, eos = 0.05, 0.5, PolytropicEos(1.0, 2.0)
    dstar = component_threshold(m, J, 2.0, unit2.radius)
    wide, _ = two_blob_system(m, J, eos, 4 * dstar, unit2)
    rec = component_shift_test(wide, 1e-3, J, eos, radius_bound=unit2.radius)
    narrow, info = two_blob_system(m, J, eos, 0.1 * dstar, unit2)
    rec_n = component_shift_test(narrow, 1e-3, J, eos, plane=info["plane"], radius_bound=unit2.radius)
    # the narrow case has no guaranteed sign; it is recorded only
    ok = rec is not None and rec.delta_E > 0 and rec.gap > dstar and rec_n is not None
    report(9, "two-component approach move", ok, threshold=dstar, wide_gap=rec.gap, wide_dE=rec.delta_E,
           narrow_gap=rec_n.gap, narrow_dE_logged=rec_n.delta_E)


def test_criterion_10_local_probe(rot2_m02):
    rep = local_min_probe(rot2_m02, trials=200, radius_frac=0.1, seed=0)
    bound = -1e-4 * abs(rep.energy)
    report(10, "local-minimality probe", len(rep.deltas) == 200 and rep.worst >= bound,
           trials=len(rep.deltas), worst_dE=rep.worst, allowed=bound, rejections=rep.rejections)


def test_criterion_11_symmetry(single2, rot2_m01, rot2_m02, sweep25):
    runs = [single2, rot2_m01, rot2_m02, *sweep25.values()]
    checks = [symmetry_check(r) for r in runs]
    dev = max(c["mirror_deviation"] for c in checks)
    mono = max(c["monotonicity_violation"] for c in checks)
    ok = all(r.converged for r in runs) and dev <= 1e-6 and mono <= 1e-9
    report(11, "mirror symmetry about z=0", ok, runs=len(runs), mirror_deviation=dev,
           monotonicity_violation=mono)
