import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starplanet.diagnostics import (
    EnergyDelta, boundary_margin, component_shift_test, component_threshold, draw_perturbation,
    energy_rate_check, expand_points, exponent_fit, fit_rates, g_functions, g_gate, inertia_rate_check,
    kepler_argmin, kepler_energy, l1_to_profile, lever_ok, local_min_probe, multiplier_bound_check,
    run_sweep, scaled_energy_gap, scaling_density, separation_ratio, support_stats, symmetry_check,
    two_blob_system, uniform_gap, velocity_check,
)
from starplanet.diagnostics.sweep import COLUMNS
from starplanet.eos import PolytropicEos
from starplanet.field import GridDensity, Patch, PatchSystem, energies
from starplanet.lane_emden import e0_of_mass, rescale, to_grid
from starplanet.minimizer import SolverConfig, make_domains, seed_density

from conftest import solve


# ---------------------------------------------------------------- Kepler and g


def test_kepler_examples():
    assert kepler_argmin(0.25, 1.0) == 16.0
    eta = kepler_argmin(0.16, 0.5)
    assert kepler_energy(eta, 0.16, 0.5) == pytest.approx(-0.16 / (2 * eta), rel=1e-14)
    d = np.linspace(0.2 * eta, 5 * eta, 20001)
    assert d[np.argmin(kepler_energy(d, 0.16, 0.5))] == pytest.approx(eta, rel=1e-3)
    assert kepler_argmin(0.25, 0.0) == np.inf
    with pytest.raises(ValueError):
        kepler_energy(0.0, 0.25, 1.0)


def test_g_examples():
    assert g_functions(1.0, 0.01, 1.0, 0.5)[1] == 0.0
    assert g_functions(0.5, 0.01, 1.0, 0.5)[1] == 0.5
    with pytest.raises(ValueError):
        g_functions(0.4, 0.01, 1.0, 0.5)
    gaps = [uniform_gap(eps, 1.2533, 0.5) for eps in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


@given(st.floats(0.5, 1e3))
def test_g0_nonnegative(z):
    g0 = g_functions(z, 0.0, 0.0, 1.0)[1]
    assert g0 == pytest.approx((z - 1) ** 2 / (2 * z * z), abs=1e-14)
    assert g0 >= -1e-15


def test_separation_ratio_constructions(unit2):
    dom = make_domains(0.5, 0.2)
    pts = []
    for label, mass, c in (("planet", 0.2, dom.center_planet), ("star", 0.8, dom.center_star)):
        g = GridDensity(np.full((1, 1, 1), mass / 0.1**3), 0.1, c)
        pts.append(Patch(g, label, mass))
    assert separation_ratio(PatchSystem(pts), dom.eta) == pytest.approx(1.0, rel=1e-14)
    sys = seed_density(dom, SolverConfig(J=0.5, m=0.2), unit2)
    assert separation_ratio(sys, dom.eta) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        separation_ratio(PatchSystem(pts[:1]), dom.eta)


def test_kepler_window_and_gate(sweep2, sweep25):
    for runs in (sweep2, sweep25):
        for res in runs.values():
            assert 0.9 < separation_ratio(res) < 1.1
            radius = support_stats(res.patch("planet").rho).radius
            x, eps, geps = g_gate(res, radius)
            assert geps <= 0.0
            for p in res.system.patches:
                assert boundary_margin(p.rho, p.ball_center, p.ball_radius) > 0


# ---------------------------------------------------------------- geometry


def ball_grid(radius, h, center, dims):
    g = GridDensity(np.zeros(dims), h, np.asarray(center, float) - 0.5 * h * (np.asarray(dims) - 1))
    x, y, z = g.coords()
    return g, x, y, z


def test_support_stats_lane_emden(unit2):
    h = unit2.radius / 12
    g = to_grid(unit2, np.zeros(3), h, (40, 40, 40))
    s = support_stats(g)
    assert unit2.radius - 2 * h <= s.radius <= unit2.radius + 2 * h
    assert s.component_count == 1 and s.max_gap == 0.0
    assert s.linf == g.values.max()


@pytest.mark.parametrize("gap", [0.5, 1.0, 1.7])
def test_support_stats_two_balls(gap):
    h, r = 0.05, 0.5
    g, x, y, z = ball_grid(r, h, np.zeros(3), (90, 30, 30))
    off = r + gap / 2
    values = ((x - off) ** 2 + y**2 + z**2 <= r * r) | ((x + off) ** 2 + y**2 + z**2 <= r * r)
    g.values = values.astype(float)
    s = support_stats(g)
    assert s.component_count == 2
    assert s.max_gap == pytest.approx(gap, abs=2 * h)
    with pytest.raises(ValueError):
        support_stats(g.with_values(np.zeros(g.dims)))


def test_scaling_density_examples(unit2, unit25, rot2_m02):
    rho = rot2_m02.patch("planet").rho
    eos = rot2_m02.config.eos
    same = scaling_density(rho, 1.0, eos)
    np.testing.assert_array_equal(same.values, rho.values)
    assert same.h == rho.h
    s = scaling_density(rho, 0.2, eos)
    assert s.h == rho.h
    np.testing.assert_allclose(s.values, rho.values / 0.2, rtol=1e-15)
    assert s.mass == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        scaling_density(rho, 0.0, eos)
    eos25 = PolytropicEos(1.0, 2.5)
    sig = to_grid(rescale(unit25, 0.1), np.ones(3), rescale(unit25, 0.1).radius / 12, (36, 36, 36))
    s25 = scaling_density(sig, 0.1, eos25)
    assert s25.mass == pytest.approx(1.0, abs=1e-10)
    assert l1_to_profile(s25, unit25) < 0.02


def test_scaling_densities_converge(sweep25, unit25):
    eos = PolytropicEos(1.0, 2.5)
    l1 = [l1_to_profile(scaling_density(sweep25[m].patch("planet").rho, m, eos), unit25)
          for m in (0.2, 0.1, 0.05)]
    assert l1[0] > l1[1] > l1[2]


def test_symmetry(unit2, rot2_m02):
    g = to_grid(unit2, np.zeros(3), unit2.radius / 10, (30, 30, 30))
    out = symmetry_check(g)
    assert out["mirror_deviation"] < 1e-15
    assert out["monotonicity_violation"] < 1e-12
    rng = np.random.default_rng(3)
    v = rng.random((6, 6, 8))
    mirrored = GridDensity(v + v[:, :, ::-1], 0.1, [0.0, 0.0, -0.35])
    assert symmetry_check(mirrored)["mirror_deviation"] == 0.0
    res = symmetry_check(rot2_m02)
    assert res["mirror_deviation"] <= 1e-6
    assert res["monotonicity_violation"] <= 1e-9


# ---------------------------------------------------------------- rates


def test_exponent_fit():
    ms = [0.05, 0.1, 0.2, 0.5]
    fit = exponent_fit([(m, 3.0 * m**1.5) for m in ms])
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    with pytest.raises(ValueError):
        exponent_fit([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        exponent_fit([(0.1, 1.0), (0.2, -2.0), (0.3, 1.0)])
    assert lever_ok([0.05, 0.1, 0.2]) and not lever_ok([0.1, 0.2, 0.3])


def test_exponent_fit_lane_emden(unit2):
    ms = [0.05, 0.1, 0.2, 0.5, 1.0]
    assert exponent_fit([(m, -e0_of_mass(unit2, m)) for m in ms]).slope == pytest.approx(2.0, abs=1e-3)


def test_fit_rates_synthetic():
    gamma = 2.5
    d = 3 * gamma - 4
    records = [{"J": 0.5, "m": m, "gamma": gamma, "converged": True,
                "linf_planet": 2 * m ** (2 / d), "radius_planet": m ** ((gamma - 2) / d),
                "E0_planet": -0.3 * m ** ((5 * gamma - 6) / d)} for m in (0.05, 0.1, 0.2)]
    fits = fit_rates(records)
    assert len(fits) == 3
    for f in fits:
        assert f["slope"] == pytest.approx(f["expected"], abs=1e-12)
    assert fit_rates(records[:2]) == []


def test_multiplier_bound(single2, unit2, sweep2):
    ok, margin = multiplier_bound_check(single2, unit2)
    assert ok
    assert margin == pytest.approx(0.1 * abs(unit2.lam), abs=0.01 * abs(unit2.lam))
    for res in sweep2.values():
        assert multiplier_bound_check(res, unit2)[0]


@pytest.mark.parametrize("gamma", [2.0, 2.5])
def test_energy_rate(gamma):
    # the unit grid minimum at the same cells per radius is the discrete e0
    ref = solve(J=0.0, gamma=gamma).breakdown.EJ
    gaps = {}
    for m in (0.05, 0.1, 0.2):
        res = solve(J=0.5, m=m, gamma=gamma)
        gaps[m] = scaled_energy_gap(res.patch("planet").rho, m, res.config.eos, ref)
        assert gaps[m] > -1e-12
    assert energy_rate_check(gaps, gamma)["holds"]


def test_energy_rate_check_logic():
    good = {0.05: 0.05**1.0, 0.1: 0.1**1.0, 0.2: 0.2**1.0}
    assert energy_rate_check(good, 2.0)["holds"]
    bad = {0.05: 1.0, 0.1: 0.1, 0.2: 0.2}
    assert not energy_rate_check(bad, 2.0)["holds"]


def test_inertia_velocity_checks(sweep2, sweep25):
    for res in [*sweep2.values(), *sweep25.values()]:
        assert inertia_rate_check(res)[0]
        assert velocity_check(res)[0]


# ---------------------------------------------------------------- component shift


def _shift_fixture(unit2, factor):
    m, J, eos = 0.05, 0.5, PolytropicEos(1.0, 2.0)
    dstar = component_threshold(m, J, 2.0, unit2.radius)
    sys, info = two_blob_system(m, J, eos, factor * dstar, unit2)
    return sys, info, dstar, eos


def test_threshold_value(unit2):
    p = (12 * 2.0 - 18) / (3 * 2.0 - 4)
    assert component_threshold(0.05, 0.5, 2.0, unit2.radius) == pytest.approx(
        32 * 0.95**5 * unit2.radius**3 * 0.05**p / 0.5**4, rel=1e-14)


def test_shift_wide_gap_lowers_energy(unit2):
    sys, info, dstar, eos = _shift_fixture(unit2, 4.0)
    rec = component_shift_test(sys, 1e-3, 0.5, eos, radius_bound=unit2.radius)
    assert rec is not None
    assert rec.gap == pytest.approx(4 * dstar, abs=2 * sys.patches[0].rho.h)
    assert rec.gap > rec.threshold
    assert rec.delta_E > 0
    assert rec.com_shift <= 1e-12
    assert rec.h1 * rec.m1 == pytest.approx(rec.h2 * rec.m2, rel=1e-14)
    zero = component_shift_test(sys, 0.0, 0.5, eos, radius_bound=unit2.radius)
    assert zero.delta_E == 0.0


def test_shift_matches_direct_energy(unit2):
    """A one-cell move of each blob, regridded exactly, against the full energy evaluation."""
    sys, info, _, eos = _shift_fixture(unit2, 4.0)
    planet = sys.patches[0]
    h = planet.rho.h
    rec = component_shift_test(sys, 2 * h, 0.5, eos, radius_bound=unit2.radius)
    assert rec.h1 == pytest.approx(h, rel=1e-12)
    v = planet.rho.values
    x, _, _ = planet.rho.coords()
    left = np.broadcast_to(x < planet.ball_center[0], v.shape)
    moved = np.roll(np.where(left, v, 0.0), 1, axis=0) + np.roll(np.where(left, 0.0, v), -1, axis=0)
    shifted = sys.copy()
    shifted.patches[0].rho = planet.rho.with_values(moved)
    direct = energies(sys, 0.5, eos).EJ - energies(shifted, 0.5, eos).EJ
    assert rec.delta_E == pytest.approx(direct, rel=1e-8, abs=1e-15)


def test_shift_narrow_gap_is_recorded(unit2):
    sys, info, dstar, eos = _shift_fixture(unit2, 0.1)
    rec = component_shift_test(sys, 1e-3, 0.5, eos, plane=info["plane"], radius_bound=unit2.radius)
    assert rec is not None and np.isfinite(rec.delta_E)
    assert rec.threshold == pytest.approx(dstar, rel=1e-14)


def test_shift_skips_single_component(rot2_m02):
    assert component_shift_test(rot2_m02, 1e-3) is None


# ---------------------------------------------------------------- local probe


def test_energy_delta_matches_direct(rot2_m02, rng):
    res = rot2_m02
    J, eos = res.config.J, res.config.eos
    delta = EnergyDelta(res.system, J, eos)
    base = energies(res.system, J, eos).EJ
    for p in res.system.patches:
        sigma = -np.ones(1)
        while np.any(p.rho.values + sigma < 0):
            sigma = draw_perturbation(p.rho, 0.2 * support_stats(p.rho).radius, rng)
        assert abs(sigma.sum()) <= 1e-12 * np.abs(sigma).sum()
        assert delta(p.label, np.zeros(p.rho.dims)) == 0.0
        new = res.system.copy()
        new.by_label(p.label).rho = p.rho.with_values(p.rho.values + sigma)
        direct = energies(new, J, eos).EJ - base
        assert delta(p.label, sigma) == pytest.approx(direct, rel=1e-6, abs=1e-14)


def test_probe_short(rot2_m02):
    rep = local_min_probe(rot2_m02, trials=30, seed=1)
    assert len(rep.deltas) == 30
    assert rep.worst >= -1e-4 * abs(rep.energy)
    assert min(rep.pair_sums) >= -1e-4 * abs(rep.energy)


# ---------------------------------------------------------------- sweep


def test_expand_points_dedup(caplog):
    with caplog.at_level(logging.WARNING):
        pts = expand_points([0.5, 0.5], [0.2, 0.1], 2.0)
    assert pts == [(0.5, 0.1, 2.0), (0.5, 0.2, 2.0)]
    assert "duplicate" in caplog.text


def test_run_sweep_outputs(tmp_path):
    base = {"cells_per_radius": 8}
    rep = run_sweep([(0.5, 0.2, 2.0), (0.1, 0.2, 2.0), (0.5, 0.1, 2.0), (0.5, 0.05, 2.0)], base)
    assert [r["m"] for r in rep.records] == [0.2, 0.05, 0.1, 0.2]
    bad = rep.records[0]
    assert bad["converged"] is False and "InfeasibleGeometryError" in bad["error"]
    assert rep.converged_fraction == 0.75
    assert {f["quantity"] for f in rep.fits} == {"linf_planet", "radius_planet", "neg_E0_planet"}
    rep.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# columns:")
    assert lines[1].split(",") == COLUMNS
    assert len(lines) == 2 + 4
    rep.write_json(tmp_path / "s.json")
    rep.write_fits(tmp_path / "f.csv")
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 1 + len(rep.fits)
