"""Linearization, criterion, and stability-map sweeps."""

from dataclasses import replace

import numpy as np
import pytest

from cvplatoon.model import ConnectivityParams, DomainError, IdmParams, equilibrium_state
from cvplatoon.stability import (
    GridSpec,
    LinearCoefficients,
    analytic_partials,
    classify_point,
    equilibrium_cv_headways,
    finite_difference_partials,
    linear_coefficients,
    region_area,
    stability_lhs,
    stability_map,
)

P = IdmParams()

G1_20 = 0.034838799643758423  # frozen high-precision value at Table-1, v_e = 20
CV_LHS_M2 = -0.19944362532443075  # kv = ka = 0.3, geometric 0.5, M = 2, T' = 1
IDM_LHS_T1 = 0.0078346165055652529


def test_analytic_signs_and_value():
    eq = equilibrium_state(20.0, P)
    g1, g2, g3 = analytic_partials(P, eq)
    assert g1 == pytest.approx(G1_20, rel=1e-12)
    assert g1 > 0.0 and g2 < 0.0 and g3 < 0.0


def test_g3_vanishes_at_rest():
    eq = equilibrium_state(0.0, P)
    assert analytic_partials(P, eq)[2] == 0.0
    assert finite_difference_partials(P, eq)[2] == pytest.approx(0.0, abs=1e-9)


def test_partials_match_finite_differences():
    for v in np.linspace(2.0, 30.0, 10):
        eq = equilibrium_state(float(v), P)
        ana = analytic_partials(P, eq)
        num = finite_difference_partials(P, eq, h=1e-5)
        for a, n in zip(ana, num):
            assert n == pytest.approx(a, rel=1e-6)


def test_finite_difference_convergence():
    # halving h shrinks the truncation error about 4x (second order)
    eq = equilibrium_state(20.0, P)
    ana = np.array(analytic_partials(P, eq))
    err = [np.abs(np.array(finite_difference_partials(P, eq, h=h)) - ana).max()
           for h in (2e-3, 1e-3)]
    assert 3.0 < err[0] / err[1] < 5.0


def test_finite_difference_step_guard():
    eq = equilibrium_state(0.0, P)  # s_e = 2 m
    with pytest.raises(DomainError):
        finite_difference_partials(P, eq, h=2.5)
    with pytest.raises(DomainError):
        finite_difference_partials(P, eq, h=0.0)


def test_lhs_pure_idm_reduction():
    eq = equilibrium_state(20.0, P)
    g1, g2, g3 = analytic_partials(P, eq)
    c = LinearCoefficients(g1, g2, g3, f4=0.0, f5=0.0, weight_sum=0.0, t_react=0.0)
    assert stability_lhs(c) == g1 - 0.5 * g2 ** 2 - g2 * g3


def test_lhs_linear_in_f4():
    c = linear_coefficients(P, ConnectivityParams(), 20.0, 3, 2)
    eps = 0.01
    shifted = replace(c, f4=c.f4 - eps)
    assert stability_lhs(shifted) - stability_lhs(c) == pytest.approx(
        -eps * c.weight_sum, rel=1e-12)


def test_lhs_frozen_values():
    c0 = linear_coefficients(P, ConnectivityParams(kv=0.0, ka=0.0, m=0), 20.0, 3, 0)
    assert stability_lhs(c0) == pytest.approx(IDM_LHS_T1, rel=1e-12)
    c2 = linear_coefficients(P, ConnectivityParams(), 20.0, 3, 2)
    assert stability_lhs(c2) == pytest.approx(CV_LHS_M2, rel=1e-12)


def test_equilibrium_cv_headways():
    eq = equilibrium_state(20.0, P)
    d = equilibrium_cv_headways(eq, P, cv_spacing=3, m_cv=2)
    assert d[0] == pytest.approx(3 * (eq.gap + P.length) - P.length, rel=1e-15)
    assert d[1] == pytest.approx(6 * (eq.gap + P.length) - P.length, rel=1e-15)


def test_classify_zero_sensitivity_matches_pure_idm():
    base = classify_point(P, ConnectivityParams(kv=0.0, ka=0.0, m=0), 20.0, 3, 0)
    for m_cv in (1, 5, 10):
        v = classify_point(P, ConnectivityParams(kv=0.0, ka=0.0, m=m_cv), 20.0, 3, m_cv)
        assert v.lhs == base.lhs and v.label == base.label


def test_classify_m0_matches_pure_idm():
    base = classify_point(P, ConnectivityParams(kv=0.0, ka=0.0, m=0), 20.0, 3, 0)
    v = classify_point(P, ConnectivityParams(kv=0.3, ka=0.3, m=0), 20.0, 3, 0)
    assert v.lhs == base.lhs


def test_lhs_non_increasing_in_m():
    cp = ConnectivityParams(kv=0.3, ka=0.3)
    values = [stability_lhs(linear_coefficients(P, cp, 20.0, 3, m)) for m in range(0, 9)]
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def test_comm_range_truncates_weight_sum():
    eq = equilibrium_state(20.0, P)
    d1 = equilibrium_cv_headways(eq, P, 3, 1)[0]
    cp_short = ConnectivityParams(kv=0.3, ka=0.3, m=2, comm_range=d1 + 1.0)
    c = linear_coefficients(P, cp_short, 20.0, 3, 2)
    assert c.weight_sum == pytest.approx(0.5, rel=1e-15)


def _grid(a_lo, a_hi, na, t_lo, t_hi, nt, cp, v_e=20.0, m_cv=0):
    return GridSpec(a_m_min=a_lo, a_m_max=a_hi,
                    a_m_step=(a_hi - a_lo) / (na - 1) if na > 1 else 1.0,
                    t_d_min=t_lo, t_d_max=t_hi,
                    t_d_step=(t_hi - t_lo) / (nt - 1) if nt > 1 else 1.0,
                    idm=P, cp=cp, v_e=v_e, cv_spacing=3, m_cv=m_cv)


def test_single_cell_grid_stable():
    spec = _grid(2.0, 2.0, 1, 2.0, 2.0, 1, ConnectivityParams(), m_cv=2)
    grid = stability_map(spec)
    assert len(grid.cells) == 1 and len(grid.cells[0]) == 1
    assert grid.cells[0][0].label == "stable"


def test_grid_axes_inclusive():
    spec = _grid(0.3, 2.5, 12, 0.5, 2.5, 9, ConnectivityParams())
    assert len(spec.a_m_values()) == 12 and spec.a_m_values()[-1] == 2.5
    assert len(spec.t_d_values()) == 9 and spec.t_d_values()[0] == 0.5


def test_map_determinism():
    spec = _grid(0.3, 2.5, 8, 0.5, 2.5, 8, ConnectivityParams(), m_cv=2)
    g1 = stability_map(spec)
    g2 = stability_map(spec)
    assert np.array_equal(g1.lhs_array(), g2.lhs_array())
    assert g1.labels() == g2.labels()


def test_map_parallel_matches_serial():
    spec = _grid(0.3, 2.5, 10, 0.5, 2.5, 10, ConnectivityParams(), m_cv=2)
    serial = stability_map(spec, workers=1)
    parallel = stability_map(spec, workers=3)
    assert np.array_equal(serial.lhs_array(), parallel.lhs_array())
    assert serial.labels() == parallel.labels()


def test_idm_reduction_map_m_independent():
    cp0 = ConnectivityParams(kv=0.0, ka=0.0, m=0)
    cp10 = ConnectivityParams(kv=0.0, ka=0.0, m=10)
    a = stability_map(_grid(0.3, 2.5, 10, 0.5, 2.5, 10, cp0, m_cv=0))
    b = stability_map(_grid(0.3, 2.5, 10, 0.5, 2.5, 10, cp10, m_cv=10))
    assert np.array_equal(a.lhs_array(), b.lhs_array())
    assert a.labels() == b.labels()


def test_region_area_extremes():
    cp = ConnectivityParams(kv=0.3, ka=0.3, m=2)
    all_stable = stability_map(_grid(1.5, 2.5, 5, 1.5, 2.5, 5, cp, m_cv=2))
    assert region_area(all_stable) == 1.0
    cp0 = ConnectivityParams(kv=0.0, ka=0.0, m=0)
    all_unstable = stability_map(_grid(0.3, 0.8, 5, 0.5, 1.0, 5, cp0, m_cv=0))
    assert region_area(all_unstable) == 0.0


def test_connectivity_enlarges_stable_count():
    cp0 = ConnectivityParams(kv=0.3, ka=0.3, m=0)
    cp2 = ConnectivityParams(kv=0.3, ka=0.3, m=2)
    g0 = stability_map(_grid(0.3, 2.5, 25, 0.5, 2.5, 25, cp0, m_cv=0))
    g2 = stability_map(_grid(0.3, 2.5, 25, 0.5, 2.5, 25, cp2, m_cv=2))
    assert g2.stable_mask().sum() >= g0.stable_mask().sum()


def test_region_area_growth_in_m():
    # congested regime, where the critical curve lies inside the window
    areas = []
    for m in (1, 2, 4, 8):
        cp = ConnectivityParams(kv=0.3, ka=0.3, m=m)
        areas.append(region_area(stability_map(
            _grid(0.3, 2.5, 25, 0.5, 2.5, 25, cp, v_e=5.0, m_cv=m))))
    increments = np.diff(areas)
    assert all(d >= 0.0 for d in increments)
    assert all(b <= a for a, b in zip(increments, increments[1:]))
    assert increments[0] > 0.0


def test_no_equilibrium_cells():
    spec = _grid(0.5, 1.0, 3, 0.5, 1.0, 3, ConnectivityParams(), v_e=40.0)
    grid = stability_map(spec)
    assert all(c.label == "no-equilibrium" for row in grid.cells for c in row)
    with pytest.raises(DomainError):
        region_area(grid)


def test_grid_spec_validation():
    with pytest.raises(DomainError):
        GridSpec(a_m_step=0.0)
    with pytest.raises(DomainError):
        GridSpec(t_d_min=2.0, t_d_max=1.0)
