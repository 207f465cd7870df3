"""Acceleration law, weights, and equilibrium relations."""

import numpy as np
import pytest

from cvplatoon.model import (
    ConnectivityParams,
    DomainError,
    GeometricWeights,
    IdmParams,
    InverseDistanceWeights,
    UniformWeights,
    VehicleClass,
    VehicleState,
    compute_weights,
    cv_effect,
    desired_gap,
    equilibrium_gap,
    equilibrium_speed,
    equilibrium_state,
    idm_acceleration,
    total_acceleration,
)

P = IdmParams()

# frozen expected values, computed once with mpmath at 50 digits
DESIRED_GAP_20_2 = 52.113831772562696
IDM_30_20_2 = -1.5678446769464150
S_E_20 = 36.454334048118657
V_E_S50 = 24.775505505719813


def test_table1_defaults():
    assert (P.v0, P.T, P.a0, P.b0, P.delta, P.s0, P.t_react) == \
        (33.3, 1.6, 0.73, 1.67, 4.0, 2.0, 1.0)
    assert P.length == 5.0


@pytest.mark.parametrize("bad", [
    dict(v0=0.0), dict(a0=-1.0), dict(b0=0.0), dict(s0=0.0),
    dict(T=-0.1), dict(t_react=-1.0), dict(length=0.0),
])
def test_param_validation(bad):
    with pytest.raises(DomainError):
        IdmParams(**bad)


def test_desired_gap_jam():
    assert desired_gap(0.0, 0.0, P) == 2.0


def test_desired_gap_steady():
    assert desired_gap(20.0, 0.0, P) == pytest.approx(34.0, abs=1e-12)


def test_desired_gap_closing():
    assert desired_gap(20.0, 2.0, P) == pytest.approx(DESIRED_GAP_20_2, rel=1e-12)


def test_desired_gap_rejects_bad_inputs():
    with pytest.raises(DomainError):
        desired_gap(float("nan"), 0.0, P)
    with pytest.raises(DomainError):
        desired_gap(10.0, float("inf"), P)
    with pytest.raises(DomainError):
        desired_gap(-1.0, 0.0, P)


def test_idm_free_acceleration_at_rest():
    assert idm_acceleration(1e6, 0.0, 0.0, P) == pytest.approx(P.a0, abs=1e-9)


def test_idm_equilibrium_identity():
    s_e = float(equilibrium_gap(20.0, P))
    assert idm_acceleration(s_e, 20.0, 0.0, P) == pytest.approx(0.0, abs=1e-9)


def test_idm_braking_dominates():
    a = idm_acceleration(30.0, 20.0, 2.0, P)
    assert a == pytest.approx(IDM_30_20_2, rel=1e-12)
    assert a < 0.0 and abs(a) > P.a0


def test_idm_rejects_overlap():
    with pytest.raises(DomainError):
        idm_acceleration(0.0, 10.0, 0.0, P)
    with pytest.raises(DomainError):
        idm_acceleration(-3.0, 10.0, 0.0, P)


def test_idm_monotonicity():
    # increasing in gap, decreasing in speed and in closing speed
    s_grid = np.linspace(5.0, 120.0, 25)
    a_s = [idm_acceleration(s, 15.0, 0.5, P) for s in s_grid]
    assert all(b > a for a, b in zip(a_s, a_s[1:]))
    v_grid = np.linspace(0.0, 32.0, 25)
    a_v = [idm_acceleration(40.0, v, 0.5, P) for v in v_grid]
    assert all(b < a for a, b in zip(a_v, a_v[1:]))
    # dv sampled where s* stays positive: the unclamped quadratic flips the
    # braking term's slope once a strongly opening gap drives s* below zero
    dv_grid = np.linspace(-3.0, 5.0, 25)
    a_dv = [idm_acceleration(40.0, 15.0, dv, P) for dv in dv_grid]
    assert all(b < a for a, b in zip(a_dv, a_dv[1:]))


def test_geometric_weights():
    ws = compute_weights([10.0, 99.0, 3.0], GeometricWeights(ratio=0.5))
    assert ws == [0.5, 0.25, 0.125]


def test_inverse_distance_weights():
    ws = compute_weights([40.0, 80.0], InverseDistanceWeights(exponent=2.0, reference_gap=40.0))
    assert ws == pytest.approx([1.0, 0.25], rel=1e-15)


def test_uniform_weights():
    ws = compute_weights([7.0, 7.0], UniformWeights(value=0.3))
    assert ws == [0.3, 0.3]


def test_weights_empty_input():
    assert compute_weights([], GeometricWeights()) == []


def test_weights_reject_nonpositive_gap():
    with pytest.raises(DomainError):
        compute_weights([10.0, 0.0], GeometricWeights())


def test_weights_nonnegative_sampled():
    rng = np.random.default_rng(7)
    schemes = [GeometricWeights(0.9), InverseDistanceWeights(1.5, 25.0), UniformWeights(2.0)]
    for scheme in schemes:
        for _ in range(20):
            gaps = list(rng.uniform(0.5, 300.0, size=rng.integers(1, 6)))
            assert all(w >= 0.0 for w in compute_weights(gaps, scheme))


def test_weight_scheme_validation():
    with pytest.raises(DomainError):
        GeometricWeights(ratio=1.0)
    with pytest.raises(DomainError):
        InverseDistanceWeights(exponent=0.5)
    with pytest.raises(DomainError):
        UniformWeights(value=0.0)


def test_cv_effect_zero_sensitivities():
    cp = ConnectivityParams(kv=0.0, ka=0.0, m=3)
    assert cv_effect(18.0, [(30.0, 20.0, 0.5), (70.0, 21.0, -0.2)], cp) == 0.0


def test_cv_effect_equilibrium():
    cp = ConnectivityParams(kv=0.4, ka=0.4, m=2)
    assert cv_effect(20.0, [(36.0, 20.0, 0.0), (77.0, 20.0, 0.0)], cp) == 0.0


def test_cv_effect_worked_example():
    # one neighbor with unit weight: -0.5*(19-20) + 0.2*0.3 = 0.56
    cp = ConnectivityParams(kv=0.5, ka=0.2, m=1, weights=UniformWeights(value=1.0))
    assert cv_effect(19.0, [(55.0, 20.0, 0.3)], cp) == pytest.approx(0.56, abs=1e-12)


def test_cv_effect_sign_symmetry():
    cp = ConnectivityParams(kv=0.37, ka=0.21, m=3)
    base_v, nbrs = 20.0, [(30.0, 18.5, 0.4), (66.0, 21.0, -0.9)]
    plus = cv_effect(base_v, nbrs, cp)
    flipped = [(g, base_v + (base_v - v), -a) for g, v, a in nbrs]
    assert cv_effect(base_v, flipped, cp) == -plus


def _veh(x, v, a=0.0, cls=VehicleClass.HUMAN):
    return VehicleState(position=x, velocity=v, acceleration=a, vclass=cls, length=P.length)


def test_total_acceleration_hv_equilibrium():
    s_e = float(equilibrium_gap(20.0, P))
    follower = _veh(0.0, 20.0)
    leader = _veh(s_e + P.length, 20.0)
    cp = ConnectivityParams()
    assert total_acceleration(follower, leader, [], P, cp) == pytest.approx(0.0, abs=1e-9)


def test_total_acceleration_reduces_to_idm():
    cp = ConnectivityParams(kv=0.0, ka=0.0, m=2)
    follower = _veh(0.0, 22.0, cls=VehicleClass.CONNECTED)
    leader = _veh(40.0, 19.0)
    nbrs = [(30.0, 19.0, -0.4), (75.0, 21.0, 0.2)]
    expected = idm_acceleration(40.0 - P.length, 22.0, 3.0, P)
    assert total_acceleration(follower, leader, nbrs, P, cp) == expected


def test_total_acceleration_cv_composition():
    # equilibrium IDM term plus 0.5 weight * 0.5 ka * (-1 m/s^2) = -0.25
    s_e = float(equilibrium_gap(20.0, P))
    cp = ConnectivityParams(kv=0.0, ka=0.5, m=1, weights=GeometricWeights(0.5))
    follower = _veh(0.0, 20.0, cls=VehicleClass.CONNECTED)
    leader = _veh(s_e + P.length, 20.0)
    nbrs = [(s_e, 20.0, -1.0)]
    a = total_acceleration(follower, leader, nbrs, P, cp)
    assert a == pytest.approx(-0.25, abs=1e-9)


def test_total_acceleration_rejects_hv_neighbors():
    follower = _veh(0.0, 20.0)
    leader = _veh(50.0, 20.0)
    with pytest.raises(DomainError):
        total_acceleration(follower, leader, [(30.0, 20.0, 0.0)], P, ConnectivityParams())


def test_total_acceleration_collision():
    follower = _veh(0.0, 20.0)
    leader = _veh(P.length, 20.0)  # zero net gap
    with pytest.raises(DomainError):
        total_acceleration(follower, leader, [], P, ConnectivityParams())


def test_equilibrium_gap_values():
    assert equilibrium_gap(0.0, P) == 2.0
    assert float(equilibrium_gap(20.0, P)) == pytest.approx(S_E_20, rel=1e-12)
    with pytest.raises(DomainError):
        equilibrium_gap(P.v0, P)
    with pytest.raises(DomainError):
        equilibrium_gap(-0.5, P)


def test_equilibrium_identity_grid():
    for v in np.linspace(0.0, 0.99 * P.v0, 23):
        s_e = float(equilibrium_gap(v, P))
        assert abs(idm_acceleration(s_e, float(v), 0.0, P)) < 1e-8


def test_equilibrium_speed_jam():
    assert equilibrium_speed(2.0, P) == 0.0


def test_equilibrium_speed_below_jam():
    with pytest.raises(DomainError):
        equilibrium_speed(1.5, P)


def test_equilibrium_speed_interior():
    v = equilibrium_speed(50.0, P)
    assert 20.0 < v < P.v0
    assert v == pytest.approx(V_E_S50, abs=1e-6)
    assert abs(float(equilibrium_gap(v, P)) - 50.0) <= 1e-9


def test_equilibrium_round_trip():
    for v in np.linspace(0.5, 0.99 * P.v0, 17):
        s = float(equilibrium_gap(v, P))
        assert equilibrium_speed(s, P) == pytest.approx(float(v), abs=1e-6)


def test_equilibrium_state_helper():
    eq = equilibrium_state(20.0, P)
    assert eq.speed == 20.0 and eq.gap == pytest.approx(S_E_20, rel=1e-12)


def test_connectivity_validation():
    with pytest.raises(DomainError):
        ConnectivityParams(kv=1.5)
    with pytest.raises(DomainError):
        ConnectivityParams(ka=-0.1)
    with pytest.raises(DomainError):
        ConnectivityParams(m=-1)
    with pytest.raises(DomainError):
        ConnectivityParams(comm_range=0.0)
