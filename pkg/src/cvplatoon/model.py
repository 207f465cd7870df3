"""Acceleration law for mixed platoons of connected and human-driven vehicles.

The model splits each vehicle's acceleration into a conventional
car-following response to the immediate leader (Intelligent Driver Model)
and a feedback term built from the broadcast state of the connected
vehicles ahead.  Human-driven vehicles use the IDM term alone.

All functions here are pure and accept either scalars or numpy arrays
(broadcasting elementwise); the simulator relies on the array path.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np


class DomainError(ValueError):
    """Physically invalid input (overlapping vehicles, speed above v0, ...)."""


class VehicleClass(Enum):
    CONNECTED = "CV"
    HUMAN = "HV"


@dataclass(frozen=True)
class IdmParams:
    """IDM constants plus vehicle length and driver reaction time.

    Defaults are the model's typical passenger-car values; the vehicle
    length (5 m) only enters position bookkeeping, never the acceleration
    terms, which consume net bumper-to-bumper gaps.
    """

    v0: float = 33.3       # desired velocity (m/s)
    T: float = 1.6         # safe time headway (s)
    a0: float = 0.73       # maximum acceleration (m/s^2)
    b0: float = 1.67       # comfortable deceleration (m/s^2)
    delta: float = 4.0     # free-acceleration exponent
    s0: float = 2.0        # jam distance (m)
    length: float = 5.0    # vehicle length (m)
    t_react: float = 1.0   # driver reaction time (s)

    def __post_init__(self):
        if not (self.v0 > 0 and self.a0 > 0 and self.b0 > 0 and self.delta > 0
                and self.s0 > 0 and self.length > 0):
            raise DomainError("IdmParams: v0, a0, b0, delta, s0, length must be > 0")
        if self.T < 0 or self.t_react < 0:
            raise DomainError("IdmParams: T and t_react must be >= 0")


@dataclass(frozen=True)
class GeometricWeights:
    """w_k = ratio**k for the k-th connected predecessor; headway-independent."""

    ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise DomainError("GeometricWeights: ratio must lie in (0, 1)")


@dataclass(frozen=True)
class InverseDistanceWeights:
    """w_k = (reference_gap / gap_k)**exponent, evaluated at the current headway."""

    exponent: float = 2.0
    reference_gap: float = 40.0

    def __post_init__(self):
        if self.exponent < 1.0:
            raise DomainError("InverseDistanceWeights: exponent must be >= 1")
        if self.reference_gap <= 0.0:
            raise DomainError("InverseDistanceWeights: reference_gap must be > 0")


@dataclass(frozen=True)
class UniformWeights:
    """w_k = value for every connected predecessor in range."""

    value: float = 1.0

    def __post_init__(self):
        if self.value <= 0.0:
            raise DomainError("UniformWeights: value must be > 0")


WeightScheme = Union[GeometricWeights, InverseDistanceWeights, UniformWeights]


@dataclass(frozen=True)
class ConnectivityParams:
    """Sensitivities and reach of the vehicle-to-vehicle feedback term."""

    kv: float = 0.3                  # velocity-difference sensitivity, in [0, 1]
    ka: float = 0.3                  # acceleration sensitivity, in [0, 1]
    m: int = 2                       # max connected predecessors considered
    comm_range: float = float("inf")  # communication range (m)
    weights: WeightScheme = GeometricWeights()

    def __post_init__(self):
        if not (0.0 <= self.kv <= 1.0 and 0.0 <= self.ka <= 1.0):
            raise DomainError("ConnectivityParams: kv and ka must lie in [0, 1]")
        if self.m < 0:
            raise DomainError("ConnectivityParams: m must be >= 0")
        if not self.comm_range > 0.0:
            raise DomainError("ConnectivityParams: comm_range must be > 0")


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle; gap convention s = x_lead - x - l_lead."""

    position: float
    velocity: float
    acceleration: float
    vclass: VehicleClass
    length: float = 5.0


@dataclass(frozen=True)
class EquilibriumState:
    """Uniform-flow operating point: common speed and net gap."""

    speed: float
    gap: float

    def __post_init__(self):
        if self.speed < 0.0:
            raise DomainError("EquilibriumState: speed must be >= 0")
        if self.gap <= 0.0:
            raise DomainError("EquilibriumState: gap must be > 0")


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must be finite")


def desired_gap(v, dv, p: IdmParams):
    """Desired minimum gap s*(v, dv) = s0 + v*T + v*dv / (2*sqrt(a0*b0)).

    ``dv`` is follower velocity minus leader velocity (positive when
    closing).  No clamping: strongly negative dv may push the result
    below s0, which callers must tolerate so the analytic partial
    derivatives stay exact.
    """
    _check_finite("desired_gap: v", v)
    _check_finite("desired_gap: dv", dv)
    if np.any(np.asarray(v) < 0.0):
        raise DomainError("desired_gap: v must be >= 0")
    return p.s0 + v * p.T + v * dv / (2.0 * np.sqrt(p.a0 * p.b0))


def idm_acceleration(s, v, dv, p: IdmParams):
    """IDM acceleration a0 * [1 - (v/v0)^delta - (s*(v,dv)/s)^2].

    Parameters
    ----------
    s : net gap to the immediate leader (m), must be > 0
    v : follower speed (m/s), >= 0
    dv : follower speed minus leader speed (m/s)
    p : model parameters
    """
    _check_finite("idm_acceleration: s", s)
    if np.any(np.asarray(s) <= 0.0):
        raise DomainError("idm_acceleration: gap must be > 0 (vehicle overlap)")
    return p.a0 * (1.0 - (v / p.v0) ** p.delta - (desired_gap(v, dv, p) / s) ** 2)


def weight_values(scheme: WeightScheme, gaps, ordinals):
    """Raw weights for neighbor headways ``gaps`` at 1-based positions ``ordinals``.

    Shared by the list-based API below and the simulator's array path so
    there is a single definition of each scheme.
    """
    gaps = np.asarray(gaps, dtype=float)
    ordinals = np.asarray(ordinals)
    if isinstance(scheme, GeometricWeights):
        return np.broadcast_to(scheme.ratio ** ordinals, np.broadcast_shapes(gaps.shape, ordinals.shape)).astype(float)
    if isinstance(scheme, InverseDistanceWeights):
        return (scheme.reference_gap / gaps) ** scheme.exponent
    if isinstance(scheme, UniformWeights):
        return np.full(np.broadcast_shapes(gaps.shape, ordinals.shape), scheme.value)
    raise TypeError(f"unknown weight scheme {scheme!r}")


def compute_weights(gaps: Sequence[float], scheme: WeightScheme) -> list:
    """Weights w_1..w_M for the headways to the connected predecessors.

    ``gaps`` must be positive and ordered nearest-first; the empty list is
    valid (no neighbors) and yields an empty result.
    """
    if len(gaps) == 0:
        return []
    gaps = np.asarray(gaps, dtype=float)
    _check_finite("compute_weights: gaps", gaps)
    if np.any(gaps <= 0.0):
        raise DomainError("compute_weights: gaps must be > 0")
    ordinals = np.arange(1, len(gaps) + 1)
    return [float(w) for w in weight_values(scheme, gaps, ordinals)]


def cv_effect(follower_v: float,
              neighbors: Sequence[Tuple[float, float, float]],
              cp: ConnectivityParams) -> float:
    """Connectivity feedback -kv * sum(w_k * dv_k) + ka * sum(w_k * a_k).

    ``neighbors`` holds (gap, velocity, acceleration) triples for the
    connected predecessors, nearest-first, already filtered to at most
    ``cp.m`` vehicles within communication range.  dv_k is follower
    velocity minus neighbor velocity.
    """
    if not neighbors:
        return 0.0
    gaps = [n[0] for n in neighbors]
    ws = compute_weights(gaps, cp.weights)
    dv_sum = sum(w * (follower_v - n[1]) for w, n in zip(ws, neighbors))
    a_sum = sum(w * n[2] for w, n in zip(ws, neighbors))
    return -cp.kv * dv_sum + cp.ka * a_sum


def total_acceleration(state: VehicleState,
                       leader: VehicleState,
                       cv_neighbors: Sequence[Tuple[float, float, float]],
                       p: IdmParams,
                       cp: ConnectivityParams) -> float:
    """Full acceleration: IDM response to the leader plus the CV feedback.

    Human-driven vehicles have no communication, so they must be called
    with an empty neighbor list and receive the IDM term alone.
    """
    gap = leader.position - state.position - leader.length
    if gap <= 0.0:
        raise DomainError(f"total_acceleration: nonpositive gap {gap:.3f} m (collision)")
    a_idm = idm_acceleration(gap, state.velocity, state.velocity - leader.velocity, p)
    if state.vclass is VehicleClass.HUMAN:
        if cv_neighbors:
            raise DomainError("total_acceleration: human-driven vehicle cannot have CV neighbors")
        return a_idm
    return a_idm + cv_effect(state.velocity, cv_neighbors, cp)


def equilibrium_gap(v, p: IdmParams):
    """Equilibrium net gap s_e(v) = (s0 + v*T) / sqrt(1 - (v/v0)^delta).

    Defined for 0 <= v < v0; the gap diverges as v approaches v0.
    """
    _check_finite("equilibrium_gap: v", v)
    varr = np.asarray(v, dtype=float)
    if np.any(varr < 0.0) or np.any(varr >= p.v0):
        raise DomainError("equilibrium_gap: v must satisfy 0 <= v < v0")
    return (p.s0 + v * p.T) / np.sqrt(1.0 - (v / p.v0) ** p.delta)


def equilibrium_speed(s: float, p: IdmParams, tol: float = 1e-9) -> float:
    """Invert the equilibrium relation: the unique v in [0, v0) with s_e(v) = s.

    Bracketed bisection; s_e is strictly increasing on [0, v0) so the
    root is unique.  Converges until |s_e(v) - s| <= tol (meters).
    """
    if not np.isfinite(s):
        raise DomainError("equilibrium_speed: s must be finite")
    if s < p.s0:
        raise DomainError(f"equilibrium_speed: no equilibrium below jam distance ({s} < {p.s0})")
    if s == p.s0:
        return 0.0
    lo, hi = 0.0, p.v0 * (1.0 - 1e-15)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        diff = float(equilibrium_gap(mid, p)) - s
        if abs(diff) <= tol:
            return mid
        if diff < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equilibrium_state(v: float, p: IdmParams) -> EquilibriumState:
    """Equilibrium operating point at speed v."""
    return EquilibriumState(speed=float(v), gap=float(equilibrium_gap(v, p)))
