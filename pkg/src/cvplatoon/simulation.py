"""Time-domain simulation of a mixed platoon with driver reaction delay.

A platoon is built from a repeating CV/HV pattern at uniform equilibrium,
optionally perturbed, and integrated with a fixed step.  Every vehicle's
acceleration at time t is the model evaluated on inputs sampled from a
per-vehicle history buffer at t - T' (one uniform delay on perception and
communication inputs alike; T' = 0 recovers the undelayed model).

The measured perturbation growth along the platoon is the independent
oracle for the analytic string-stability criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .model import (
    ConnectivityParams,
    DomainError,
    EquilibriumState,
    IdmParams,
    VehicleClass,
    VehicleState,
    idm_acceleration,
    weight_values,
)


class IndeterminateGrowth(DomainError):
    """Raised when a trajectory carries no measurable perturbation."""


@dataclass(frozen=True)
class PlatoonComposition:
    """Vehicle-class pattern repeated from the platoon head to fill N slots.

    Pattern "CHH" is the reference mixed case: one connected vehicle
    followed by two human-driven ones, so the m-th CV occupies platoon
    position 3m - 2 (1-based).
    """

    pattern: str = "CHH"
    n_vehicles: int = 30

    def __post_init__(self):
        if not self.pattern or any(c not in "CH" for c in self.pattern):
            raise DomainError("PlatoonComposition: pattern must be nonempty over {C, H}")
        if self.n_vehicles < 1:
            raise DomainError("PlatoonComposition: need at least one vehicle")

    def classes(self) -> List[VehicleClass]:
        return [VehicleClass.CONNECTED if self.pattern[i % len(self.pattern)] == "C"
                else VehicleClass.HUMAN
                for i in range(self.n_vehicles)]

    @property
    def penetration(self) -> float:
        cls = self.classes()
        return sum(c is VehicleClass.CONNECTED for c in cls) / len(cls)


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear speed profile; held constant outside the breakpoints."""

    points: Tuple[Tuple[float, float], ...] = ((0.0, 20.0),)

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if not ts or any(b <= a for a, b in zip(ts, ts[1:])):
            raise DomainError("SpeedProfile: breakpoint times must be strictly increasing")
        if any(v < 0.0 for _, v in self.points):
            raise DomainError("SpeedProfile: speeds must be >= 0")

    def __call__(self, t):
        ts = [pt[0] for pt in self.points]
        vs = [pt[1] for pt in self.points]
        return float(np.interp(t, ts, vs))


@dataclass(frozen=True)
class RingRoad:
    """Periodic boundary; circumference defaults to N*(s_e + l) so the
    equilibrium tiles the ring exactly."""

    circumference: Optional[float] = None


@dataclass(frozen=True)
class OpenRoad:
    """Lead vehicle follows a prescribed speed profile and is not model-controlled."""

    leader_profile: SpeedProfile = SpeedProfile()


Boundary = Union[RingRoad, OpenRoad]


@dataclass(frozen=True)
class VelocityPulse:
    dv: float
    at: float


@dataclass(frozen=True)
class PositionOffset:
    dx: float
    at: float


@dataclass(frozen=True)
class PerturbationSpec:
    """Single scheduled kick to one vehicle, small enough for the linear regime
    (|dx| <= 0.1*s_e, |dv| <= 0.1*v_e, checked against the scenario equilibrium)."""

    target: int = 0
    kind: Union[VelocityPulse, PositionOffset] = VelocityPulse(dv=-0.5, at=10.0)


@dataclass(frozen=True)
class ScenarioSpec:
    boundary: Boundary = RingRoad()
    composition: PlatoonComposition = PlatoonComposition()
    initial: EquilibriumState = EquilibriumState(speed=20.0, gap=36.454334048118657)
    perturbation: Optional[PerturbationSpec] = PerturbationSpec()
    p: IdmParams = IdmParams()
    cp: ConnectivityParams = ConnectivityParams()


class Integrator(Enum):
    EULER = "euler"
    HEUN = "heun"


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration settings.

    The reaction delay defaults to the model's t_react; the per-class
    fields override it for connected or human-driven vehicles separately.
    deceleration_cap=None disables the physical braking guard so analytic
    comparisons can run the raw model.
    """

    dt: float = 0.05
    duration: float = 300.0
    integrator: Integrator = Integrator.EULER
    t_react: Optional[float] = None
    t_react_cv: Optional[float] = None
    t_react_hv: Optional[float] = None
    velocity_floor: float = 0.0
    deceleration_cap: Optional[float] = 9.0
    sample_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0 or self.duration < 0.0:
            raise DomainError("SimConfig: dt must be > 0 and duration >= 0")
        if self.sample_stride < 1:
            raise DomainError("SimConfig: sample_stride must be >= 1")
        for tau in (self.t_react, self.t_react_cv, self.t_react_hv):
            if tau is not None and tau < 0.0:
                raise DomainError("SimConfig: reaction delays must be >= 0")


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    follower: int
    leader: int


@dataclass
class Trajectory:
    """Recorded per-vehicle time series; gap[i, n] is the net gap of vehicle n
    to its leader at sample i (nan for an open-road profile leader)."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    gap: np.ndarray
    classes: Tuple[VehicleClass, ...]
    eq: EquilibriumState
    ring: bool
    circumference: Optional[float]
    perturbation: Optional[PerturbationSpec]
    applied_at: Optional[float]
    collision: Optional[CollisionEvent]
    dt: float

    @property
    def n_vehicles(self) -> int:
        return self.x.shape[1]


def build_platoon(comp: PlatoonComposition, eq: EquilibriumState,
                  p: IdmParams) -> List[VehicleState]:
    """Uniform platoon at the equilibrium: net gap s_e, speed v_e, zero
    acceleration, classes cycled from the head (index 0 = frontmost)."""
    spacing = eq.gap + p.length
    return [VehicleState(position=-i * spacing, velocity=eq.speed,
                         acceleration=0.0, vclass=c, length=p.length)
            for i, c in enumerate(comp.classes())]


def connected_predecessors(platoon: Sequence[VehicleState], idx: int,
                           cp: ConnectivityParams,
                           circumference: Optional[float] = None,
                           ) -> List[Tuple[float, float, float]]:
    """(gap, velocity, acceleration) of the connected predecessors of
    platoon[idx], nearest-first: at most cp.m of them, net distance within
    comm_range, and on a ring never farther than half the circumference.
    """
    if platoon[idx].vclass is not VehicleClass.CONNECTED:
        raise DomainError("connected_predecessors: vehicle is not a CV")
    n = len(platoon)
    out: List[Tuple[float, float, float]] = []
    for d in range(1, n):
        j = idx - d
        if circumference is None and j < 0:
            break
        pred = platoon[j % n]
        wrap = circumference if (circumference is not None and j < 0) else 0.0
        center = pred.position + wrap - platoon[idx].position
        if circumference is not None and center - circumference / 2.0 > 1e-9:
            break
        net = center - pred.length
        if net > cp.comm_range:
            break
        if pred.vclass is VehicleClass.CONNECTED:
            out.append((net, pred.velocity, pred.acceleration))
            if len(out) == cp.m:
                break
    return out


def inject_perturbation(platoon: Sequence[VehicleState], spec: PerturbationSpec,
                        circumference: Optional[float] = None) -> List[VehicleState]:
    """Apply the scheduled offset to the target vehicle, leaving all else
    untouched.  Offsets that would close a gap to zero, or drive the
    velocity negative, are rejected."""
    n = len(platoon)
    if not 0 <= spec.target < n:
        raise DomainError(f"inject_perturbation: target {spec.target} out of range")
    states = list(platoon)
    tgt = states[spec.target]
    if isinstance(spec.kind, VelocityPulse):
        new_v = tgt.velocity + spec.kind.dv
        if new_v < 0.0:
            raise DomainError("inject_perturbation: pulse would drive velocity negative")
        states[spec.target] = VehicleState(tgt.position, new_v, tgt.acceleration,
                                           tgt.vclass, tgt.length)
        return states
    new_x = tgt.position + spec.kind.dx
    moved = VehicleState(new_x, tgt.velocity, tgt.acceleration, tgt.vclass, tgt.length)
    states[spec.target] = moved
    for follower in range(n):
        lead = follower - 1
        if lead < 0:
            if circumference is None:
                continue
            lead = n - 1
        if follower != spec.target and lead != spec.target:
            continue
        wrap = circumference if (circumference is not None and follower == 0) else 0.0
        gap = states[lead].position + wrap - states[follower].position - states[lead].length
        if gap <= 0.0:
            raise DomainError("inject_perturbation: offset would create a nonpositive gap")
    return states


def _resolve_delays(config: SimConfig, p: IdmParams,
                    classes: Sequence[VehicleClass]) -> np.ndarray:
    base = config.t_react if config.t_react is not None else p.t_react
    taus = np.full(len(classes), float(base))
    for i, c in enumerate(classes):
        if c is VehicleClass.CONNECTED and config.t_react_cv is not None:
            taus[i] = config.t_react_cv
        if c is VehicleClass.HUMAN and config.t_react_hv is not None:
            taus[i] = config.t_react_hv
    return taus


class Simulator:
    """Fixed-step integrator for one scenario; step() advances a single dt.

    State arrays hold unwrapped positions (a ring vehicle's coordinate
    grows without bound); gaps are formed leader-minus-follower with a
    one-lap correction for the vehicle behind the wrap point.
    """

    def __init__(self, scenario: ScenarioSpec, config: SimConfig,
                 origin: float = 0.0):
        self.scenario = scenario
        self.config = config
        p, cp, eq = scenario.p, scenario.cp, scenario.initial
        self.p, self.cp, self.eq = p, cp, eq
        comp = scenario.composition
        self.n = comp.n_vehicles
        if self.n < 2:
            raise DomainError("Simulator: need at least two vehicles")
        self.classes = tuple(comp.classes())
        self.is_cv = np.array([c is VehicleClass.CONNECTED for c in self.classes])
        self.lengths = np.full(self.n, p.length)
        self.ring = isinstance(scenario.boundary, RingRoad)

        spacing = eq.gap + p.length
        if self.ring:
            c_given = scenario.boundary.circumference
            self.circumference = self.n * spacing if c_given is None else float(c_given)
            if abs(self.circumference - self.n * spacing) > 1e-6:
                raise DomainError("RingRoad: circumference must equal N*(s_e + l) "
                                  "so the equilibrium tiles the ring")
            self.profile = None
        else:
            self.circumference = None
            self.profile = scenario.boundary.leader_profile

        self.pert = scenario.perturbation
        if self.pert is not None:
            self._validate_perturbation()
        self.pert_applied_at: Optional[float] = None

        # state at time t = k*dt
        self.k = 0
        self.x = origin - np.arange(self.n) * spacing
        self.v = np.full(self.n, eq.speed)
        self.a = np.zeros(self.n)

        self.taus = _resolve_delays(config, p, self.classes)
        depth = int(math.ceil(2.0 * float(self.taus.max()) / config.dt)) + 2
        self.depth = max(depth, 3)
        self._hx = np.empty((self.depth, self.n))
        self._hv = np.empty((self.depth, self.n))
        self._ha = np.zeros((self.depth, self.n))
        self._head = 0
        # prime the history with the uniform-motion equilibrium for t <= 0
        for r in range(self.depth):
            self._hx[r] = self.x - eq.speed * r * config.dt
            self._hv[r] = eq.speed
        self.collision: Optional[CollisionEvent] = None

        self._leader_idx = np.arange(self.n) - 1
        self._leader_wrap = np.zeros(self.n)
        if self.ring:
            self._leader_idx[0] = self.n - 1
            self._leader_wrap[0] = self.circumference
        self._model_lo = 0 if self.ring else 1  # first model-controlled index
        self._build_candidates()

        self._records: List[Tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self._recorded_k = -1

    def _validate_perturbation(self):
        pert, eq = self.pert, self.eq
        if not 0 <= pert.target < self.n:
            raise DomainError("PerturbationSpec: target out of range")
        if not self.ring and pert.target == 0:
            raise DomainError("PerturbationSpec: the open-road profile leader cannot be perturbed")
        if isinstance(pert.kind, VelocityPulse):
            if abs(pert.kind.dv) > 0.1 * eq.speed + 1e-12:
                raise DomainError("PerturbationSpec: |dv| must be <= 0.1*v_e (linear regime)")
        else:
            if abs(pert.kind.dx) > 0.1 * eq.gap + 1e-12:
                raise DomainError("PerturbationSpec: |dx| must be <= 0.1*s_e (linear regime)")

    def _build_candidates(self):
        """First cp.m connected predecessors of every CV, in chain order.
        Communication range and the half-circumference rule are distance
        based and applied per step; with positive gaps the in-range set is
        always a prefix of this table."""
        cand: List[List[Tuple[int, float]]] = [[] for _ in range(self.n)]
        if self.cp.m > 0 and self.is_cv.any():
            for i in range(self.n):
                if not self.is_cv[i]:
                    continue
                for d in range(1, self.n):
                    j = i - d
                    if not self.ring and j < 0:
                        break
                    jj = j % self.n
                    if self.is_cv[jj]:
                        wrap = self.circumference if (self.ring and j < 0) else 0.0
                        cand[i].append((jj, wrap))
                        if len(cand[i]) == self.cp.m:
                            break
        kmax = max((len(c) for c in cand), default=0)
        self._kmax = kmax
        if kmax == 0:
            return
        self._nbr_idx = np.zeros((self.n, kmax), dtype=int)
        self._nbr_wrap = np.zeros((self.n, kmax))
        self._nbr_pad = np.zeros((self.n, kmax), dtype=bool)
        for i, lst in enumerate(cand):
            for kk, (jj, wrap) in enumerate(lst):
                self._nbr_idx[i, kk] = jj
                self._nbr_wrap[i, kk] = wrap
                self._nbr_pad[i, kk] = True
        self._nbr_ordinals = np.arange(1, kmax + 1)

    # -- history ------------------------------------------------------------

    def _row(self, r: int) -> int:
        return (self._head + r) % self.depth

    def _push_row(self, x, v, a):
        self._head = (self._head - 1) % self.depth
        self._hx[self._head] = x
        self._hv[self._head] = v
        self._ha[self._head] = a

    def _sample(self, tau: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full state arrays at head time minus tau, linearly interpolated."""
        steps = tau / self.config.dt
        r_lo = int(math.floor(steps))
        frac = steps - r_lo
        if r_lo >= self.depth - 1:
            r_lo, frac = self.depth - 2, 1.0
        lo, hi = self._row(r_lo), self._row(r_lo + 1)
        if frac == 0.0:
            return self._hx[lo], self._hv[lo], self._ha[lo]
        w = frac
        return ((1.0 - w) * self._hx[lo] + w * self._hx[hi],
                (1.0 - w) * self._hv[lo] + w * self._hv[hi],
                (1.0 - w) * self._ha[lo] + w * self._ha[hi])

    # -- dynamics -----------------------------------------------------------

    def _model_acceleration(self) -> np.ndarray:
        """Accelerations of all model-controlled vehicles from inputs at the
        head time minus each vehicle's reaction delay."""
        acc = np.zeros(self.n)
        for tau in np.unique(self.taus):
            group = self.taus == tau
            group[:self._model_lo] = False
            if not group.any():
                continue
            xd, vd, ad = self._sample(float(tau))
            lead = self._leader_idx
            gaps = xd[lead] + self._leader_wrap - xd - self.lengths[lead]
            dv = vd - vd[lead]
            idx = np.nonzero(group)[0]
            acc[idx] = idm_acceleration(gaps[idx], vd[idx], dv[idx], self.p)
            if self._kmax > 0 and (self.cp.kv > 0.0 or self.cp.ka > 0.0):
                cvsel = idx[self.is_cv[idx]]
                if cvsel.size:
                    acc[cvsel] += self._cv_term(cvsel, xd, vd, ad)
        return acc

    def _cv_term(self, rows: np.ndarray, xd, vd, ad) -> np.ndarray:
        nbr = self._nbr_idx[rows]
        xn = xd[nbr] + self._nbr_wrap[rows]
        center = xn - xd[rows, None]
        net = center - self.lengths[nbr]
        valid = self._nbr_pad[rows] & (net <= self.cp.comm_range)
        if self.ring:
            valid &= center - self.circumference / 2.0 <= 1e-9
        safe_net = np.where(valid, net, 1.0)
        w = weight_values(self.cp.weights, safe_net, self._nbr_ordinals) * valid
        dv = vd[rows, None] - vd[nbr]
        return -self.cp.kv * np.sum(w * dv, axis=1) + self.cp.ka * np.sum(w * ad[nbr], axis=1)

    def _apply_cap(self, a: np.ndarray) -> np.ndarray:
        cap = self.config.deceleration_cap
        return a if cap is None else np.maximum(a, -cap)

    def _check_pert(self):
        pert = self.pert
        if pert is None or self.pert_applied_at is not None:
            return
        t = self.k * self.config.dt
        if t < pert.kind.at - 1e-9:
            return
        if isinstance(pert.kind, VelocityPulse):
            new_v = self.v[pert.target] + pert.kind.dv
            if new_v < 0.0:
                raise DomainError("perturbation would drive velocity negative")
            self.v = self.v.copy()
            self.v[pert.target] = new_v
        else:
            x2 = self.x.copy()
            x2[pert.target] += pert.kind.dx
            lead = self._leader_idx
            gaps = x2[lead] + self._leader_wrap - x2 - self.lengths[lead]
            if self.ring:
                bad = gaps <= 0.0
            else:
                bad = np.concatenate(([False], gaps[1:] <= 0.0))
            if bad.any():
                raise DomainError("perturbation would create a nonpositive gap")
            self.x = x2
        self._hx[self._head] = self.x
        self._hv[self._head] = self.v
        self.pert_applied_at = t

    def current_gaps(self) -> np.ndarray:
        lead = self._leader_idx
        gaps = self.x[lead] + self._leader_wrap - self.x - self.lengths[lead]
        if not self.ring:
            gaps[0] = np.nan
        return gaps

    def _record(self):
        self._records.append((self.k * self.config.dt, self.x.copy(), self.v.copy(),
                              self.a.copy(), self.current_gaps()))
        self._recorded_k = self.k

    def step(self):
        """Advance the platoon by one dt; flags a collision event (and stops
        the run) if any net gap closes to zero or below."""
        if self.collision is not None:
            return
        cfg = self.config
        dt = cfg.dt
        self._check_pert()

        a1 = self._apply_cap(self._model_acceleration())
        t = self.k * dt
        if not self.ring:
            a1[0] = (self.profile(t + dt) - self.profile(t)) / dt
        self.a = a1
        self._ha[self._head] = a1
        if self.k % cfg.sample_stride == 0:
            self._record()

        if cfg.integrator is Integrator.EULER:
            x_new = self.x + self.v * dt
            v_new = np.maximum(self.v + a1 * dt, cfg.velocity_floor)
            if not self.ring:
                v_new[0] = self.profile(t + dt)
            self._push_row(x_new, v_new, a1)
        else:
            x_pred = self.x + self.v * dt
            v_pred = np.maximum(self.v + a1 * dt, cfg.velocity_floor)
            if not self.ring:
                v_pred[0] = self.profile(t + dt)
            self._push_row(x_pred, v_pred, a1)
            a2 = self._apply_cap(self._model_acceleration())
            if not self.ring:
                a2[0] = a1[0]
            x_new = self.x + 0.5 * dt * (self.v + v_pred)
            v_new = np.maximum(self.v + 0.5 * dt * (a1 + a2), cfg.velocity_floor)
            if not self.ring:
                v_new[0] = self.profile(t + dt)
            self._hx[self._head] = x_new
            self._hv[self._head] = v_new

        self.x, self.v = x_new, v_new
        self.k += 1

        gaps = self.current_gaps()
        closed = gaps <= 0.0 if self.ring else np.concatenate(([False], gaps[1:] <= 0.0))
        if closed.any():
            worst = int(np.nanargmin(np.where(closed, gaps, np.inf)))
            self.collision = CollisionEvent(time=self.k * dt, follower=worst,
                                            leader=int(self._leader_idx[worst]))
            self._record()

    def platoon_states(self) -> List[VehicleState]:
        return [VehicleState(float(self.x[i]), float(self.v[i]), float(self.a[i]),
                             self.classes[i], float(self.lengths[i]))
                for i in range(self.n)]

    def run(self) -> Trajectory:
        steps = int(round(self.config.duration / self.config.dt))
        for _ in range(steps):
            if self.collision is not None:
                break
            self.step()
        if self.collision is None and self._recorded_k != self.k:
            # close the trajectory with the final state and its acceleration
            self._check_pert()
            self.a = self._apply_cap(self._model_acceleration())
            if not self.ring:
                t = self.k * self.config.dt
                self.a[0] = (self.profile(t + self.config.dt) - self.profile(t)) / self.config.dt
            self._record()
        times = np.array([r[0] for r in self._records])
        return Trajectory(
            times=times,
            x=np.array([r[1] for r in self._records]),
            v=np.array([r[2] for r in self._records]),
            a=np.array([r[3] for r in self._records]),
            gap=np.array([r[4] for r in self._records]),
            classes=self.classes,
            eq=self.eq,
            ring=self.ring,
            circumference=self.circumference,
            perturbation=self.pert,
            applied_at=self.pert_applied_at,
            collision=self.collision,
            dt=self.config.dt,
        )


def run(scenario: ScenarioSpec, config: SimConfig) -> Trajectory:
    """Simulate the scenario to its duration (or first collision)."""
    return Simulator(scenario, config).run()


class GrowthClass(Enum):
    DECAYING = "decaying"
    GROWING = "growing"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class GrowthReport:
    """Per-vehicle peak gap deviations in follower-chain order and the
    tail-to-source amplification ratio."""

    classification: GrowthClass
    rho: float
    chain_peaks: np.ndarray
    perturbed: int
    collision: Optional[CollisionEvent]


# Classification band: amplification within 5% of unity counts as marginal,
# absorbing finite-platoon and finite-horizon effects near the boundary.
GROWTH_EPSILON = 0.05

# Front detection threshold, relative to the perturbed vehicle's direct
# response, for the ring's first-pass measurement windows.
_FRONT_RTOL = 0.02


def _first_pass_windows(dev: np.ndarray, times: np.ndarray, n: int) -> np.ndarray:
    """Per-chain-position end times limiting each peak measurement to the
    perturbation's first traversal of the ring.

    Without this, a growing wave wraps around and re-inflates the source
    vehicle's own peak, silently flattening the amplification ratio.  The
    front arrival times give a per-vehicle wave speed; each window closes
    0.8 lap after the front so the wrapped wave stays out.
    """
    horizon = times[-1]
    span = horizon - times[0]
    direct = dev[times <= times[0] + min(40.0, span / 4.0), 0]
    threshold = max(_FRONT_RTOL * float(direct.max(initial=0.0)), 1e-7)

    t_front = np.full(n, np.inf)
    for c in range(n):
        hit = np.nonzero(dev[:, c] >= threshold)[0]
        if hit.size:
            t_front[c] = times[hit[0]]
    t_front = np.maximum.accumulate(np.where(np.isfinite(t_front), t_front, np.inf))

    detected = np.isfinite(t_front)
    prefix = int(np.argmin(detected)) if not detected.all() else n
    if prefix < max(3, n // 10):
        return np.full(n, horizon)
    steps = np.diff(t_front[:prefix])
    per_vehicle = float(np.median(steps)) if steps.size else 0.0
    if per_vehicle <= 0.0:
        return np.full(n, horizon)
    lap = n * per_vehicle
    ends = np.where(np.isfinite(t_front), t_front + 0.8 * lap, horizon)
    return np.minimum(ends, horizon)


def measure_growth(traj: Trajectory, eq: Optional[EquilibriumState] = None) -> GrowthReport:
    """Classify the perturbation response of a simulated platoon.

    Peak gap deviations D_c = max_t |s(t) - s_e| are taken per vehicle in
    follower-chain order from the perturbed one; the amplification ratio
    rho = D_tail / D_source is compared against 1 with a +/-5% band.  A
    collision always classifies as growing; a trajectory with no
    measurable deviation (all D below 1e-9) is indeterminate.
    """
    eq = eq if eq is not None else traj.eq
    if traj.perturbation is None or traj.applied_at is None:
        raise IndeterminateGrowth("measure_growth: trajectory was never perturbed")
    n = traj.n_vehicles
    p_idx = traj.perturbation.target
    if traj.ring:
        chain = [(p_idx + c) % n for c in range(n)]
    else:
        chain = list(range(p_idx, n))
    sel = traj.times >= traj.applied_at - 1e-12
    times = traj.times[sel]
    dev = np.abs(traj.gap[np.ix_(sel, chain)] - eq.gap)

    if traj.ring and traj.collision is None:
        ends = _first_pass_windows(dev, times, len(chain))
    else:
        ends = np.full(len(chain), times[-1])
    peaks = np.array([float(dev[times <= ends[c], c].max(initial=0.0))
                      for c in range(len(chain))])

    if traj.collision is not None:
        return GrowthReport(GrowthClass.GROWING, float("inf"), peaks, p_idx,
                            traj.collision)
    if np.all(peaks < 1e-9):
        raise IndeterminateGrowth("measure_growth: no deviation above 1e-9 m")
    rho = peaks[-1] / max(peaks[0], 1e-12)
    if rho < 1.0 - GROWTH_EPSILON:
        cls = GrowthClass.DECAYING
    elif rho > 1.0 + GROWTH_EPSILON:
        cls = GrowthClass.GROWING
    else:
        cls = GrowthClass.MARGINAL
    return GrowthReport(cls, float(rho), peaks, p_idx, None)
