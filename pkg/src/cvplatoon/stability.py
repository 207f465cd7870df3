"""Linear string-stability criterion and parameter-space sweeps.

Linearizing the acceleration law around uniform flow gives the partial
derivatives g1 (gap), g2 (speed), g3 (speed difference) of the IDM term
and the per-unit-weight derivatives f4 = -kv, f5 = ka of the feedback
term.  A platoon is string stable when

    g1 - g2^2/2 - g1*g2*T' - g2*g3 + f4*W - g2*f5*W < 0

with W the sum of the connectivity weights evaluated at the equilibrium
headways and T' the driver reaction time.  Sweeping (a_m, T_d) cells
against this criterion reproduces the stability diagram.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .model import (
    ConnectivityParams,
    DomainError,
    EquilibriumState,
    IdmParams,
    compute_weights,
    equilibrium_state,
    idm_acceleration,
)

# |lhs| at or below this band counts as marginal (reported unstable), so
# "stable" always means strict decay.
MARGINAL_BAND = 1e-12


@dataclass(frozen=True)
class LinearCoefficients:
    """Equilibrium linearization of the acceleration law."""

    g1: float          # d(idm)/d(gap) at equilibrium, 1/s^2
    g2: float          # d(idm)/d(speed), 1/s
    g3: float          # d(idm)/d(speed difference), 1/s
    f4: float          # per-unit-weight d(feedback)/d(speed difference) = -kv
    f5: float          # per-unit-weight d(feedback)/d(acceleration) = ka
    weight_sum: float  # sum of weights at the equilibrium headways
    t_react: float     # driver reaction time (s)


@dataclass(frozen=True)
class StabilityVerdict:
    """Criterion value and its classification at one parameter point."""

    lhs: float
    stable: bool
    margin: float
    label: str  # 'stable' | 'unstable' | 'marginal' | 'no-equilibrium'


NO_EQUILIBRIUM = StabilityVerdict(lhs=float("nan"), stable=False,
                                  margin=float("nan"), label="no-equilibrium")


def analytic_partials(p: IdmParams, eq: EquilibriumState) -> Tuple[float, float, float]:
    """Closed-form partial derivatives (g1, g2, g3) at the equilibrium.

    With ss = s0 + v_e*T (the desired gap at zero speed difference):

        g1 =  2*a0*ss^2 / s_e^3
        g2 = -a0*(delta*v_e^(delta-1)/v0^delta + 2*T*ss/s_e^2)
        g3 = -a0*v_e*ss / (s_e^2*sqrt(a0*b0))
    """
    se, ve = eq.gap, eq.speed
    ss = p.s0 + ve * p.T
    g1 = 2.0 * p.a0 * ss ** 2 / se ** 3
    g2 = -p.a0 * (p.delta * ve ** (p.delta - 1.0) / p.v0 ** p.delta
                  + 2.0 * p.T * ss / se ** 2)
    g3 = -p.a0 * ve * ss / (se ** 2 * math.sqrt(p.a0 * p.b0))
    # IDM attraction/damping signs at any valid equilibrium
    assert g1 > 0.0 and g2 < 0.0 and g3 <= 0.0
    return g1, g2, g3


def finite_difference_partials(p: IdmParams, eq: EquilibriumState,
                               h: float = 1e-5) -> Tuple[float, float, float]:
    """Central-difference estimate of (g1, g2, g3); oracle for the closed forms."""
    if h <= 0.0:
        raise DomainError("finite_difference_partials: h must be > 0")
    se, ve = eq.gap, eq.speed
    if se - h <= 0.0:
        raise DomainError("finite_difference_partials: step exceeds the gap")
    g1 = (idm_acceleration(se + h, ve, 0.0, p)
          - idm_acceleration(se - h, ve, 0.0, p)) / (2.0 * h)
    g2 = (idm_acceleration(se, ve + h, 0.0, p)
          - idm_acceleration(se, max(ve - h, 0.0), 0.0, p)) / (h + min(ve, h))
    g3 = (idm_acceleration(se, ve, h, p)
          - idm_acceleration(se, ve, -h, p)) / (2.0 * h)
    return g1, g2, g3


def stability_lhs(c: LinearCoefficients) -> float:
    """Criterion left-hand side; the platoon is string stable when it is < 0."""
    return (c.g1
            - 0.5 * c.g2 ** 2
            - c.g1 * c.g2 * c.t_react
            - c.g2 * c.g3
            + c.f4 * c.weight_sum
            - c.g2 * c.f5 * c.weight_sum)


def _verdict_from_lhs(lhs: float) -> StabilityVerdict:
    if abs(lhs) <= MARGINAL_BAND:
        return StabilityVerdict(lhs=lhs, stable=False, margin=abs(lhs), label="marginal")
    if lhs < 0.0:
        return StabilityVerdict(lhs=lhs, stable=True, margin=abs(lhs), label="stable")
    return StabilityVerdict(lhs=lhs, stable=False, margin=abs(lhs), label="unstable")


def equilibrium_cv_headways(eq: EquilibriumState, p: IdmParams,
                            cv_spacing: int, m_cv: int) -> List[float]:
    """Net gaps to the k-th connected predecessor in the uniform platoon.

    With cv_spacing platoon positions between consecutive connected
    vehicles, the k-th one sits cv_spacing*k vehicles ahead, so its net
    gap is cv_spacing*k*(s_e + l) - l.
    """
    if cv_spacing < 1:
        raise DomainError("cv_spacing must be >= 1")
    return [cv_spacing * k * (eq.gap + p.length) - p.length
            for k in range(1, m_cv + 1)]


def linear_coefficients(p: IdmParams, cp: ConnectivityParams, v_e: float,
                        cv_spacing: int = 3, m_cv: int = 0) -> LinearCoefficients:
    """Assemble the linearization at speed v_e for m_cv connected predecessors."""
    eq = equilibrium_state(v_e, p)
    g1, g2, g3 = analytic_partials(p, eq)
    headways = [d for d in equilibrium_cv_headways(eq, p, cv_spacing, m_cv)
                if d <= cp.comm_range]
    weight_sum = float(sum(compute_weights(headways, cp.weights)))
    return LinearCoefficients(g1=g1, g2=g2, g3=g3, f4=-cp.kv, f5=cp.ka,
                              weight_sum=weight_sum, t_react=p.t_react)


def classify_point(p: IdmParams, cp: ConnectivityParams, v_e: float,
                   cv_spacing: int = 3, m_cv: int = 0) -> StabilityVerdict:
    """Evaluate the criterion at one parameter point."""
    coeffs = linear_coefficients(p, cp, v_e, cv_spacing, m_cv)
    return _verdict_from_lhs(stability_lhs(coeffs))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular scan over maximum acceleration a_m and time headway T_d.

    Each cell substitutes a_m for IdmParams.a0 and T_d for IdmParams.T and
    recomputes the equilibrium at v_e.  Axis values are min, min+step, ...
    inclusive of max (linspace with round((max-min)/step)+1 points, so the
    endpoints are hit exactly).
    """

    a_m_min: float = 0.3
    a_m_max: float = 2.5
    a_m_step: float = 2.2 / 49.0
    t_d_min: float = 0.5
    t_d_max: float = 2.5
    t_d_step: float = 2.0 / 49.0
    idm: IdmParams = field(default_factory=IdmParams)
    cp: ConnectivityParams = field(default_factory=ConnectivityParams)
    v_e: float = 20.0
    cv_spacing: int = 3
    m_cv: int = 2

    def __post_init__(self):
        for lo, hi, st, name in ((self.a_m_min, self.a_m_max, self.a_m_step, "a_m"),
                                 (self.t_d_min, self.t_d_max, self.t_d_step, "T_d")):
            if st <= 0.0:
                raise DomainError(f"GridSpec: {name} step must be > 0")
            if hi < lo:
                raise DomainError(f"GridSpec: {name} range is empty")

    @staticmethod
    def _axis(lo: float, hi: float, step: float) -> np.ndarray:
        n = int(round((hi - lo) / step)) + 1 if hi > lo else 1
        return np.linspace(lo, hi, max(n, 1))

    def a_m_values(self) -> np.ndarray:
        return self._axis(self.a_m_min, self.a_m_max, self.a_m_step)

    def t_d_values(self) -> np.ndarray:
        return self._axis(self.t_d_min, self.t_d_max, self.t_d_step)


@dataclass(frozen=True)
class StabilityMapGrid:
    """Dense verdict grid, row-major with T_d outer and a_m inner."""

    spec: GridSpec
    cells: Tuple[Tuple[StabilityVerdict, ...], ...]

    def lhs_array(self) -> np.ndarray:
        return np.array([[c.lhs for c in row] for row in self.cells])

    def labels(self) -> List[List[str]]:
        return [[c.label for c in row] for row in self.cells]

    def stable_mask(self) -> np.ndarray:
        return np.array([[c.stable for c in row] for row in self.cells])


def _classify_row(args) -> Tuple[StabilityVerdict, ...]:
    spec, t_d = args
    row = []
    for a_m in spec.a_m_values():
        p_cell = replace(spec.idm, a0=float(a_m), T=float(t_d))
        try:
            row.append(classify_point(p_cell, spec.cp, spec.v_e,
                                      spec.cv_spacing, spec.m_cv))
        except DomainError:
            row.append(NO_EQUILIBRIUM)
    return tuple(row)


def stability_map(spec: GridSpec, workers: int = 1) -> StabilityMapGrid:
    """Classify every grid cell; cells with no equilibrium at v_e are marked
    rather than aborting the sweep.

    Cells are independent, so the sweep may be parallelized; the result is
    identical for any worker count.
    """
    jobs = [(spec, float(t_d)) for t_d in spec.t_d_values()]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            rows = pool.map(_classify_row, jobs)
    else:
        rows = [_classify_row(job) for job in jobs]
    return StabilityMapGrid(spec=spec, cells=tuple(rows))


def region_area(grid: StabilityMapGrid) -> float:
    """Fraction of classified cells that are stable.

    No-equilibrium cells are excluded from both numerator and denominator;
    a grid with none left raises a domain error.
    """
    stable = 0
    classified = 0
    for row in grid.cells:
        for cell in row:
            if cell.label == "no-equilibrium":
                continue
            classified += 1
            stable += int(cell.stable)
    if classified == 0:
        raise DomainError("region_area: every cell lacks an equilibrium; area undefined")
    return stable / classified
