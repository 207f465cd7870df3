"""Cross-validation of the analytic criterion against simulated growth.

Samples parameter points over the (a_m, T_d) plane, evaluates the
stability criterion at each, simulates the perturbed ring, and checks
that the analytic verdict matches the measured growth classification.
Points too close to the stability boundary (|lhs| under a fraction of the
sample's median |lhs|) are excluded from the agreement requirement, since
neither a finite platoon nor a finite horizon can resolve them.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .model import equilibrium_state
from .simulation import (
    GrowthClass,
    IndeterminateGrowth,
    Integrator,
    PerturbationSpec,
    ScenarioSpec,
    SimConfig,
    VelocityPulse,
    measure_growth,
    run,
)
from .stability import linear_coefficients, stability_lhs


@dataclass(frozen=True)
class VerifyPoint:
    a_m: float
    t_d: float
    m: int
    lhs: float
    analytic: str      # 'stable' | 'unstable'
    simulated: str     # 'decaying' | 'growing' | 'marginal' | 'indeterminate'
    rho: float
    retained: bool
    agree: bool


@dataclass(frozen=True)
class VerifyResult:
    points: Tuple[VerifyPoint, ...]
    retained: int
    agreed: int
    excluded: int

    @property
    def all_agree(self) -> bool:
        return self.retained > 0 and self.agreed == self.retained


def sample_points(cfg: RunConfig, n_a: int = 5, n_t: int = 4) -> List[Tuple[float, float]]:
    """Uniform n_a x n_t sample over the configured grid ranges."""
    a_vals = np.linspace(cfg.grid.a_m_min, cfg.grid.a_m_max, n_a)
    t_vals = np.linspace(cfg.grid.t_d_min, cfg.grid.t_d_max, n_t)
    return [(float(a), float(t)) for t in t_vals for a in a_vals]


def _simulate_point(args) -> Tuple[str, float]:
    cfg, a_m, t_d, m, integrator = args
    p = replace(cfg.idm, a0=a_m, T=t_d)
    cp = replace(cfg.connectivity, m=m)
    eq = equilibrium_state(cfg.grid.v_e, p)
    pert = cfg.scenario.perturbation
    if pert is None:
        pert = PerturbationSpec(target=0, kind=VelocityPulse(dv=-0.5, at=10.0))
    scenario = ScenarioSpec(composition=cfg.composition, initial=eq,
                            perturbation=pert, p=p, cp=cp)
    sim_cfg = replace(cfg.sim, integrator=integrator)
    try:
        report = measure_growth(run(scenario, sim_cfg))
    except IndeterminateGrowth:
        return "indeterminate", float("nan")
    return report.classification.value, report.rho


def verify_batch(cfg: RunConfig,
                 m_values: Sequence[int] = (0, 2),
                 points: Optional[Sequence[Tuple[float, float]]] = None,
                 margin: float = 0.1,
                 integrator: Integrator = Integrator.HEUN,
                 workers: int = 1) -> VerifyResult:
    """Run the full criterion-vs-simulation batch.

    The margin filter retains a point when its |lhs| is at least ``margin``
    times the median |lhs| of its M-sample.  Heun is the default oracle
    integrator: first-order Euler error is enough to flip classifications
    at near-marginal points.
    """
    if points is None:
        points = sample_points(cfg)
    if not points:
        raise ValueError("verify_batch: empty point list")

    out: List[VerifyPoint] = []
    for m in m_values:
        lhss = []
        for a_m, t_d in points:
            p = replace(cfg.idm, a0=a_m, T=t_d)
            cp = replace(cfg.connectivity, m=m)
            lhss.append(stability_lhs(linear_coefficients(
                p, cp, cfg.grid.v_e, cfg.grid.cv_spacing, m)))
        cut = margin * float(np.median(np.abs(lhss)))

        jobs = [(cfg, a_m, t_d, m, integrator) for a_m, t_d in points]
        if workers > 1 and len(jobs) > 1:
            with multiprocessing.Pool(processes=workers) as pool:
                sims = pool.map(_simulate_point, jobs)
        else:
            sims = [_simulate_point(job) for job in jobs]

        for (a_m, t_d), lhs, (sim_label, rho) in zip(points, lhss, sims):
            analytic = "stable" if lhs < 0.0 else "unstable"
            retained = abs(lhs) >= cut
            agree = ((analytic == "stable" and sim_label == GrowthClass.DECAYING.value)
                     or (analytic == "unstable" and sim_label == GrowthClass.GROWING.value))
            out.append(VerifyPoint(a_m=a_m, t_d=t_d, m=m, lhs=lhs,
                                   analytic=analytic, simulated=sim_label,
                                   rho=rho, retained=retained, agree=agree))

    retained = sum(p.retained for p in out)
    agreed = sum(p.retained and p.agree for p in out)
    return VerifyResult(points=tuple(out), retained=retained, agreed=agreed,
                        excluded=len(out) - retained)
