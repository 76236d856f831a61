"""Energy-weighted censoring cascade: backward DP and risk accounting.

A cascade runs K feature stages in a fixed order.  Stage 1 always runs;
after observing stage i's feature the system either censors the frame
(declares state 0, idles every remaining stage at its off-cost) or pays the
next stage's on-cost to continue.  Only the last stage may declare state 1.
The objective is the Bayes detection risk plus ``energy_weight`` times the
expected per-frame energy.

The solver works backwards over a uniform belief grid.  Stage values are
piecewise-linear concave in the belief, so the continue region at each
intermediate stage is an upper interval of beliefs: the policy is a single
threshold per stage.  Thresholds are reported clamped to each stage's
admissible posterior interval (the deployed rule); the pre-clamp grid
thresholds are kept alongside because the risk decomposition must follow the
optimizer's stop/continue partition on the whole grid, including belief
values no trajectory can reach.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleBudgetError, ModelFormatError
from .models import (
    BeliefGrid,
    BeliefTable,
    FeatureModel,
    UncertaintyParams,
    posterior_update,
    symbol_evidence,
    symbol_posteriors,
)
from .robust import (
    BeliefInterval,
    RobustBand,
    least_favorable,
    model_posterior_bounds,
    solve_band,
)

__all__ = [
    "StageSpec",
    "SystemSpec",
    "Policy",
    "RiskReport",
    "CascadeOptimality",
    "tail_off_costs",
    "solve",
    "evaluate",
    "calibrate_lambda",
    "check_cascade_optimality",
    "build_system",
]


@dataclass(frozen=True)
class StageSpec:
    """One stage: its feature model, on/off energy costs, belief bounds."""

    model: FeatureModel
    on_cost: float
    off_cost: float = 0.0
    bounds: BeliefInterval = BeliefInterval(0.0, 1.0)

    def __post_init__(self):
        if not (self.on_cost > 0.0 and np.isfinite(self.on_cost)):
            raise ModelFormatError("on_cost must be positive and finite")
        if not (self.off_cost >= 0.0 and np.isfinite(self.off_cost)):
            raise ModelFormatError("off_cost must be nonnegative and finite")


@dataclass(frozen=True)
class SystemSpec:
    """A K-stage cascade with costs, prior, and exactly one energy knob."""

    stages: tuple[StageSpec, ...]
    miss_cost: float
    fa_cost: float
    prior: float
    energy_weight: float | None = None
    energy_budget: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if len(self.stages) < 2:
            raise ModelFormatError("a cascade needs at least 2 stages")
        if not (self.miss_cost > 0.0 and self.fa_cost > 0.0):
            raise ModelFormatError("miss_cost and fa_cost must be positive")
        if not 0.0 <= self.prior <= 1.0:
            raise ModelFormatError("prior must lie in [0, 1]")
        if (self.energy_weight is None) == (self.energy_budget is None):
            raise ModelFormatError("set exactly one of energy_weight or energy_budget")
        if self.energy_weight is not None and self.energy_weight < 0.0:
            raise ModelFormatError("energy_weight must be nonnegative")
        for k, st in enumerate(self.stages[1:], start=1):
            if not st.off_cost < st.on_cost:
                raise ModelFormatError(f"stage {k + 1}: off_cost must be below on_cost")

    @property
    def n_stages(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class Policy:
    """Solved cascade policy: thresholds plus the value tables behind them.

    thresholds[i] applies to the belief after stage i's update; the frame is
    censored when the belief falls strictly below it, and the last entry is
    the positive-declaration threshold fa/(fa+miss).  raw_thresholds are the
    pre-clamp grid values (see module docstring).
    """

    grid: BeliefGrid
    thresholds: tuple[float, ...]
    raw_thresholds: tuple[float, ...]
    value_tables: tuple[BeliefTable, ...]
    v0: float
    energy_weight: float


@dataclass(frozen=True)
class RiskReport:
    """Additive decomposition of the optimized objective."""

    total: float
    inter_miss: float
    final_miss: float
    final_fa: float
    energy: float
    weighted_energy: float


@dataclass(frozen=True)
class CascadeOptimality:
    """Per intermediate stage: largest belief where the cascade's value still
    beats an immediate positive declaration, and whether that belief clears
    the stage's admissible upper bound (in which case adding early positive
    decisions cannot improve the system)."""

    positive_thresholds: tuple[float, ...]
    per_stage: tuple[bool, ...]

    @property
    def all_hold(self) -> bool:
        return all(self.per_stage)


def tail_off_costs(stages) -> np.ndarray:
    """tail[i] = sum of off_costs of stages[i:]; tail[K] = 0.

    A stop after stage i idles stages i+1..K and charges tail[i+1].
    """
    offs = np.array([st.off_cost for st in stages], dtype=np.float64)
    tail = np.zeros(len(stages) + 1)
    tail[:-1] = offs[::-1].cumsum()[::-1]
    return tail


def _require_weight(spec: SystemSpec) -> float:
    if spec.energy_weight is None:
        raise ModelFormatError("solve needs energy_weight; use calibrate_lambda for budgets")
    return float(spec.energy_weight)


def solve(spec: SystemSpec, grid: BeliefGrid | None = None) -> Policy:
    """Backward DP over the belief grid; returns the threshold policy."""
    grid = grid or BeliefGrid()
    lam = _require_weight(spec)
    b = grid.points
    stages = spec.stages
    K = len(stages)
    tail = tail_off_costs(stages)

    values: list[np.ndarray] = [np.empty(0)] * K
    raw = [0.0] * K
    clamped = [0.0] * K

    v = np.minimum(spec.miss_cost * b, spec.fa_cost * (1.0 - b))
    values[K - 1] = v
    raw[K - 1] = clamped[K - 1] = spec.fa_cost / (spec.fa_cost + spec.miss_cost)

    for k in range(K - 2, -1, -1):
        nxt = stages[k + 1]
        post = symbol_posteriors(nxt.model, b)
        ev = symbol_evidence(nxt.model, b)
        cont = lam * nxt.on_cost + np.sum(ev * np.interp(post, b, v), axis=0)
        stop = spec.miss_cost * b + lam * tail[k + 1]
        v = np.minimum(stop, cont)
        values[k] = v

        below = np.flatnonzero(cont - stop < 0.0)
        raw[k] = float(b[below[0]]) if below.size else np.inf
        clamped[k] = min(max(raw[k], stages[k].bounds.lo), stages[k].bounds.hi)

    first = stages[0]
    post0 = symbol_posteriors(first.model, np.array([spec.prior]))[:, 0]
    ev0 = symbol_evidence(first.model, np.array([spec.prior]))[:, 0]
    v0 = lam * first.on_cost + float(np.sum(ev0 * np.interp(post0, b, values[0])))

    return Policy(
        grid=grid,
        thresholds=tuple(clamped),
        raw_thresholds=tuple(raw),
        value_tables=tuple(BeliefTable(grid, t) for t in values),
        v0=v0,
        energy_weight=lam,
    )


def evaluate(spec: SystemSpec, policy: Policy) -> RiskReport:
    """Risk decomposition of the fixed policy: no minimization anywhere.

    Four component tables are carried backwards (censoring miss, final miss,
    final false alarm, raw energy), each following the optimizer's grid
    stop/continue partition, so that weighted energy plus the three risk
    parts reproduces the solver's value tables identically.
    """
    grid = policy.grid
    b = grid.points
    lam = policy.energy_weight
    stages = spec.stages
    K = len(stages)
    tail = tail_off_costs(stages)

    tau_last = policy.thresholds[K - 1]
    positive = b >= tau_last
    inter_m = np.zeros_like(b)
    final_m = np.where(positive, 0.0, spec.miss_cost * b)
    final_fa = np.where(positive, spec.fa_cost * (1.0 - b), 0.0)
    energy = np.zeros_like(b)

    for k in range(K - 2, -1, -1):
        nxt = stages[k + 1]
        post = symbol_posteriors(nxt.model, b)
        ev = symbol_evidence(nxt.model, b)

        go = b >= policy.raw_thresholds[k]
        def carried(table, stop_vals, extra=0.0):
            cont = extra + np.sum(ev * np.interp(post, b, table), axis=0)
            return np.where(go, cont, stop_vals)

        inter_m = carried(inter_m, spec.miss_cost * b)
        final_m = carried(final_m, np.zeros_like(b))
        final_fa = carried(final_fa, np.zeros_like(b))
        energy = carried(energy, np.full_like(b, tail[k + 1]), extra=nxt.on_cost)

    first = stages[0]
    post0 = symbol_posteriors(first.model, np.array([spec.prior]))[:, 0]
    ev0 = symbol_evidence(first.model, np.array([spec.prior]))[:, 0]

    def root(table, extra=0.0):
        return extra + float(np.sum(ev0 * np.interp(post0, b, table)))

    e = root(energy, extra=first.on_cost)
    r_inter = root(inter_m)
    r_final_m = root(final_m)
    r_final_fa = root(final_fa)
    return RiskReport(
        total=lam * e + r_inter + r_final_m + r_final_fa,
        inter_miss=r_inter,
        final_miss=r_final_m,
        final_fa=r_final_fa,
        energy=e,
        weighted_energy=lam * e,
    )


def achievable_energy_range(spec: SystemSpec) -> tuple[float, float]:
    """[stop-everything energy, run-everything energy]."""
    tail = tail_off_costs(spec.stages)
    floor = spec.stages[0].on_cost + float(tail[1])
    ceil = float(sum(st.on_cost for st in spec.stages))
    return floor, ceil


def calibrate_lambda(
    spec: SystemSpec,
    grid: BeliefGrid | None = None,
    rel_tol: float = 1e-6,
    energy_tol: float = 1e-4,
) -> tuple[float, Policy]:
    """Smallest-energy-weight policy whose expected energy meets the budget.

    Expected energy is nonincreasing in the weight, so plain bisection works:
    the upper end always satisfies the budget, the lower end violates it.
    """
    grid = grid or BeliefGrid()
    if spec.energy_budget is None:
        raise ModelFormatError("calibrate_lambda needs a spec with energy_budget")
    target = float(spec.energy_budget)
    floor, ceil = achievable_energy_range(spec)
    if not floor <= target <= ceil:
        raise InfeasibleBudgetError(
            f"budget {target!r} outside achievable energy range [{floor!r}, {ceil!r}]"
        )

    def solved(lam: float) -> tuple[Policy, float]:
        pol = solve(replace(spec, energy_weight=lam, energy_budget=None), grid)
        rep = evaluate(replace(spec, energy_weight=lam, energy_budget=None), pol)
        return pol, rep.energy

    pol, e = solved(0.0)
    if e <= target:
        return 0.0, pol

    lo = 0.0
    hi = 1.0
    pol_hi, e_hi = solved(hi)
    while e_hi > target:
        lo, hi = hi, hi * 4.0
        pol_hi, e_hi = solved(hi)
        if hi > 1e30:
            raise InfeasibleBudgetError("energy weight bracketing diverged")

    while hi - lo > rel_tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        pol_mid, e_mid = solved(mid)
        if e_mid <= target:
            hi, pol_hi, e_hi = mid, pol_mid, e_mid
            if abs(e_mid - target) <= energy_tol:
                break
        else:
            lo = mid
    return hi, pol_hi


def check_cascade_optimality(spec: SystemSpec, policy: Policy) -> CascadeOptimality:
    """Would letting intermediate stages declare state 1 ever help?

    For each intermediate stage, find the largest grid belief at which the
    cascade's value still strictly beats declaring positive on the spot
    (paying the false-alarm risk plus the idle tail).  If that belief exceeds
    the stage's admissible upper bound, no reachable belief prefers the
    early positive, so the censoring-only cascade is already optimal there.
    """
    lam = policy.energy_weight
    b = policy.grid.points
    tail = tail_off_costs(spec.stages)
    betas = []
    verdicts = []
    for k in range(spec.n_stages - 1):
        declare_pos = spec.fa_cost * (1.0 - b) + lam * tail[k + 1]
        better = np.flatnonzero(policy.value_tables[k].values - declare_pos < 0.0)
        beta = float(b[better[-1]]) if better.size else -np.inf
        betas.append(beta)
        verdicts.append(beta > spec.stages[k].bounds.hi)
    return CascadeOptimality(tuple(betas), tuple(verdicts))


def build_system(
    models,
    on_costs,
    off_costs,
    miss_cost: float,
    fa_cost: float,
    prior: float,
    uncertainties=None,
    energy_weight: float | None = None,
    energy_budget: float | None = None,
) -> tuple[SystemSpec, tuple[RobustBand, ...]]:
    """Assemble a cascade from nominal models, robustifying stages 1..K-1.

    Intermediate stages with nonzero uncertainty are replaced by their
    least-favorable versions; the last stage is taken as exact.  Admissible
    belief intervals are propagated from the prior through each deployed
    stage model (the last stage keeps the full interval since its threshold
    is never clamped).  Returns the spec plus the per-stage bands.
    """
    models = list(models)
    K = len(models)
    if uncertainties is None:
        uncertainties = [None] * K
    uncertainties = [u or UncertaintyParams() for u in uncertainties]
    if len(uncertainties) != K:
        raise ModelFormatError("need one uncertainty entry per stage")
    if not uncertainties[-1].is_zero:
        raise ModelFormatError("the last stage is exact; its uncertainty must be zero")

    stages = []
    bands = []
    interval = BeliefInterval.point(prior)
    for k, (model, u) in enumerate(zip(models, uncertainties)):
        if k == K - 1:
            robust_model = model
            band = solve_band(model, UncertaintyParams())
            bounds = BeliefInterval.full()
        else:
            robust_model, band = least_favorable(model, u)
            # Bounds must track the deployed (renormalized) model, not the
            # band ends: the simulator compares beliefs to clamped thresholds
            # exactly, and the band drifts by the normalization residual.
            interval = model_posterior_bounds(interval, robust_model)
            bounds = interval
        bands.append(band)
        stages.append(
            StageSpec(
                model=robust_model,
                on_cost=float(on_costs[k]),
                off_cost=float(off_costs[k]),
                bounds=bounds,
            )
        )
    spec = SystemSpec(
        stages=tuple(stages),
        miss_cost=miss_cost,
        fa_cost=fa_cost,
        prior=prior,
        energy_weight=energy_weight,
        energy_budget=energy_budget,
    )
    return spec, tuple(bands)
