"""Feature-domain runtime rule with activation-rate tracking.

When a stage's likelihood ratio is nondecreasing in the symbol, the belief
threshold crossed at that stage maps to a threshold on the raw symbol, so
the deployed sensor never needs posterior arithmetic: it compares y to a
per-stage scalar eta and nudges eta whenever the observed activation rate
drifts from the rate the solved policy would produce.  Stages that fail the
monotonicity check keep the belief-domain rule.

Updates use one shared step size mu: the rate estimate is an EWMA of the
activation indicator, and eta moves by mu times the tracking error, clamped
to the symbol range.  With integer symbols any eta in (y*-1, y*] encodes
the same decision rule as the exact cut y*, which is what the update
settles into when the target rate is achievable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cascade import Policy, SystemSpec
from .errors import GuidedProcError, ModelFormatError
from .models import BeliefGrid, BeliefTable, FeatureModel, symbol_evidence, symbol_posteriors

__all__ = [
    "ActivationTargets",
    "AdaptiveState",
    "is_monotone_ratio",
    "compute_activation_targets",
    "stationary_targets",
    "prepare_adaptive",
    "adaptive_step",
    "adaptive_observe",
    "adaptive_decide",
    "feature_cut",
]

# enumeration of reachable beliefs stays exact; refuse pathological blowups
_MAX_BELIEF_STATES = 500_000


def is_monotone_ratio(model: FeatureModel) -> bool:
    """True when the likelihood ratio is nondecreasing over the alphabet."""
    r = model.ratios()
    return bool(np.all(r[1:] >= r[:-1] * (1.0 - 1e-12) - 1e-15))


@dataclass(frozen=True)
class ActivationTargets:
    """Per-stage activation probability as a function of incoming belief,
    tabulated on the solver grid for the deployed thresholds."""

    grid: BeliefGrid
    tables: tuple[BeliefTable, ...]
    thresholds: np.ndarray

    def __call__(self, stage_index: int, belief):
        return self.tables[stage_index](belief)


def compute_activation_targets(spec: SystemSpec, policy: Policy, grid=None) -> ActivationTargets:
    """Tabulate q_i(b) = P(stage i activates | belief b) on the grid.

    Activation means passing the stage's deployed threshold: continuing for
    intermediate stages, declaring positive at the last one.
    """
    grid = policy.grid if grid is None else grid
    tables = []
    for stage, tau in zip(spec.stages, policy.thresholds):
        post = symbol_posteriors(stage.model, grid.points)
        ev = symbol_evidence(stage.model, grid.points)
        q = np.sum(ev * (post >= tau), axis=0)
        tables.append(BeliefTable(grid, q))
    thresholds = np.asarray(policy.thresholds, dtype=np.float64).copy()
    thresholds.setflags(write=False)
    return ActivationTargets(grid=grid, tables=tuple(tables), thresholds=thresholds)


def stationary_targets(spec: SystemSpec, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Exact long-run activation rates under the deployed thresholds.

    Returns (targets, reach): targets[i] is the activation probability at
    stage i conditioned on reaching it; reach[i] the unconditional reach
    probability.  Computed by enumerating the reachable belief atoms stage
    by stage, so the values match an infinite simulation exactly rather
    than up to grid interpolation.
    """
    n = spec.n_stages
    targets = np.zeros(n)
    reach = np.zeros(n)
    dist: dict[float, float] = {float(spec.prior): 1.0}
    p_reach = 1.0
    for k, stage in enumerate(spec.stages):
        if not dist:
            break
        reach[k] = p_reach
        tau = policy.thresholds[k]
        beliefs = np.array(sorted(dist))
        weights = np.array([dist[b] for b in beliefs])
        post = symbol_posteriors(stage.model, beliefs)
        ev = symbol_evidence(stage.model, beliefs)
        go = post >= tau
        act_by_belief = np.sum(ev * go, axis=0)
        act = float(weights @ act_by_belief)
        targets[k] = act
        if k == n - 1 or act <= 0.0:
            break
        nxt: dict[float, float] = {}
        ys, bs = np.nonzero(go)
        for y, j in zip(ys, bs):
            w = weights[j] * ev[y, j]
            if w > 0.0:
                key = float(post[y, j])
                nxt[key] = nxt.get(key, 0.0) + w
        if len(nxt) > _MAX_BELIEF_STATES:
            raise GuidedProcError("reachable belief set too large to enumerate exactly")
        dist = {b: w / act for b, w in nxt.items()}
        p_reach *= act
    return targets, reach


@dataclass(frozen=True)
class AdaptiveState:
    """Mutable-by-replacement runtime state: thresholds, rate estimates and
    the targets they chase."""

    eta: np.ndarray
    mu: float
    rate_estimates: np.ndarray
    targets: np.ndarray
    feature_rule: np.ndarray  # bool per stage; False = belief-domain fallback
    eta_limits: np.ndarray

    def __post_init__(self):
        for name in ("eta", "rate_estimates", "targets", "feature_rule", "eta_limits"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(bool if name == "feature_rule" else np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not 0.0 < self.mu < 1.0:
            raise ModelFormatError("mu must lie in (0, 1)")


def feature_cut(model: FeatureModel, belief: float, tau: float) -> int:
    """Smallest symbol whose posterior from `belief` clears tau.

    Requires a monotone likelihood ratio; alphabet size means "never".
    """
    if not is_monotone_ratio(model):
        raise ModelFormatError("feature cut undefined for non-monotone likelihood ratio")
    post = symbol_posteriors(model, np.array([belief]))[:, 0]
    hits = np.flatnonzero(post >= tau)
    return int(hits[0]) if hits.size else model.alphabet_size


def prepare_adaptive(spec: SystemSpec, policy: Policy, mu: float, eta0=None) -> AdaptiveState:
    """Build the runtime state for a solved policy.

    Non-monotone stages are flagged for the belief-domain fallback rather
    than given a feature threshold.  Initial thresholds default to the
    middle of each symbol range; rate estimates start at their targets so
    the first updates react to data, not initialization.
    """
    feature_rule = np.array([is_monotone_ratio(s.model) for s in spec.stages])
    limits = np.array([float(s.model.alphabet_size) for s in spec.stages])
    targets, _ = stationary_targets(spec, policy)
    if eta0 is None:
        eta = limits / 2.0
    else:
        eta = np.broadcast_to(np.asarray(eta0, dtype=np.float64), limits.shape).copy()
    if np.any(eta < 0.0) or np.any(eta > limits):
        raise ModelFormatError("initial thresholds must lie within each symbol range")
    return AdaptiveState(
        eta=eta,
        mu=mu,
        rate_estimates=targets.copy(),
        targets=targets,
        feature_rule=feature_rule,
        eta_limits=limits,
    )


def adaptive_step(state: AdaptiveState, stage_index: int, observed_rate, target) -> AdaptiveState:
    """Move one stage's threshold along the rate-tracking error."""
    eta = state.eta.copy()
    step = state.mu * (float(observed_rate) - float(target))
    eta[stage_index] = min(max(eta[stage_index] + step, 0.0), state.eta_limits[stage_index])
    return replace(state, eta=eta)


def adaptive_observe(state: AdaptiveState, stage_index: int, activated: bool) -> AdaptiveState:
    """Fold one activation indicator into the stage's rate estimate, then
    nudge its threshold toward the target rate."""
    rates = state.rate_estimates.copy()
    i = stage_index
    rates[i] = (1.0 - state.mu) * rates[i] + state.mu * (1.0 if activated else 0.0)
    state = replace(state, rate_estimates=rates)
    return adaptive_step(state, i, rates[i], state.targets[i])


def adaptive_decide(state: AdaptiveState, stage_index: int, y: int) -> bool:
    """Feature-domain decision: activate iff the symbol clears eta."""
    if not state.feature_rule[stage_index]:
        raise ModelFormatError(
            f"stage {stage_index} has a non-monotone likelihood ratio; "
            "use the belief-domain rule for it"
        )
    return bool(y >= state.eta[stage_index])
