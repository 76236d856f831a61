"""Model files and result bundles.

A model file is JSON: shared prices (miss_cost, fa_cost), a prior or a
prior sweep, one of energy_weight/energy_budget, an optional grid_size, and
either a "stages" list (cascade) or "nodes"/"edges"/"root" (graph).  Every
stage or node carries p0/p1 PMF arrays and on/off costs; cascade stages may
add an "uncertainty" block.  PMFs must sum to 1 within 1e-6; anything off
by more than 1e-9 is renormalized with a warning, closer ones silently.

Result bundles echo a sha256 over the canonical (sorted-keys, compact)
JSON of the model document plus the tool version, so any result can be
traced to the exact configuration that produced it.  Floats go through the
default JSON float repr, which round-trips float64 exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__
from .cascade import Policy, RiskReport, StageSpec, SystemSpec, build_system
from .errors import ModelFormatError
from .graph import DetectionGraph, GraphPolicy
from .models import BeliefGrid, FeatureModel, UncertaintyParams
from .robust import RobustBand

__all__ = [
    "ModelDocument",
    "load_model_file",
    "parse_model_document",
    "dump_model_file",
    "build_from_document",
    "config_hash",
    "result_bundle",
    "policy_payload",
    "policy_from_payload",
    "risk_payload",
    "sim_payload",
    "write_json",
    "finite_or_none",
    "band_payload",
    "graph_policy_payload",
]

MODEL_FORMAT = "guidedproc-model"
RENORM_WARN = 1e-9
RENORM_FAIL = 1e-6


@dataclass(frozen=True)
class ModelDocument:
    """Parsed model file plus the raw dict it came from (for hashing)."""

    kind: str  # "cascade" | "graph"
    miss_cost: float
    fa_cost: float
    prior: float | None
    prior_sweep: tuple[float, float, int] | None
    energy_weight: float | None
    energy_budget: float | None
    grid_size: int
    stages: tuple[tuple[FeatureModel, float, float, UncertaintyParams], ...] | None
    graph: DetectionGraph | None
    duty_cycle: tuple[float, float] | None  # (on_cost, off_cost) of the monolithic block
    raw: dict

    def default_prior(self) -> float:
        if self.prior is not None:
            return self.prior
        lo, hi, _ = self.prior_sweep
        return 0.5 * (lo + hi)

    def sweep_points(self) -> np.ndarray:
        if self.prior_sweep is None:
            return np.array([self.prior])
        lo, hi, n = self.prior_sweep
        return np.linspace(lo, hi, n)


def _as_float(raw, key, where, required=True, default=None):
    if key not in raw:
        if required:
            raise ModelFormatError(f"{where}: missing '{key}'")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelFormatError(f"{where}: '{key}' must be a number")
    return float(v)


def _load_pmf(values, where) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ModelFormatError(f"{where}: PMF must be a 1-D list of at least 2 masses")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ModelFormatError(f"{where}: PMF entries must be finite and nonnegative")
    s = float(arr.sum())
    if abs(s - 1.0) > RENORM_FAIL:
        raise ModelFormatError(f"{where}: PMF sums to {s!r}, beyond the {RENORM_FAIL} tolerance")
    if abs(s - 1.0) > RENORM_WARN:
        warnings.warn(f"{where}: PMF sums to {s!r}; renormalizing", stacklevel=2)
    return arr / s


def _load_detector(raw, where) -> tuple[FeatureModel, float, float]:
    if not isinstance(raw, dict):
        raise ModelFormatError(f"{where}: expected an object")
    p0 = _load_pmf(raw.get("p0"), f"{where}: p0") if "p0" in raw else None
    p1 = _load_pmf(raw.get("p1"), f"{where}: p1") if "p1" in raw else None
    if p0 is None or p1 is None:
        raise ModelFormatError(f"{where}: needs both 'p0' and 'p1'")
    if p0.size != p1.size:
        raise ModelFormatError(f"{where}: p0 and p1 must share one alphabet")
    on = _as_float(raw, "on_cost", where)
    off = _as_float(raw, "off_cost", where, required=False, default=0.0)
    return FeatureModel(p0=p0, p1=p1), on, off


def _load_uncertainty(raw, where) -> UncertaintyParams:
    block = raw.get("uncertainty")
    if block is None:
        return UncertaintyParams()
    if not isinstance(block, dict):
        raise ModelFormatError(f"{where}: 'uncertainty' must be an object")
    unknown = set(block) - {"eps0", "eps1", "nu0", "nu1"}
    if unknown:
        raise ModelFormatError(f"{where}: unknown uncertainty fields {sorted(unknown)}")
    get = lambda k: _as_float(block, k, f"{where}: uncertainty", required=False, default=0.0)
    return UncertaintyParams(get("eps0"), get("eps1"), get("nu0"), get("nu1"))


def parse_model_document(raw: dict) -> ModelDocument:
    if not isinstance(raw, dict):
        raise ModelFormatError("model file must hold a JSON object")
    if raw.get("format", MODEL_FORMAT) != MODEL_FORMAT:
        raise ModelFormatError(f"not a {MODEL_FORMAT} file")
    miss = _as_float(raw, "miss_cost", "model")
    fa = _as_float(raw, "fa_cost", "model")
    if miss <= 0.0 or fa <= 0.0:
        raise ModelFormatError("model: miss_cost and fa_cost must be positive")

    prior = _as_float(raw, "prior", "model", required=False)
    sweep = None
    if "prior_sweep" in raw:
        if prior is not None:
            raise ModelFormatError("model: give 'prior' or 'prior_sweep', not both")
        ps = raw["prior_sweep"]
        if not (isinstance(ps, list) and len(ps) == 3):
            raise ModelFormatError("model: prior_sweep must be [lo, hi, count]")
        sweep = (float(ps[0]), float(ps[1]), int(ps[2]))
        if not (0.0 <= sweep[0] <= sweep[1] <= 1.0 and sweep[2] >= 1):
            raise ModelFormatError("model: prior_sweep out of range")
    if prior is None and sweep is None:
        raise ModelFormatError("model: needs 'prior' or 'prior_sweep'")
    if prior is not None and not 0.0 <= prior <= 1.0:
        raise ModelFormatError("model: prior must lie in [0, 1]")

    weight = _as_float(raw, "energy_weight", "model", required=False)
    budget = _as_float(raw, "energy_budget", "model", required=False)
    if weight is not None and budget is not None:
        raise ModelFormatError("model: give energy_weight or energy_budget, not both")
    grid_size = int(raw.get("grid_size", BeliefGrid().size))

    duty = None
    if "duty_cycle" in raw:
        block = raw["duty_cycle"]
        if not isinstance(block, dict):
            raise ModelFormatError("model: 'duty_cycle' must be an object")
        duty = (
            _as_float(block, "on_cost", "duty_cycle"),
            _as_float(block, "off_cost", "duty_cycle"),
        )
        if not 0.0 <= duty[1] < duty[0]:
            raise ModelFormatError("duty_cycle: need 0 <= off_cost < on_cost")

    has_stages = "stages" in raw
    has_graph = "nodes" in raw or "edges" in raw or "root" in raw
    if has_stages == has_graph:
        raise ModelFormatError("model: give either 'stages' or a node graph")

    if has_stages:
        items = raw["stages"]
        if not (isinstance(items, list) and len(items) >= 2):
            raise ModelFormatError("model: 'stages' needs at least two entries")
        stages = []
        for i, item in enumerate(items):
            where = f"stage {i + 1}"
            model, on, off = _load_detector(item, where)
            stages.append((model, on, off, _load_uncertainty(item, where)))
        if not stages[-1][3].is_zero:
            raise ModelFormatError("last stage: uncertainty is not supported there")
        return ModelDocument(
            kind="cascade", miss_cost=miss, fa_cost=fa, prior=prior, prior_sweep=sweep,
            energy_weight=weight, energy_budget=budget, grid_size=grid_size,
            stages=tuple(stages), graph=None, duty_cycle=duty, raw=raw,
        )

    nodes_raw = raw.get("nodes")
    if not isinstance(nodes_raw, dict) or not nodes_raw:
        raise ModelFormatError("model: 'nodes' must map ids to detectors")
    nodes = {}
    for key, item in nodes_raw.items():
        try:
            nid = int(key)
        except ValueError:
            raise ModelFormatError(f"node {key!r}: ids must be integers") from None
        where = f"node {nid}"
        if "uncertainty" in item:
            raise ModelFormatError(f"{where}: uncertainty is only supported on cascade stages")
        model, on, off = _load_detector(item, where)
        nodes[nid] = StageSpec(model=model, on_cost=on, off_cost=off)
    edges_raw = raw.get("edges", [])
    edges: dict[int, tuple[int, ...]] = {}
    for pair in edges_raw:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ModelFormatError("model: edges must be [from, to] pairs")
        a, b = int(pair[0]), int(pair[1])
        edges[a] = edges.get(a, ()) + (b,)
    if "root" not in raw:
        raise ModelFormatError("model: graph form needs 'root'")
    graph = DetectionGraph(nodes=nodes, edges=edges, root=int(raw["root"]))
    return ModelDocument(
        kind="graph", miss_cost=miss, fa_cost=fa, prior=prior, prior_sweep=sweep,
        energy_weight=weight, energy_budget=budget, grid_size=grid_size,
        stages=None, graph=graph, duty_cycle=duty, raw=raw,
    )


def load_model_file(path) -> ModelDocument:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return parse_model_document(raw)


def dump_model_file(raw: dict, path) -> None:
    parse_model_document(raw)  # refuse to write a file we could not load
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_from_document(
    doc: ModelDocument,
    prior: float | None = None,
    energy_weight: float | None = None,
    energy_budget: float | None = None,
):
    """SystemSpec plus robustness bands for a cascade document.

    prior/energy overrides replace the document's values (sweeps pass one
    point at a time).
    """
    if doc.kind != "cascade":
        raise ModelFormatError("graph documents are solved with solve_graph")
    if energy_weight is None and energy_budget is None:
        energy_weight, energy_budget = doc.energy_weight, doc.energy_budget
    if energy_weight is None and energy_budget is None:
        raise ModelFormatError("model: needs energy_weight or energy_budget")
    use_prior = doc.default_prior() if prior is None else prior
    models = tuple(s[0] for s in doc.stages)
    return build_system(
        models,
        tuple(s[1] for s in doc.stages),
        tuple(s[2] for s in doc.stages),
        miss_cost=doc.miss_cost,
        fa_cost=doc.fa_cost,
        prior=use_prior,
        uncertainties=tuple(s[3] for s in doc.stages),
        energy_weight=energy_weight,
        energy_budget=energy_budget,
    )


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def result_bundle(doc: ModelDocument, **payload) -> dict:
    out = {
        "format": "guidedproc-result",
        "tool_version": __version__,
        "config_hash": config_hash(doc.raw),
    }
    out.update(payload)
    return out


def finite_or_none(x: float):
    return None if math.isinf(x) else float(x)


def policy_payload(policy: Policy) -> dict:
    # raw thresholds may be +inf (a stage that never continues); JSON has
    # no inf, so those serialize as null
    return {
        "grid_size": policy.grid.size,
        "energy_weight": policy.energy_weight,
        "thresholds": [float(t) for t in policy.thresholds],
        "raw_thresholds": [finite_or_none(t) for t in policy.raw_thresholds],
        "v0": policy.v0,
    }


def policy_from_payload(payload: dict) -> Policy:
    try:
        grid = BeliefGrid(int(payload["grid_size"]))
        thresholds = tuple(float(t) for t in payload["thresholds"])
        raw = tuple(math.inf if t is None else float(t) for t in payload["raw_thresholds"])
        return Policy(
            grid=grid,
            thresholds=thresholds,
            raw_thresholds=raw,
            value_tables=(),
            v0=float(payload["v0"]),
            energy_weight=float(payload["energy_weight"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"policy payload: {exc}") from exc


def band_payload(band: RobustBand) -> dict:
    return {
        "lo": band.lo,
        "hi": finite_or_none(band.hi),
        "residual0": band.residual0,
        "residual1": band.residual1,
    }


def risk_payload(report: RiskReport) -> dict:
    return {
        "total": report.total,
        "inter_miss": report.inter_miss,
        "final_miss": report.final_miss,
        "final_fa": report.final_fa,
        "energy": report.energy,
        "weighted_energy": report.weighted_energy,
    }


def sim_payload(report) -> dict:
    out = {
        "n_frames": report.n_frames,
        "n_target": report.n_target,
        "miss_count": report.miss_count,
        "fa_count": report.fa_count,
        "energy": report.energy,
        "energy_se": report.energy_se,
        "empirical_risk": report.empirical_risk,
        "risk_se": report.risk_se,
        "miss_rate": report.miss_rate,
        "miss_rate_se": report.miss_rate_se,
        "fa_rate": report.fa_rate,
        "fa_rate_se": report.fa_rate_se,
    }
    if report.final_eta is not None:
        out["final_eta"] = list(report.final_eta)
        out["rate_errors"] = list(report.rate_errors)
    return out


def graph_policy_payload(policy: GraphPolicy) -> dict:
    return {
        "grid_size": policy.grid.size,
        "energy_weight": policy.energy_weight,
        "prior": policy.prior,
        "v0": policy.v0,
        "order": list(policy.order),
        "stop_thresholds": {str(k): finite_or_none(v) for k, v in policy.stop_thresholds.items()},
        "stop_off_costs": {str(k): v for k, v in policy.stop_off_costs.items()},
    }


def write_json(obj: dict, path_or_none) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path_or_none is not None:
        with open(path_or_none, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    return text
