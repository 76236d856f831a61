import numpy as np
import pytest

from guidedproc import FeatureModel, StageSpec, SystemSpec


def random_model(rng, n_symbols=None) -> FeatureModel:
    q = int(n_symbols or rng.integers(4, 24))
    p0 = rng.gamma(1.0, size=q) + 1e-3
    p1 = rng.gamma(1.0, size=q) + 1e-3
    return FeatureModel(p0=p0 / p0.sum(), p1=p1 / p1.sum())


def sorted_model(rng, n_symbols=None) -> FeatureModel:
    """Random model reordered to a nondecreasing likelihood ratio."""
    m = random_model(rng, n_symbols)
    order = np.argsort(m.ratios(), kind="stable")
    return FeatureModel(p0=m.p0[order], p1=m.p1[order])


def random_system(rng, n_stages=None, energy_weight=None) -> SystemSpec:
    k = int(n_stages or rng.integers(2, 5))
    stages = []
    on = float(rng.uniform(0.5, 2.0))
    for i in range(k):
        off = 0.0 if i == 0 else float(on * rng.uniform(0.01, 0.5))
        stages.append(StageSpec(model=random_model(rng), on_cost=on, off_cost=off))
        on *= float(rng.uniform(2.0, 8.0))
    lam = float(energy_weight if energy_weight is not None else rng.uniform(1e-4, 0.05))
    return SystemSpec(
        stages=tuple(stages),
        miss_cost=float(rng.uniform(0.5, 5.0)),
        fa_cost=float(rng.uniform(0.5, 5.0)),
        prior=float(rng.uniform(0.02, 0.5)),
        energy_weight=lam,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
