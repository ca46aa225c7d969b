import pytest

from promptcarbon.bundle import DEFAULT_SELECTION, fit_bundle
from promptcarbon.regressors import GbdtParams, RegressorKind
from promptcarbon.synthetic import make_records

FAST_GBDT = GbdtParams(n_trees=40, max_depth=4, min_samples_leaf=3)


@pytest.fixture(scope="session")
def small_records():
    return make_records(60, seed=3)


@pytest.fixture(scope="session")
def small_bundle(small_records):
    bundle, _ = fit_bundle(
        small_records,
        seed=0,
        params={RegressorKind.GRADIENT_BOOSTED_TREES: FAST_GBDT},
        selection=DEFAULT_SELECTION,
    )
    return bundle
