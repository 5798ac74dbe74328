import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gridaffinity.dataset import DatasetRecord  # noqa: E402
from gridaffinity.features import N_FEATURES, AtomCloud  # noqa: E402


def random_cloud(rng, n_lig=6, n_prot=30, spread=9.0):
    """Synthetic complex: ligand atoms near the origin, protein atoms around it."""
    coords = np.vstack([rng.normal(0, 2.0, (n_lig, 3)), rng.uniform(-spread, spread, (n_prot, 3))])
    feats = np.zeros((n_lig + n_prot, N_FEATURES))
    types = rng.integers(0, 9, n_lig + n_prot)
    feats[np.arange(len(types)), types] = 1
    feats[:, 9] = rng.integers(1, 4, len(types))
    feats[:, 10] = rng.integers(0, 4, len(types))
    feats[:, 11] = rng.integers(0, 3, len(types))
    feats[:, 12:17] = rng.integers(0, 2, (len(types), 5))
    feats[:, 17] = rng.normal(0, 1, len(types))
    feats[:, 18] = np.r_[np.ones(n_lig), -np.ones(n_prot)]
    return AtomCloud(coords, feats)


def random_records(rng, n, low=2.0, high=10.0, **kw):
    return [DatasetRecord(f"c{i:03d}", random_cloud(rng, **kw), float(rng.uniform(low, high)))
            for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)
