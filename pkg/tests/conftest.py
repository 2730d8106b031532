import numpy as np
import pytest

from credit_mlp.ingest import Dataset, FeatureManifest
from credit_mlp.rating_scale import ClassIndexMap


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(X, grades=None, grade_set=None, companies=None, years=None):
    """Small in-memory dataset with generic feature names."""
    X = np.asarray(X, dtype=np.float64)
    m, f = X.shape
    class_map = None
    if grades is not None:
        class_map = ClassIndexMap(tuple(grade_set) if grade_set else tuple(sorted(set(grades), key=_order)))
    return Dataset(
        company_ids=np.array(companies if companies is not None else [f"c{i}" for i in range(m)], dtype=object),
        years=np.array(years if years is not None else [2010] * m),
        X=X,
        manifest=FeatureManifest.generic(f),
        grades=None if grades is None else tuple(grades),
        class_map=class_map,
    )


def _order(g):
    from credit_mlp.rating_scale import RatingScale

    return RatingScale().index(g)
