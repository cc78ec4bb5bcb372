import sys
from pathlib import Path

import numpy as np
import pytest

from dbaexplain.core import Dataset, fit_standardizer
from dbaexplain.datagen import gen_airis_tab

HELPERS = Path(__file__).parent / "helpers"


def helper_command(name: str) -> list[str]:
    return [sys.executable, str(HELPERS / name)]


@pytest.fixture(scope="session")
def airis_small():
    """Standardized AIris train/test split small enough for unit tests."""
    train = gen_airis_tab(800, 3, "train")
    test = gen_airis_tab(200, 3, "test")
    st = fit_standardizer(train)
    return st, st.transform(train), st.transform(test)


def linear_dataset(w, b, n=400, seed=0, scale=1.0):
    from dbaexplain.classifiers import LinearClassifier

    rng = np.random.default_rng(seed)
    f = LinearClassifier(w, b)
    X = scale * rng.standard_normal((n, len(w)))
    return f, Dataset(X, f.predict(X), tuple(f"x{j}" for j in range(len(w))))
