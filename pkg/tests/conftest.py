from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from carpnet import (
    CATEGORIES,
    ExpertPairCount,
    ModelParams,
    Risk,
    RiskNetwork,
    build_network,
    load_history,
    load_network,
)

ROOT = Path(__file__).resolve().parent.parent

# Generator settings frozen alongside the bundled datasets (see
# scripts/make_fixture.py; regenerating with these values must reproduce
# the committed files byte for byte).
FIXTURE_PARAMS = ModelParams(alpha=0.3, beta=0.02, gamma=1.0)
TOY_PARAMS = ModelParams(alpha=0.4, beta=0.3, gamma=1.2)

settings.register_profile(
    "carpnet",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("carpnet")


def make_network(
    likelihoods,
    edges=(),
    counts=None,
    categories=None,
    year: str = "",
) -> RiskNetwork:
    """Build a small in-memory network with explicit normalized likelihoods."""
    likelihoods = list(likelihoods)
    n = len(likelihoods)
    risks = []
    for i, L in enumerate(likelihoods):
        cat = categories[i] if categories else CATEGORIES[i % len(CATEGORIES)]
        risks.append(
            Risk(
                id=f"r{i + 1}",
                numeric_code=f"{i + 1:02d}",
                name=f"risk {i + 1}",
                category=cat,
                raw_likelihood=float(L) * 5.5,
                normalized_likelihood=float(L),
            )
        )
    pairs = []
    for j, (u, v) in enumerate(edges):
        c = counts[j] if counts else 1
        pairs.append(ExpertPairCount(f"r{u + 1}", f"r{v + 1}", int(c)))
    return build_network(risks, pairs, year=year)


@pytest.fixture(scope="session")
def toy_network():
    return load_network(
        ROOT / "data/toy/risks.csv",
        ROOT / "data/toy/pairs.csv",
        year="toy",
        likelihood_scale=5.0,
    )


@pytest.fixture(scope="session")
def toy_history(toy_network):
    return load_history(ROOT / "data/toy/history.csv", toy_network)


@pytest.fixture(scope="session")
def fixture_network():
    return load_network(
        ROOT / "data/synthetic_2013/risks.csv",
        ROOT / "data/synthetic_2013/pairs.csv",
        year="2013",
        likelihood_scale=5.0,
    )


@pytest.fixture(scope="session")
def fixture_history(fixture_network):
    return load_history(ROOT / "data/synthetic_2013/history.csv", fixture_network)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
