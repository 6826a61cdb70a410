"""Shared fixtures for the perfbounds tests."""

import json
from pathlib import Path

import numpy as np
import pytest

from perfbounds import ConstantsProfile, DomainBox, empirical_from_points

CONFIGS_DIR = Path(__file__).parent.parent / "configs"
FIXTURES_DIR = Path(__file__).parent / "fixtures"


def make_profile(**changes) -> ConstantsProfile:
    """A small well-conditioned profile: no audit findings, contraction 0.25."""
    base = dict(
        L_ell=1.0, L_a=1.0, L_f=0.25, gamma=1.0, kappa=0.5, eps_sens=0.5,
        p=1.0, nu=5, D_Z=1.0, D_Theta=2.0, delta=0.05,
    )
    base.update(changes)
    return ConstantsProfile(**base)


def config_profile(name: str) -> ConstantsProfile:
    data = json.loads((CONFIGS_DIR / name).read_text(encoding="utf-8"))
    return ConstantsProfile.from_dict(data["profile"])


@pytest.fixture
def historical_profile() -> ConstantsProfile:
    return config_profile("appA2.json")


@pytest.fixture
def semisim_profile() -> ConstantsProfile:
    return config_profile("appA3.json")


@pytest.fixture
def unit_box_1d() -> DomainBox:
    return DomainBox.unit(dim_x=1)


@pytest.fixture
def random_dist():
    """Factory for seeded uniform-weight datasets with binary labels."""

    def build(n: int, dim_x: int = 1, seed: int = 0):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, size=n).astype(np.float64)
        points = np.column_stack([labels, rng.random((n, dim_x))])
        return empirical_from_points(points, DomainBox.unit(dim_x=dim_x))

    return build
