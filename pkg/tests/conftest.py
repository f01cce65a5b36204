# -*- coding: utf-8 -*-
"""Shared fixtures: solves are expensive, so base solutions are computed once per session."""

import pytest

from app_config import SolverConfig
from mixlayer_lib import base_solution


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def base(cfg):
    """base(m) -> BaseSolution for a=1, memoized for the whole session."""
    solved = {}

    def get(m):
        key = str(m)
        if key not in solved:
            solved[key] = base_solution(m, 1.0, cfg)
        return solved[key]

    return get


@pytest.fixture(scope="session")
def base_m1(base):
    return base(1)
