"""
Shared fixtures for the gmdiffuse test suite.

Benchmark mixtures:
    delta0       single atom at 0, n=1, sigma0^2=1
    pair4        1D atoms at +-4, weights 1/2
    pair1        1D atoms at +-1, weights 1/2
    pair5        1D atoms at +-5, weights 1/2
    triangle     2D equilateral triangle, pairwise distance 10
    five_atoms   2D, five equal-weight atoms inside the unit ball
"""

import math
import os
import sys

import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from gmdiffuse.schemas.mixture import KLocalityParams, MixtureComponent, MixtureSpec  # noqa: E402


def build_spec(means, weights, sigma0_sq=1.0, R0=1.0, alpha_min=None, D=None, k=None, radii=None):
    """MixtureSpec from plain lists; locality defaults follow the means."""
    k = len(means) if k is None else k
    alpha_min = min(weights) if alpha_min is None else alpha_min
    if D is None:
        D = max(1.0, max(math.sqrt(sum(x * x for x in m)) for m in means))
    radii = radii or [0.0] * len(means)
    return MixtureSpec(
        n=len(means[0]),
        sigma0_sq=sigma0_sq,
        components=[
            MixtureComponent(mean=list(m), weight=w, radius=r)
            for m, w, r in zip(means, weights, radii)
        ],
        locality=KLocalityParams(R0=R0, alpha_min=alpha_min, D=D, k=k),
    )


@pytest.fixture
def make_spec():
    return build_spec


@pytest.fixture
def delta0():
    return build_spec([[0.0]], [1.0], R0=1.0, alpha_min=1.0, D=1.0, k=1)


@pytest.fixture
def pair4():
    return build_spec([[-4.0], [4.0]], [0.5, 0.5], D=4.0)


@pytest.fixture
def pair1():
    return build_spec([[-1.0], [1.0]], [0.5, 0.5], D=1.0)


@pytest.fixture
def pair5():
    return build_spec([[-5.0], [5.0]], [0.5, 0.5], D=5.0)


@pytest.fixture
def triangle():
    r = 10.0 / math.sqrt(3.0)
    means = [
        [r * math.cos(math.radians(a)), r * math.sin(math.radians(a))]
        for a in (90.0, 210.0, 330.0)
    ]
    return build_spec(means, [1.0 / 3.0] * 3, R0=1.0, alpha_min=1.0 / 3.0, D=8.0, k=3)


@pytest.fixture
def five_atoms():
    means = [[0.0, 0.0], [0.4, 0.0], [-0.4, 0.1], [0.1, 0.4], [-0.1, -0.4]]
    return build_spec(means, [0.2] * 5, R0=1.0, alpha_min=1.0, D=1.0, k=1)
