"""Shared fixtures: random splat clouds and spatially-correlated test scenes."""

import numpy as np
import pytest

from sogs import SplatCloud


def random_cloud(n, seed=0, sh_degree=3):
    """A valid cloud with attribute ranges resembling trained 3DGS scenes."""
    rng = np.random.default_rng(seed)
    return SplatCloud(
        positions=rng.normal(0.0, 5.0, (n, 3)),
        sh_dc=rng.normal(1.0, 1.0, (n, 3)),
        sh_rest=rng.normal(0.0, 0.3, (n, 45 if sh_degree == 3 else 0)),
        opacity_logit=rng.normal(3.0, 2.5, n),
        scale_log=rng.normal(-4.0, 1.0, (n, 3)),
        rotation=rng.normal(0.25, 0.4, (n, 4)),
    )


def smooth_cloud(n_side, seed):
    """A shuffled cloud whose attributes are smooth fields over a 2D surface.

    Every attribute is a low-frequency function of the surface coordinates
    (u, v), so a locality-preserving grid arrangement exists; the returned
    row order is a random permutation of it.
    """
    rng = np.random.default_rng(seed)
    u, v = np.meshgrid(np.linspace(0, 1, n_side), np.linspace(0, 1, n_side), indexing="ij")
    u, v = u.ravel(), v.ravel()

    def field(scale=1.0, bias=0.0):
        a, b, c, d = rng.uniform(-1, 1, 4)
        p, q = rng.uniform(0.5, 1.2, 2)
        return bias + scale * (a * np.sin(2 * np.pi * (p * u + c))
                               + b * np.cos(2 * np.pi * (q * v + d)))

    cloud = SplatCloud(
        positions=np.stack([field(4.0) for _ in range(3)], axis=1),
        sh_dc=np.stack([field(2.5, 1.0) for _ in range(3)], axis=1),
        sh_rest=np.stack([field(0.9) for _ in range(45)], axis=1),
        opacity_logit=field(8.0, 3.0),
        scale_log=np.stack([field(2.5, -4.0) for _ in range(3)], axis=1),
        rotation=np.stack([field(1.3, 0.5) for _ in range(4)], axis=1),
    )
    return cloud.select(rng.permutation(n_side * n_side))


def clouds_equal(a, b):
    return (np.array_equal(a.positions, b.positions)
            and np.array_equal(a.sh_dc, b.sh_dc)
            and np.array_equal(a.sh_rest, b.sh_rest)
            and np.array_equal(a.opacity_logit, b.opacity_logit)
            and np.array_equal(a.scale_log, b.scale_log)
            and np.array_equal(a.rotation, b.rotation))


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines where capture cannot hide them."""
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)


@pytest.fixture
def cloud_factory():
    return random_cloud


@pytest.fixture
def smooth_cloud_factory():
    return smooth_cloud
