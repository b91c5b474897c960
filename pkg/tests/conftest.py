import numpy as np
import pytest

from deepckit.plants import LinearPlant


@pytest.fixture(scope="session")
def small_plant():
    """Fast 2-state SISO plant for controller tests (stable, observable, lag 2)."""
    return LinearPlant(
        a=[[0.9, 0.2], [-0.15, 0.8]],
        b=[[0.4], [1.0]],
        c=[[1.0, 0.0]],
        d=[[0.0]],
    )


def random_matrix(rng, rows, cols, rank=None):
    """Random matrix, optionally of prescribed rank."""
    if rank is None:
        return rng.standard_normal((rows, cols))
    rank = min(rank, rows, cols)
    return rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
