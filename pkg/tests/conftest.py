import numpy as np
import pytest

from infomenu.core import FiniteInstance


@pytest.fixture(scope="session")
def matching_instance() -> FiniteInstance:
    """Two symmetric states, two actions, u(w_k, a_k) = 1 else 0, one type."""
    return FiniteInstance(
        states=("w0", "w1"),
        prior=np.array([0.5, 0.5]),
        actions=("a0", "a1"),
        utilities=np.eye(2)[None, :, :],
        type_dist=np.array([1.0]),
    )


@pytest.fixture(scope="session")
def skewed_instance() -> FiniteInstance:
    """Three states with prior (0.5, 0.3, 0.2) and a fixed 2-action utility table."""
    utilities = np.array(
        [
            [[0.9, 0.1], [0.2, 0.8], [0.4, 0.7]],
        ]
    )
    return FiniteInstance(
        states=("w0", "w1", "w2"),
        prior=np.array([0.5, 0.3, 0.2]),
        actions=("a0", "a1"),
        utilities=utilities,
        type_dist=np.array([1.0]),
    )


@pytest.fixture(scope="session")
def corpus_322() -> FiniteInstance:
    """The pinned 3-state, 2-action, 2-type cross-check instance."""
    from infomenu.bench import random_instance

    return random_instance(n=2, m=2, num_states=3, seed=322)
