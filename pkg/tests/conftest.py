import numpy as np
import pytest

from touchsim.mesh import default_hand_mesh


@pytest.fixture(scope="session")
def hand_mesh():
    """The shipped template hand fixture, loaded once per test session."""
    return default_hand_mesh()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q
