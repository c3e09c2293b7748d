import numpy as np
import pytest

import wonhamlab as wl


@pytest.fixture(scope="session")
def ref_model():
    """Symmetric two-state chain observed at levels (0, 1), uniform start."""
    return wl.FilterModel.from_raw([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]], [0.0, 1.0])


@pytest.fixture(scope="session")
def perturbed_model():
    """Template perturbation of the reference model (unit sweep size)."""
    return wl.FilterModel.from_raw([0.3, 0.7], [[-1.3, 1.3], [0.8, -0.8]], [0.1, 1.15])


@pytest.fixture(scope="session")
def ref_pair(ref_model, perturbed_model):
    return wl.ModelPair(true_model=ref_model, approx_model=perturbed_model)


@pytest.fixture(scope="session")
def three_state_model():
    return wl.FilterModel.from_raw(
        [0.2, 0.3, 0.5],
        [[-3.0, 1.0, 2.0], [2.0, -3.0, 1.0], [1.0, 2.0, -3.0]],
        [0.0, 1.0, -1.0],
    )


@pytest.fixture(scope="session")
def observe():
    """Factory: observation path of a model over (t_end, dt) for a master seed."""

    def _observe(model, t_end, dt, seed):
        grid = wl.TimeGrid(t_end, dt)
        sig, noise = wl.spawn_generators(seed, 2)
        path = wl.simulate_signal(model.initial, model.generator, grid, sig)
        return wl.simulate_observations(path, model.observation, grid, noise)

    return _observe


@pytest.fixture(scope="session")
def ref_obs(ref_model, observe):
    """One observation path of the reference model on [0, 1] at dt 1e-3."""
    return observe(ref_model, 1.0, 1e-3, 20260810)


def assert_tangent(vec, tol=1e-8):
    assert abs(float(np.sum(vec))) <= tol
