import math

import numpy as np
import pytest

from app.core.exceptions import IntegrationError
from app.services.analysis import excited_population
from app.services.hamiltonian import SimParams
from app.services.liouvillian import FamilyBlockState
from app.services.propagation import IntegratorConfig, Trajectory, evolve, rk4_step, steps_for


def _max_diff(a: FamilyBlockState, b: FamilyBlockState) -> float:
    return float(max(np.abs(a.lambda_blocks - b.lambda_blocks).max(), np.abs(a.iw_blocks - b.iw_blocks).max()))


def test_zero_step_returns_a_copy(initial_state, equal_params):
    out = rk4_step(initial_state, equal_params, 0.0)
    assert out is not initial_state
    assert _max_diff(out, initial_state) == 0.0


def test_step_size_guard(initial_state, equal_params):
    with pytest.raises(ValueError):
        rk4_step(initial_state, equal_params, 0.2)
    with pytest.raises(ValueError):
        rk4_step(initial_state, equal_params, -0.01)


def test_steps_for_requires_whole_steps():
    assert steps_for(150.0, 0.02) == 7500
    assert steps_for(0.0, 0.02) == 0
    with pytest.raises(ValueError):
        steps_for(1.0, 0.3)


def test_free_evolution_without_light_keeps_ground_state(initial_state):
    final, trajectory = evolve(initial_state, SimParams(0.0, 0.0), IntegratorConfig(0.02, 1.0, 10))
    assert _max_diff(final, initial_state) < 1e-15
    assert math.isnan(trajectory.snapshots[-1].dark_lambda)


def test_excited_population_decays_exponentially(small_grid):
    state = FamilyBlockState.zeros(small_grid)
    state.lambda_blocks[small_grid.index_of(0.0), 0, 0] = 1.0
    final, _ = evolve(state, SimParams(0.0, 0.0), IntegratorConfig(0.02, 1.0, 50))
    assert excited_population(final) == pytest.approx(math.exp(-1.0), abs=1e-8)
    assert final.total_trace() + final.lost_trace == pytest.approx(1.0, abs=1e-12)


def test_rk4_converges_at_fourth_order(initial_state, equal_params):
    def run(dt):
        return evolve(initial_state, equal_params, IntegratorConfig(dt, 2.0, 10**6))[0]

    dt = 0.05
    reference = run(dt / 8)
    err_coarse = _max_diff(run(dt), reference)
    err_fine = _max_diff(run(dt / 2), reference)
    assert 12.0 <= err_coarse / err_fine <= 20.0


def test_evolve_is_deterministic(initial_state, equal_params):
    config = IntegratorConfig(0.02, 1.0, 10)
    a, _ = evolve(initial_state, equal_params, config)
    b, _ = evolve(initial_state, equal_params, config)
    assert np.array_equal(a.lambda_blocks, b.lambda_blocks)
    assert np.array_equal(a.iw_blocks, b.iw_blocks)


def test_snapshot_schedule_and_time_origin(initial_state, equal_params):
    _, trajectory = evolve(initial_state, equal_params, IntegratorConfig(0.02, 2.0, 30), t0=10.0)
    assert len(trajectory) == 5  # steps 0, 30, 60, 90 and the final step 100
    assert trajectory.times[0] == 10.0
    assert trajectory.times[-1] == pytest.approx(12.0)
    assert trajectory.distributions().shape == (5, initial_state.grid.size)


def test_conservation_along_trajectory(initial_state, equal_params):
    _, trajectory = evolve(initial_state, equal_params, IntegratorConfig(0.02, 4.0, 20))
    totals = trajectory.series("trace") + trajectory.series("lost_trace")
    assert np.abs(totals - 1.0).max() < 1e-10
    assert trajectory.series("min_diagonal").min() >= -1e-9
    assert trajectory.series("excited_population").max() > 0.0


def test_splitting_a_run_gives_the_same_state(initial_state, equal_params):
    whole, _ = evolve(initial_state, equal_params, IntegratorConfig(0.02, 2.0, 25))
    half, first = evolve(initial_state, equal_params, IntegratorConfig(0.02, 1.0, 25))
    joined, second = evolve(half, equal_params, IntegratorConfig(0.02, 1.0, 25), t0=1.0)
    assert _max_diff(whole, joined) < 1e-12

    first.extend(second)
    assert first.times[0] == 0.0
    assert np.all(np.diff(first.times) > 0)


def test_negative_population_raises_with_time(small_grid):
    state = FamilyBlockState.zeros(small_grid)
    center = small_grid.index_of(0.0)
    state.lambda_blocks[center, 1, 1] = -0.5
    state.lambda_blocks[center, 2, 2] = 1.5
    with pytest.raises(IntegrationError) as info:
        evolve(state, SimParams(0.0, 0.0), IntegratorConfig(0.02, 1.0, 10))
    assert info.value.gamma_t == pytest.approx(0.02)


def test_trajectory_rejects_out_of_order_snapshots(initial_state, equal_params):
    _, trajectory = evolve(initial_state, equal_params, IntegratorConfig(0.02, 0.2, 5))
    fresh = Trajectory(trajectory.grid)
    fresh.append(trajectory.snapshots[-1])
    with pytest.raises(ValueError):
        fresh.append(trajectory.snapshots[0])
    with pytest.raises(ValueError):
        trajectory.series("nonsense")
