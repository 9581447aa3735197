"""Stopping rules and the identities that survive stopping exactly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorochaos import (
    Grid,
    GridStoppingTime,
    Partition,
    PathBatch,
    SamplingRow,
    brownian_path_process,
    brownian_terminal_process,
    eval_stopping_time,
    ito_skorohod_integrand,
    max_increment_energy,
    optional_sampling_check,
    sample_paths,
    second_moment_curve,
    skorohod_process,
    step_approximation,
    stopped_integral,
)


def test_deterministic_rule(grid8, batch8):
    S = GridStoppingTime.deterministic(grid8, 0.5)
    assert np.all(S.eval(batch8) == 4)
    np.testing.assert_allclose(eval_stopping_time(S, batch8), 0.5)
    with pytest.raises(ValueError):
        GridStoppingTime.deterministic(grid8, 0.3)


def test_level_hitting_convention(grid8):
    # a path that steps up then down: hits 0.5 at the second boundary
    inc = np.array([[0.3, 0.3, -0.6, 0.0, 0.0, 0.0, 0.0, 0.0]])
    batch = PathBatch(grid8, 0, inc)
    S = GridStoppingTime.level_hitting(grid8, 0.5)
    assert S.eval(batch).tolist() == [2]
    # a path that never reaches the level stops at time 1
    low = PathBatch(grid8, 0, -np.abs(inc))
    assert S.eval(low).tolist() == [grid8.n_cells]
    assert eval_stopping_time(S, low).tolist() == [1.0]


def test_first_exit_convention(grid8):
    inc = np.array([[0.2, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]])
    batch = PathBatch(grid8, 0, inc)
    S = GridStoppingTime.first_exit(grid8, -0.5, 0.5)
    assert S.eval(batch).tolist() == [3]
    down = PathBatch(grid8, 0, -inc)
    assert S.eval(down).tolist() == [3]
    with pytest.raises(ValueError):
        GridStoppingTime.first_exit(grid8, 0.1, 0.5)


def test_labels(grid8):
    assert GridStoppingTime.deterministic(grid8, 1.0).label() == "deterministic(1)"
    assert GridStoppingTime.level_hitting(grid8, 0.5).label() == "level-hitting(0.5)"
    assert GridStoppingTime.first_exit(grid8, -0.5, 0.5).label() == "first-exit(-0.5,0.5)"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-2.0, 2.0, allow_nan=False))
def test_decision_ignores_increments_after_stop(seed, filler):
    grid = Grid(8)
    batch = sample_paths(grid, 16, seed=seed)
    for S in (
        GridStoppingTime.level_hitting(grid, 0.5),
        GridStoppingTime.first_exit(grid, -0.75, 0.75),
    ):
        idx = S.eval(batch)
        inc = batch.increments.copy()
        for i, b in enumerate(idx):
            inc[i, b:] = filler
        tampered = PathBatch(grid, batch.seed, inc)
        assert np.array_equal(S.eval(tampered), idx)


def test_stopped_integral_identity(grid8, batch8):
    rules = (
        GridStoppingTime.deterministic(grid8, 0.5),
        GridStoppingTime.deterministic(grid8, 1.0),
        GridStoppingTime.level_hitting(grid8, 0.5),
        GridStoppingTime.first_exit(grid8, -0.5, 0.5),
    )
    integrands = (
        brownian_terminal_process(grid8),
        brownian_terminal_process(grid8).add(brownian_path_process(grid8)),
    )
    for u in integrands:
        v = ito_skorohod_integrand(u)
        for d in (1, 2):
            step = step_approximation(v, Partition.dyadic(grid8, d))
            for T in rules:
                rep = stopped_integral(step, T, batch8)
                assert rep.max_abs_gap() <= 1e-10


def test_optional_sampling_panel(grid16):
    batch = sample_paths(grid16, 4000, seed=33)
    Y = skorohod_process(brownian_terminal_process(grid16))
    S = GridStoppingTime.first_exit(grid16, -0.5, 0.5)
    T = GridStoppingTime.deterministic(grid16, 1.0)
    rows = optional_sampling_check(Y, S, T, batch)
    assert len(rows) >= 5
    for row in rows:
        assert isinstance(row, SamplingRow)
        assert row.n_paths == 4000
        assert abs(row.z) <= 4.0


def test_optional_sampling_rejects_unordered_times(grid8, batch8):
    Y = skorohod_process(brownian_terminal_process(grid8))
    S = GridStoppingTime.deterministic(grid8, 1.0)
    T = GridStoppingTime.deterministic(grid8, 0.5)
    with pytest.raises(ValueError):
        optional_sampling_check(Y, S, T, batch8)


def test_second_moment_curve_bounded_by_energy(grid16):
    for u in (
        brownian_terminal_process(grid16),
        brownian_terminal_process(grid16).add(brownian_path_process(grid16)),
    ):
        Y = skorohod_process(u)
        curve = second_moment_curve(Y)
        assert curve[0] == 0.0
        assert float(curve.max()) <= max_increment_energy(Y).value + 1e-12
