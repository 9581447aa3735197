"""Path sampling determinism, step functions, and batch round-trips."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorochaos.grid import Grid
from skorochaos.paths import (
    PathBatch,
    StepFunction,
    isonormal_eval,
    read_batch,
    reverse_batch,
    sample_paths,
    write_batch,
)


def test_same_seed_same_bytes(grid8):
    a = sample_paths(grid8, 50, seed=9)
    b = sample_paths(grid8, 50, seed=9)
    assert a.increments.tobytes() == b.increments.tobytes()


def test_different_seeds_differ(grid8):
    a = sample_paths(grid8, 50, seed=9)
    b = sample_paths(grid8, 50, seed=10)
    assert not np.array_equal(a.increments, b.increments)


def test_prefix_stability(grid8):
    small = sample_paths(grid8, 10, seed=4)
    large = sample_paths(grid8, 100, seed=4)
    np.testing.assert_array_equal(large.increments[:10], small.increments)


@settings(max_examples=20, deadline=None)
@given(workers=st.integers(min_value=1, max_value=8))
def test_worker_count_never_changes_samples(workers):
    grid = Grid(8)
    base = sample_paths(grid, 37, seed=13, workers=1)
    other = sample_paths(grid, 37, seed=13, workers=workers)
    assert base.increments.tobytes() == other.increments.tobytes()


def test_increment_moments(grid16):
    batch = sample_paths(grid16, 20000, seed=3)
    inc = batch.increments
    assert abs(inc.mean()) < 3 * np.sqrt(grid16.delta / inc.size)
    assert np.var(inc) == pytest.approx(grid16.delta, rel=0.05)


def test_boundary_values_cumsum(grid8, batch8):
    bv = batch8.boundary_values()
    assert bv.shape == (batch8.count, 9)
    np.testing.assert_array_equal(bv[:, 0], 0.0)
    np.testing.assert_allclose(bv[:, -1], batch8.increments.sum(axis=1))


def test_step_function_inner_and_tail(grid8):
    h = StepFunction.indicator(grid8, 0.0, 0.5)
    g = StepFunction.constant(grid8, 2.0)
    assert h.norm_sq() == pytest.approx(0.5)
    assert h.inner(g) == pytest.approx(1.0)
    assert h.tail(0.25).norm_sq() == pytest.approx(0.25)
    assert h.head(0.25).norm_sq() == pytest.approx(0.25)


def test_step_function_reversal_involution(grid8, rng):
    h = StepFunction(grid8, rng.normal(size=8))
    np.testing.assert_array_equal(h.reversed().reversed().values, h.values)
    assert h.reversed().norm_sq() == pytest.approx(h.norm_sq())


def test_isonormal_eval_is_weighted_sum(grid8, batch8):
    h = StepFunction.indicator(grid8, 0.25, 0.75)
    got = isonormal_eval(batch8, h)
    want = batch8.increments[:, 2:6].sum(axis=1)
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_reverse_batch_is_involution(batch8):
    rev = reverse_batch(reverse_batch(batch8))
    np.testing.assert_array_equal(rev.increments, batch8.increments)


def test_reverse_batch_matches_reversed_path(batch8):
    # X-hat_t = X_1 - X_{1-t} sampled at boundaries
    bv = batch8.boundary_values()
    rbv = reverse_batch(batch8).boundary_values()
    want = bv[:, -1:] - bv[:, ::-1]
    np.testing.assert_allclose(rbv, want, atol=1e-15)


def test_batch_round_trip(grid8, batch8):
    buf = io.BytesIO()
    write_batch(buf, batch8)
    buf.seek(0)
    back = read_batch(buf)
    assert back.grid == grid8
    assert back.seed == batch8.seed
    np.testing.assert_array_equal(back.increments, batch8.increments)


def test_batch_shape_validated(grid8):
    with pytest.raises(ValueError):
        PathBatch(grid8, 0, np.zeros((10, 7)))
