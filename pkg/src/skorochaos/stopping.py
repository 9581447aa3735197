"""Grid stopping times and the stopped-integral identities.

A stopping rule here maps each increment path to a cell boundary, and
deciding the value may only use increments up to that boundary.  Three
rules ship: a deterministic time, first passage above a level, and first
exit from a band; the hitting rules return time 1 when the path never
triggers.

Two facts about the integral process survive stopping exactly on the
grid.  First, optional sampling: the expectation of Y_T - Y_S against
any variable known at time S vanishes, checked here as Monte Carlo
z-scores.  Second, for a step integrand whose interval values have no
kernel support inside their own interval, the stopped integral equals
the sum of interval values times stopped increments, pathwise with no
error beyond float roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chaos import eval_many
from .grid import Grid
from .paths import PathBatch
from .skorohod import SkorohodProcess, StepProcess, skorohod_process

__all__ = [
    "GridStoppingTime",
    "eval_stopping_time",
    "SamplingRow",
    "optional_sampling_check",
    "StoppedIntegralReport",
    "stopped_integral",
    "second_moment_curve",
]


@dataclass(frozen=True)
class GridStoppingTime:
    """A boundary-valued stopping rule for the grid filtration.

    kind is one of "deterministic", "level-hitting", "first-exit"; params
    carries (t,), (level,), or (lo, hi).  Hitting rules scan boundaries
    k = 1..n in order and fire at the first boundary value satisfying the
    condition, so the decision never looks past the returned time.
    """

    grid: Grid
    kind: str
    params: tuple[float, ...]

    @classmethod
    def deterministic(cls, grid: Grid, t: float) -> "GridStoppingTime":
        grid.boundary_index(t)
        return cls(grid, "deterministic", (float(t),))

    @classmethod
    def level_hitting(cls, grid: Grid, level: float) -> "GridStoppingTime":
        """First boundary k >= 1 with X_{k delta} >= level, else time 1."""
        return cls(grid, "level-hitting", (float(level),))

    @classmethod
    def first_exit(cls, grid: Grid, lo: float, hi: float) -> "GridStoppingTime":
        """First boundary k >= 1 with X outside (lo, hi), else time 1."""
        if not lo < 0.0 < hi:
            raise ValueError("the band must contain the starting point 0")
        return cls(grid, "first-exit", (float(lo), float(hi)))

    def label(self) -> str:
        inner = ",".join(f"{p:g}" for p in self.params)
        return f"{self.kind}({inner})"

    def eval(self, batch: PathBatch) -> np.ndarray:
        """Boundary index per path, shape (count,), dtype int."""
        if batch.grid != self.grid:
            raise ValueError("batch grid differs from stopping-time grid")
        n = self.grid.n_cells
        if self.kind == "deterministic":
            b = self.grid.boundary_index(self.params[0])
            return np.full(batch.count, b, dtype=np.int64)
        walk = batch.boundary_values()[:, 1:]
        if self.kind == "level-hitting":
            cond = walk >= self.params[0]
        elif self.kind == "first-exit":
            lo, hi = self.params
            cond = (walk <= lo) | (walk >= hi)
        else:
            raise ValueError(f"unknown stopping kind {self.kind!r}")
        hit = cond.any(axis=1)
        first = np.argmax(cond, axis=1) + 1
        return np.where(hit, first, n).astype(np.int64)


def eval_stopping_time(T: GridStoppingTime, batch: PathBatch) -> np.ndarray:
    """Stopping values in time units, shape (count,)."""
    return T.eval(batch) * batch.grid.delta


@dataclass(frozen=True)
class SamplingRow:
    """One Monte Carlo test of E[G (Y_T - Y_S)] = 0."""

    test_variable: str
    n_paths: int
    estimate: float
    std_error: float
    z: float


def _stopped_variables(batch: PathBatch, s_idx: np.ndarray) -> dict[str, np.ndarray]:
    """Test variables measurable at the stopping time S."""
    grid = batch.grid
    bv = batch.boundary_values()
    rows = np.arange(batch.count)
    x_s = bv[rows, s_idx]
    quarter = grid.boundary_index(0.25) if grid.n_cells % 4 == 0 else 1
    x_cap = bv[rows, np.minimum(s_idx, quarter)]
    return {
        "one": np.ones(batch.count),
        "stop_time": s_idx * grid.delta,
        "x_at_stop": x_s,
        "x_at_stop_capped": x_cap,
        "sign_x": np.sign(x_s),
        "tanh_x": np.tanh(x_s),
    }


def optional_sampling_check(
    Y: SkorohodProcess,
    S: GridStoppingTime,
    T: GridStoppingTime,
    batch: PathBatch,
    workers: int = 1,
) -> list[SamplingRow]:
    """z-scores of E[G (Y_T - Y_S)] over a panel of S-measurable G."""
    s_idx = S.eval(batch)
    t_idx = T.eval(batch)
    if np.any(s_idx > t_idx):
        raise ValueError("S exceeds T on some path")
    curve = Y.eval_batch(batch, workers)
    rows = np.arange(batch.count)
    diff = curve[rows, t_idx] - curve[rows, s_idx]
    out = []
    for name, g in _stopped_variables(batch, s_idx).items():
        prod = g * diff
        est = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / np.sqrt(batch.count))
        z = 0.0 if se == 0.0 and est == 0.0 else est / se
        out.append(SamplingRow(name, batch.count, est, se, z))
    return out


@dataclass(frozen=True)
class StoppedIntegralReport:
    """Both sides of the stopped-integral identity, pathwise."""

    lhs: np.ndarray
    rhs: np.ndarray

    def max_abs_gap(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))


def stopped_integral(
    step: StepProcess, T: GridStoppingTime, batch: PathBatch, workers: int = 1
) -> StoppedIntegralReport:
    """Interval-value sum with stopped increments vs the frozen curve.

    lhs sums F_i (X_{T and t_{i+1}} - X_{T and t_i}) over the partition;
    rhs evaluates the integral process of the step integrand at every
    boundary and reads the column T lands on.  Because each F_i has no
    kernel support inside its own interval, the two agree pathwise.
    """
    t_idx = T.eval(batch)
    bv = batch.boundary_values()
    rows = np.arange(batch.count)
    coeffs = eval_many(list(step.values), batch, workers)
    lhs = np.zeros(batch.count)
    for i, (lo, hi) in enumerate(step.partition.intervals()):
        left = bv[rows, np.minimum(t_idx, lo)]
        right = bv[rows, np.minimum(t_idx, hi)]
        lhs += coeffs[i] * (right - left)
    curve = skorohod_process(step.as_process(), provenance="stopped").eval_batch(batch, workers)
    rhs = curve[rows, t_idx]
    return StoppedIntegralReport(lhs, rhs)


def second_moment_curve(Y: SkorohodProcess) -> np.ndarray:
    """Exact E[Y_t^2] at every boundary, for the boundedness surrogate.

    The running maximum of this curve is dominated by the two-sided
    variation estimate, which is the discrete form of the uniform
    integrability bound used to justify optional sampling.
    """
    return np.array([Y.at_boundary(b).second_moment() for b in range(Y.grid.n_cells + 1)])
