"""Named experiments behind the command line, each a config-to-table map.

Every experiment takes an ExperimentConfig, runs its checks, and returns
an ExperimentResult holding the CSV table plus a list of assertion
failures (empty on success).  Tables are deterministic given the config:
path sampling is counter-based per path index and statistics are always
reduced over fully assembled arrays, so the worker count never changes a
byte of output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bf import two_sided_approximation
from .chaos import (
    ChaosFunctional,
    conditional_expectation,
    constant_functional,
    eval_functional,
    eval_many,
)
from .grid import GenericityError, Grid, Partition, TimeSet, verify_region_partition
from .kernels import MAX_CELLS, from_step, sym_tensor_product, tensor_power
from .paths import StepFunction, reverse_batch, sample_paths
from .reversal import (
    BackwardRepresentation,
    PhiSpec,
    backward_ito_eval,
    hermite_projection,
    quadratic_covariation,
    reverse_functional,
    semimartingale_decomposition_check,
)
from .skorohod import (
    brownian_path_process,
    brownian_terminal_process,
    ChaosProcess,
    extract_region_kernels,
    ito_skorohod_integrand,
    martingale_defect,
    max_increment_energy,
    projected_synthesis_process,
    region_energy_bound,
    resynthesize,
    skorohod_process,
    step_approximation,
)
from .stopping import GridStoppingTime, optional_sampling_check, stopped_integral

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENTS",
    "run_experiment",
    "format_value",
]

_EXACT = 1e-12
_PATHWISE = 1e-10


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment invocation: which check, at what size, which seed."""

    experiment: str
    N: int = 16
    L: int = 2
    paths: int = 10_000
    seed: int = 1
    depth: int = 3
    out: str | None = None
    workers: int = 1
    M: int = 3
    t: float = 0.25
    samples: int = 1000
    n: int = 2

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.N < 1 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N={self.N} must be a power of two")
        if self.experiment != "reversal" and self.N > MAX_CELLS:
            raise ValueError(f"N={self.N} exceeds the kernel cell cap {MAX_CELLS}")
        if not 0 <= self.L <= 4:
            raise ValueError(f"L={self.L} out of range 0..4")
        if self.paths < 2:
            raise ValueError("need at least two paths")
        if self.depth < 0 or (self.N >> self.depth) << self.depth != self.N:
            raise ValueError(f"depth={self.depth} does not divide an N={self.N} grid")
        if not 1 <= self.M <= 6:
            raise ValueError(f"M={self.M} out of range 1..6")
        if not 1 <= self.n <= 3:
            raise ValueError(f"n={self.n} out of range 1..3")
        if self.samples < 1:
            raise ValueError("need at least one sample point")
        if self.workers < 1:
            raise ValueError("need at least one worker")


_ECHO_FIELDS = {
    "geometry": ("experiment", "M", "t", "samples", "seed"),
    "isometry": ("experiment", "N", "L", "paths", "seed"),
    "martingale": ("experiment", "N", "seed"),
    "theorem1": ("experiment", "N", "L", "depth", "seed"),
    "ducnualart": ("experiment", "N", "L", "seed"),
    "reversal": ("experiment", "N", "n", "t", "paths", "seed"),
    "stopping": ("experiment", "N", "paths", "seed"),
}


def format_value(v: object) -> str:
    """CSV cell text; floats carry 17 significant digits."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def csv_text(self) -> str:
        lines = [
            f"# {name}={format_value(getattr(self.config, name))}"
            for name in _ECHO_FIELDS[self.config.experiment]
        ]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(format_value(v) for v in row))
        return "\n".join(lines) + "\n"


def _run_geometry(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("M", "t", "n_points", "covered", "disjoint"))
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    points: list[tuple[float, ...]] = []
    attempts = 0
    while len(points) < cfg.samples:
        attempts += 1
        if attempts > 100 * cfg.samples:
            raise GenericityError("could not sample enough generic points")
        x = tuple(rng.random(cfg.M).tolist())
        if len(set(x)) == cfg.M and cfg.t not in x:
            points.append(x)
    report = verify_region_partition(cfg.M, cfg.t, points)
    covered = report.covered == report.n_points
    disjoint = report.multi_covered == 0
    res.rows.append((cfg.M, cfg.t, report.n_points, covered, disjoint))
    if not covered:
        res.failures.append(
            f"geometry: {report.n_points - report.covered} of {report.n_points} points uncovered"
        )
    if not disjoint:
        res.failures.append(f"geometry: {report.multi_covered} points hit two regions")
    return res


def _isometry_pairs(grid: Grid, top: int):
    """Deterministic kernel family with nonzero cross inner products."""
    k = np.arange(grid.n_cells)
    ha = StepFunction(grid, 0.7 + 0.6 * (k + 1) / grid.n_cells)
    hb = StepFunction(grid, np.where(k < grid.n_cells // 2, 1.0, -0.8))
    out = []
    for n in range(1, top + 1):
        for m in range(n, top + 1):
            f = tensor_power(ha, n)
            g = from_step(hb) if m == 1 else sym_tensor_product(tensor_power(ha, m - 1), from_step(hb))
            out.append((n, m, f, g))
    return out


def _run_isometry(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("n", "m", "exact", "estimate", "std_error", "z"))
    grid = Grid(cfg.N)
    batch = sample_paths(grid, cfg.paths, cfg.seed, cfg.workers)
    for n, m, f, g in _isometry_pairs(grid, max(cfg.L, 1)):
        F = ChaosFunctional(grid, 0.0, {n: f})
        G = ChaosFunctional(grid, 0.0, {m: g})
        exact = math.factorial(n) * f.inner(g) if n == m else 0.0
        a, b = eval_many([F, G], batch, cfg.workers)
        prod = a * b
        est = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / np.sqrt(cfg.paths))
        z = (est - exact) / se
        res.rows.append((n, m, exact, est, se, z))
        if abs(z) > 3.0:
            res.failures.append(f"isometry: order pair ({n},{m}) off by z={z:.2f}")
    return res


def _integrand_family(grid: Grid) -> list[tuple[str, ChaosProcess]]:
    one = ChaosProcess.constant(grid, constant_functional(grid, 1.0))
    term = brownian_terminal_process(grid)
    path = brownian_path_process(grid)
    return [
        ("deterministic_one", one),
        ("terminal_value", term),
        ("running_value", path),
        ("terminal_plus_running", term.add(path)),
    ]


def _run_martingale(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("integrand", "n_pairs", "max_defect"))
    grid = Grid(cfg.N)
    bounds = [grid.boundary_value(b) for b in range(grid.n_cells + 1)]
    for name, u in _integrand_family(grid):
        Y = skorohod_process(u)
        worst = 0.0
        pairs = 0
        for i, s in enumerate(bounds):
            for t in bounds[i + 1 :]:
                worst = max(worst, martingale_defect(Y, s, t))
                pairs += 1
        res.rows.append((name, pairs, worst))
        if worst > _EXACT:
            res.failures.append(f"martingale: {name} has defect {worst:.3e}")
    return res


def _run_theorem1(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("depth", "vhat", "sobolev_bound"))
    grid = Grid(cfg.N)
    u = brownian_terminal_process(grid).add(brownian_path_process(grid))
    Y = skorohod_process(u)
    vhats = []
    for d in range(cfg.depth + 1):
        v, step, bf = two_sided_approximation(u, Partition.dyadic(grid, d))
        Z = bf.as_skorohod()
        direct = projected_synthesis_process(step)
        split_gap = max(
            Z.at_boundary(b).max_abs_diff(direct.at_boundary(b))
            for b in range(grid.n_cells + 1)
        )
        if split_gap > _EXACT:
            res.failures.append(f"theorem1: depth {d} split differs from projection by {split_gap:.3e}")
        vhat = max_increment_energy(Y.sub(Z)).value
        bound = v.sub(step.as_process()).sobolev_norm_sq()
        res.rows.append((d, vhat, bound))
        vhats.append(vhat)
        if vhat > bound + _EXACT:
            res.failures.append(f"theorem1: depth {d} energy {vhat:.6f} exceeds bound {bound:.6f}")
    for d in range(1, len(vhats)):
        if not vhats[d] < vhats[d - 1]:
            res.failures.append(f"theorem1: energy not strictly decreasing at depth {d}")
    if vhats and vhats[-1] > 0.10 * vhats[0] + _EXACT:
        res.failures.append(
            f"theorem1: final energy {vhats[-1]:.6f} above 10% of initial {vhats[0]:.6f}"
        )
    return res


def _ducnualart_integrand(grid: Grid) -> ChaosProcess:
    """Mixed-order nonadapted integrand used for the region-kernel check."""
    base = brownian_terminal_process(grid).add(brownian_path_process(grid))
    second = ChaosFunctional(grid, 0.0, {2: tensor_power(StepFunction.constant(grid, 1.0), 2)})
    return base.add(ChaosProcess.constant(grid, second))


def _run_ducnualart(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("statistic", "value"))
    grid = Grid(cfg.N)
    u = _ducnualart_integrand(grid)
    Y = skorohod_process(u)
    kernels = extract_region_kernels(u, Y)
    rebuilt = resynthesize(grid, kernels)
    resid = max(
        Y.at_boundary(b).max_abs_diff(rebuilt.at_boundary(b))
        for b in range(grid.n_cells + 1)
    )
    lhs = region_energy_bound(kernels)
    vhat = max_increment_energy(Y).value
    for l, q in sorted(kernels):
        res.rows.append((f"kernel_norm_sq_l{l}_q{q}", kernels[l, q].norm_sq()))
    res.rows.append(("resynthesis_max_residual", resid))
    res.rows.append(("majoration_lhs", lhs))
    res.rows.append(("vhat", vhat))
    if resid > _EXACT:
        res.failures.append(f"ducnualart: resynthesis residual {resid:.3e}")
    if lhs > 1.05 * vhat:
        res.failures.append(f"ducnualart: energy sum {lhs:.6f} above 1.05 x {vhat:.6f}")
    return res


def _run_reversal(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("N", "t", "statistic", "value", "std_error"))
    grid = Grid(cfg.N)
    batch = sample_paths(grid, cfg.paths, cfg.seed, cfg.workers)
    rev = reverse_batch(batch)
    b = grid.boundary_index(cfg.t)

    if cfg.N <= MAX_CELLS:
        one = StepFunction.constant(grid, 1.0)
        for k in range(1, cfg.n + 1):
            F = ChaosFunctional(grid, 0.0, {k: tensor_power(one, k)})
            rep = BackwardRepresentation(F)
            Fh = reverse_functional(F)
            worst = 0.0
            for bb in (0, b, grid.n_cells):
                lhs = eval_functional(rep.reversed_value_at(bb), rev)
                tail = TimeSet.from_interval(grid, 0.0, grid.boundary_value(grid.n_cells - bb))
                rhs = eval_functional(Fh, rev) - eval_functional(
                    conditional_expectation(Fh, tail), rev
                )
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            res.rows.append((cfg.N, cfg.t, f"two_sided_projection_residual_n{k}", worst, 0.0))
            if worst > _PATHWISE:
                res.failures.append(f"reversal: projection identity residual {worst:.3e} at n={k}")

            hl, hr = hermite_projection(k, one, cfg.t, batch)
            hres = float(np.max(np.abs(hl - hr))) if hr is not None else 0.0
            res.rows.append((cfg.N, cfg.t, f"hermite_max_residual_n{k}", hres, 0.0))
            if hres > _PATHWISE:
                res.failures.append(f"reversal: hermite residual {hres:.3e} at n={k}")

        F2 = ChaosFunctional(grid, 0.0, {2: tensor_power(one, 2)})
        rep2 = BackwardRepresentation(F2)
        y = eval_functional(rep2.value_at(b), batch)
        s = backward_ito_eval(rep2.phi, batch, cfg.t, cfg.workers)
        gap_sq = (y - s) ** 2
        mse = float(np.mean(gap_sq))
        mse_se = float(np.std(gap_sq, ddof=1) / np.sqrt(cfg.paths))
        res.rows.append((cfg.N, cfg.t, "backward_ito_gap_mse", mse, mse_se))

    spec = PhiSpec(fn=lambda a, x: 2.0 * x, steps=(StepFunction.constant(grid, 1.0),))

    def exact_y(t: float, pb) -> np.ndarray:
        bv = pb.boundary_values()
        k = grid.boundary_index(t)
        return 2.0 * bv[:, -1] * bv[:, k] - bv[:, k] ** 2 - t

    report = semimartingale_decomposition_check(spec, exact_y, batch, cfg.t)
    msq = float(np.mean(report.residual**2))
    msq_se = float(np.std(report.residual**2, ddof=1) / np.sqrt(cfg.paths))
    rms = math.sqrt(msq)
    rms_se = msq_se / (2.0 * rms) if rms > 0 else 0.0
    res.rows.append((cfg.N, cfg.t, "decomposition_residual_rms", rms, rms_se))

    rbv = rev.boundary_values()
    qc = quadratic_covariation(grid, 2.0 * rbv, rbv)
    for tt in (0.25, 0.5, 0.75, 1.0):
        vals = qc.curve_at(tt)
        gap = float(np.mean(vals) - 2.0 * tt)
        se = float(np.std(vals, ddof=1) / np.sqrt(cfg.paths))
        res.rows.append((cfg.N, tt, "bracket_vs_2t", gap, se))
        if abs(gap) > 3.0 * se:
            res.failures.append(f"reversal: bracket at t={tt} off by {gap / se:.2f} standard errors")
    return res


def _run_stopping(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg, ("rule", "test_variable", "n_paths", "estimate", "std_error", "z"))
    grid = Grid(cfg.N)
    batch = sample_paths(grid, cfg.paths, cfg.seed, cfg.workers)
    Y = skorohod_process(brownian_terminal_process(grid))
    S = GridStoppingTime.first_exit(grid, -0.5, 0.5)
    T = GridStoppingTime.deterministic(grid, 1.0)
    rule = f"{S.label()}->{T.label()}"
    for row in optional_sampling_check(Y, S, T, batch, cfg.workers):
        res.rows.append((rule, row.test_variable, row.n_paths, row.estimate, row.std_error, row.z))
        if abs(row.z) > 3.0:
            res.failures.append(f"stopping: optional sampling z={row.z:.2f} for {row.test_variable}")

    small = sample_paths(grid, min(cfg.paths, 100), cfg.seed + 1, cfg.workers)
    rules = [
        GridStoppingTime.deterministic(grid, 0.5),
        GridStoppingTime.level_hitting(grid, 0.3),
        GridStoppingTime.first_exit(grid, -0.5, 0.5),
        GridStoppingTime.level_hitting(grid, 10.0),
    ]
    for name, u in (
        ("terminal_value", brownian_terminal_process(grid)),
        ("terminal_plus_running", brownian_terminal_process(grid).add(brownian_path_process(grid))),
    ):
        v = ito_skorohod_integrand(u)
        for d in (1, 2):
            step = step_approximation(v, Partition.dyadic(grid, d))
            for rule_t in rules:
                gap = stopped_integral(step, rule_t, small, cfg.workers).max_abs_gap()
                label = f"stop_gap_{name}_depth{d}"
                res.rows.append((rule_t.label(), label, small.count, gap, 0.0, 0.0))
                if gap > _PATHWISE:
                    res.failures.append(
                        f"stopping: stopped-integral gap {gap:.3e} for {rule_t.label()} on {name} depth {d}"
                    )
    return res


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "geometry": _run_geometry,
    "isometry": _run_isometry,
    "martingale": _run_martingale,
    "theorem1": _run_theorem1,
    "ducnualart": _run_ducnualart,
    "reversal": _run_reversal,
    "stopping": _run_stopping,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    return EXPERIMENTS[cfg.experiment](cfg)
