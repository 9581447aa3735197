"""Skorohod integrals of chaos-valued integrands, exactly, on the cell grid.

An integrand is a process u that is constant on each grid cell with chaos
values; its Skorohod integral over (0, t] for a boundary t is another
finite chaos functional, obtained by symmetrizing one extra variable into
each kernel:

    K_l(t)(mu) = (1/l) * sum over positions i with cell mu_i <= tN of
                 g_{l-1}(mu without mu_i ; mu_i),

plus a first-order term from the deterministic part of u.  On a finite
grid this map is exact, so the objects built here (integral processes,
conditional-expectation defects, region kernels, increment energies) are
algebra, not approximation.  The only approximations in this module are
the ones under study: replacing an integrand by conditioned step averages
and comparing integral processes.

The module also builds the integrand v of the Ito-Skorohod form of the
integral process: v_a = u_a plus the integral against the noise of the
derivative of u_s in the cell of a over s up to a.  Half weight is given
to the diagonal cell s = a, which realizes the cell average of the exact
integrand and is killed by the conditioning projections downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .chaos import (
    ChaosFunctional,
    conditional_expectation,
    eval_many,
    functional_from_lines,
    functional_to_text,
    multiply,
)
from .grid import Grid, Partition, TimeSet
from .kernels import SymKernel, orderings, restrict_below_count
from .paths import PathBatch

__all__ = [
    "ChaosProcess",
    "StepProcess",
    "SkorohodProcess",
    "brownian_terminal_process",
    "brownian_path_process",
    "skorohod_integral",
    "skorohod_process",
    "martingale_defect",
    "ito_skorohod_integrand",
    "step_approximation",
    "synthesis_eval",
    "projected_synthesis_process",
    "duality_gap",
    "EnergyReport",
    "max_increment_energy",
    "ExtractionInconsistency",
    "extract_region_kernels",
    "resynthesize",
    "region_energy_bound",
    "process_to_text",
    "process_from_text",
]


class ChaosProcess:
    """A process constant on grid cells with chaos-functional values."""

    __slots__ = ("grid", "functionals")

    def __init__(self, grid: Grid, functionals: Sequence[ChaosFunctional]):
        functionals = tuple(functionals)
        if len(functionals) != grid.n_cells:
            raise ValueError(f"need one functional per cell, got {len(functionals)}")
        for F in functionals:
            if F.grid != grid:
                raise ValueError("functional grid differs from process grid")
        self.grid = grid
        self.functionals = functionals

    @classmethod
    def constant(cls, grid: Grid, F: ChaosFunctional) -> "ChaosProcess":
        return cls(grid, [F] * grid.n_cells)

    def at_cell(self, k: int) -> ChaosFunctional:
        return self.functionals[k - 1]

    def add(self, other: "ChaosProcess") -> "ChaosProcess":
        self._check(other)
        return ChaosProcess(self.grid, [a.add(b) for a, b in zip(self.functionals, other.functionals)])

    def sub(self, other: "ChaosProcess") -> "ChaosProcess":
        self._check(other)
        return ChaosProcess(self.grid, [a.sub(b) for a, b in zip(self.functionals, other.functionals)])

    def scaled(self, c: float) -> "ChaosProcess":
        return ChaosProcess(self.grid, [F.scaled(c) for F in self.functionals])

    def max_order(self) -> int:
        return max((F.max_order for F in self.functionals), default=0)

    def l2_norm_sq(self) -> float:
        """Integral over time of the second moment."""
        return self.grid.delta * sum(F.second_moment() for F in self.functionals)

    def sobolev_norm_sq(self) -> float:
        """L2 norm of the process plus L2 norm of its derivative field.

        By the isometry this is sum_cells delta * (mean^2 +
        sum_j (1 + j) j! ||g_j||^2) for the stored kernels.
        """
        total = 0.0
        for F in self.functionals:
            s = F.mean**2
            for j, f in F.kernels.items():
                s += (1 + j) * math.factorial(j) * f.norm_sq()
            total += s
        return total * self.grid.delta

    def is_adapted(self) -> bool:
        """Every value measurable in the increments up to its own cell."""
        return all(
            all(mu[-1] <= k for mu in f.data)
            for k, F in zip(self.grid.cells(), self.functionals)
            for f in F.kernels.values()
        )

    def _check(self, other: "ChaosProcess") -> None:
        if other.grid != self.grid:
            raise ValueError("processes live on different grids")

    def __repr__(self) -> str:
        return f"ChaosProcess(cells={self.grid.n_cells}, max_order={self.max_order()})"


def brownian_terminal_process(grid: Grid) -> ChaosProcess:
    """u_a = X_1 for every a: the standard nonadapted example."""
    from .chaos import first_order
    from .paths import StepFunction

    return ChaosProcess.constant(grid, first_order(StepFunction.constant(grid, 1.0)))


def brownian_path_process(grid: Grid) -> ChaosProcess:
    """u_a = X_a, averaged over each cell: weight 1 before, 1/2 on it."""
    from .chaos import first_order
    from .paths import StepFunction

    fs = []
    for k in grid.cells():
        values = np.zeros(grid.n_cells)
        values[: k - 1] = 1.0
        values[k - 1] = 0.5
        fs.append(first_order(StepFunction(grid, values)))
    return ChaosProcess(grid, fs)


@dataclass(frozen=True)
class StepProcess:
    """Chaos values held constant on partition intervals.

    Synthesis formulas assume each value has no kernel support in its own
    interval; the constructor enforces that.
    """

    grid: Grid
    partition: Partition
    values: tuple[ChaosFunctional, ...]

    def __post_init__(self):
        if self.partition.grid != self.grid:
            raise ValueError("partition and process live on different grids")
        if len(self.values) != self.partition.n_intervals:
            raise ValueError("need one functional per partition interval")
        for (lo, hi), F in zip(self.partition.intervals(), self.values):
            if F.grid != self.grid:
                raise ValueError("functional grid differs from process grid")
            for f in F.kernels.values():
                for mu in f.data:
                    if any(lo < c <= hi for c in mu):
                        raise ValueError(
                            f"step value on cells ({lo}, {hi}] has kernel support inside its interval"
                        )

    def as_process(self) -> ChaosProcess:
        fs: list[ChaosFunctional] = []
        for (lo, hi), F in zip(self.partition.intervals(), self.values):
            fs.extend([F] * (hi - lo))
        return ChaosProcess(self.grid, fs)


class SkorohodProcess:
    """t -> integral of u over (0, t], one chaos functional per boundary."""

    __slots__ = ("grid", "functionals", "provenance")

    def __init__(self, grid: Grid, functionals: Sequence[ChaosFunctional], provenance: str = "direct"):
        functionals = tuple(functionals)
        if len(functionals) != grid.n_cells + 1:
            raise ValueError("need one functional per boundary, 0..n_cells")
        for F in functionals:
            if F.grid != grid:
                raise ValueError("functional grid differs from process grid")
        self.grid = grid
        self.functionals = functionals
        self.provenance = provenance

    def at_boundary(self, i: int) -> ChaosFunctional:
        return self.functionals[i]

    def at_time(self, t: float) -> ChaosFunctional:
        return self.functionals[self.grid.boundary_index(t)]

    def sub(self, other: "SkorohodProcess") -> "SkorohodProcess":
        if other.grid != self.grid:
            raise ValueError("processes live on different grids")
        pieces = [a.sub(b) for a, b in zip(self.functionals, other.functionals)]
        return SkorohodProcess(self.grid, pieces, f"{self.provenance}-minus-{other.provenance}")

    def eval_batch(self, batch: PathBatch, workers: int = 1) -> np.ndarray:
        """Pathwise values at every boundary, shape (count, n_cells + 1)."""
        return eval_many(self.functionals, batch, workers).T

    def increment_second_moment(self, s: float, t: float) -> float:
        diff = self.at_time(t).sub(self.at_time(s))
        return diff.second_moment()

    def __repr__(self) -> str:
        return f"SkorohodProcess(cells={self.grid.n_cells}, provenance={self.provenance!r})"


def skorohod_process(u: ChaosProcess, provenance: str = "direct") -> SkorohodProcess:
    """Integrate u cell by cell, snapshotting the kernels at each boundary."""
    grid = u.grid
    acc_mean_k1: dict[tuple[int, ...], float] = {}
    acc: dict[int, dict[tuple[int, ...], float]] = {}
    snapshots = [ChaosFunctional(grid, 0.0, {})]
    for c in grid.cells():
        F = u.at_cell(c)
        if F.mean != 0.0:
            acc_mean_k1[(c,)] = acc_mean_k1.get((c,), 0.0) + F.mean
        for j, g in F.kernels.items():
            l = j + 1
            dest = acc.setdefault(l, {})
            for nu, val in g.data.items():
                rho = tuple(sorted(nu + (c,)))
                mult = rho.count(c)
                dest[rho] = dest.get(rho, 0.0) + val * mult / l
        kernels: dict[int, SymKernel] = {}
        if acc_mean_k1:
            kernels[1] = SymKernel(grid, 1, dict(acc_mean_k1))
        for l, d in acc.items():
            if d:
                base = SymKernel(grid, l, dict(d))
                kernels[l] = kernels[l].add(base) if l in kernels else base
        snapshots.append(ChaosFunctional(grid, 0.0, kernels))
    return SkorohodProcess(grid, snapshots, provenance)


def skorohod_integral(u: ChaosProcess, t: float) -> ChaosFunctional:
    """The integral of u over (0, t] for a boundary time t."""
    b = u.grid.boundary_index(t)
    return skorohod_process(u).at_boundary(b)


def martingale_defect(Y: SkorohodProcess, s: float, t: float) -> float:
    """Size of E[Y_t - Y_s | increments outside (s, t]]; zero exactly.

    Returns the largest absolute coefficient of the conditioned difference
    (its mean and all surviving kernel values).
    """
    diff = Y.at_time(t).sub(Y.at_time(s))
    cond = conditional_expectation(diff, TimeSet.outside_interval(Y.grid, s, t))
    worst = abs(cond.mean)
    for f in cond.kernels.values():
        for v in f.data.values():
            worst = max(worst, abs(v))
    return worst


def ito_skorohod_integrand(u: ChaosProcess) -> ChaosProcess:
    """The integrand whose forward-integral form matches the integral of u.

    v_a = u_a + (integral over s up to a of the derivative of u_s in the
    cell of a, against the noise).  On the grid this adds, for each order
    j and each target multiset rho,

        sum over positions i of g_j((rho minus rho_i) + {a}; rho_i) * w,

    with w = 1 when the source cell is before a, 1/2 on the diagonal cell
    itself (the cell average of the exact integrand), 0 after.
    """
    grid = u.grid
    out: list[ChaosFunctional] = []
    for a in grid.cells():
        base = u.at_cell(a)
        add: dict[int, dict[tuple[int, ...], float]] = {}
        for cs in grid.cells():
            w = 1.0 if cs < a else (0.5 if cs == a else 0.0)
            if w == 0.0:
                continue
            F = u.at_cell(cs)
            for j, g in F.kernels.items():
                for sigma, val in g.data.items():
                    if a not in sigma:
                        continue
                    nu = list(sigma)
                    nu.remove(a)
                    rho = tuple(sorted(nu + [cs]))
                    dest = add.setdefault(j, {})
                    dest[rho] = dest.get(rho, 0.0) + val * w * rho.count(cs)
        kernels = dict(base.kernels)
        for j, d in add.items():
            k = SymKernel(grid, j, d)
            kernels[j] = kernels[j].add(k) if j in kernels else k
        out.append(ChaosFunctional(grid, base.mean, kernels))
    return ChaosProcess(grid, out)


def step_approximation(v: ChaosProcess, partition: Partition) -> StepProcess:
    """Average v over each interval, conditioned on the outside increments.

    F_i = mean over cells s in (t_i, t_{i+1}] of E[v_s | increments
    outside the interval].  The projection removes every kernel cell
    inside the interval, which makes the step value usable in synthesis
    and independent of the within-cell convention of v.
    """
    if partition.grid != v.grid:
        raise ValueError("partition and process live on different grids")
    grid = v.grid
    values = []
    for lo, hi in partition.intervals():
        outside = TimeSet.from_interval(grid, grid.boundary_value(lo), grid.boundary_value(hi)).complement()
        acc = ChaosFunctional(grid, 0.0, {})
        for c in range(lo + 1, hi + 1):
            acc = acc.add(conditional_expectation(v.at_cell(c), outside))
        values.append(acc.scaled(1.0 / (hi - lo)))
    return StepProcess(grid, partition, tuple(values))


def synthesis_eval(step: StepProcess, batch: PathBatch, t: float, workers: int = 1) -> np.ndarray:
    """Pathwise integral of the step process over (0, t] as a product sum.

    Because each value has no kernel support in its own interval, the
    integral of F_i over the interval is exactly F_i times the increment,
    so the whole curve is sum_i F_i (X_{t ^ t_{i+1}} - X_{t ^ t_i}).
    """
    grid = step.grid
    b = grid.boundary_index(t)
    vals = eval_many(step.values, batch, workers)
    bounds = batch.boundary_values()
    out = np.zeros(batch.count)
    for (lo, hi), fv in zip(step.partition.intervals(), vals):
        a, z = min(lo, b), min(hi, b)
        if z > a:
            out += fv * (bounds[:, z] - bounds[:, a])
    return out


def projected_synthesis_process(step: StepProcess, provenance: str = "projected-step") -> SkorohodProcess:
    """The conditioned two-sided approximation built from a step process.

    At a boundary time t the value is

        sum_i E[F_i | increments outside (t_i, max(t_{i+1}, t)]]
              * (X_{t ^ t_{i+1}} - X_{t ^ t_i}),

    so the coefficient of every interval keeps losing the increments of
    (t_{i+1}, t] as t moves past it.  This re-projection is what turns the
    plain integral of the step process into a sum of products of a forward
    martingale and a backward one; without it the approximation does not
    converge in increment energy.  Products are expanded exactly; the
    contraction terms vanish because coefficient and increment never share
    a cell.
    """
    from .chaos import first_order
    from .paths import StepFunction

    grid = step.grid
    snapshots = [ChaosFunctional(grid, 0.0, {})]
    for b in range(1, grid.n_cells + 1):
        total = ChaosFunctional(grid, 0.0, {})
        for (lo, hi), F in zip(step.partition.intervals(), step.values):
            if lo >= b:
                continue
            z = min(hi, b)
            window = TimeSet.from_interval(
                grid, grid.boundary_value(lo), grid.boundary_value(max(hi, b))
            )
            coef = conditional_expectation(F, window.complement())
            inc = first_order(
                StepFunction.indicator(grid, grid.boundary_value(lo), grid.boundary_value(z))
            )
            total = total.add(multiply(coef, inc))
        snapshots.append(total)
    return SkorohodProcess(grid, snapshots, provenance)


def duality_gap(F: ChaosFunctional, u: ChaosProcess, t: float) -> float:
    """|E[F * integral(u, t)] - E<DF, u 1_(0,t]>|, both sides exact."""
    from .chaos import malliavin_derivative

    lhs = F.product_expectation(skorohod_integral(u, t))
    b = u.grid.boundary_index(t)
    rhs = sum(
        malliavin_derivative(F, c).product_expectation(u.at_cell(c)) for c in range(1, b + 1)
    ) * u.grid.delta
    return abs(lhs - rhs)


@dataclass(frozen=True)
class EnergyReport:
    """Largest summed squared increment energy over the dyadic partitions."""

    value: float
    best_depth: int
    by_depth: tuple[tuple[int, float], ...]


def max_increment_energy(Y: SkorohodProcess) -> EnergyReport:
    """Max over dyadic partitions of sum_j E[(Y_{t_{j+1}} - Y_{t_j})^2].

    The family runs from the trivial partition {0, 1} down to single
    cells; every expectation is computed from the kernels.
    """
    rows = []
    for part in Partition.dyadic_family(Y.grid):
        depth = part.n_intervals.bit_length() - 1
        energy = sum(
            Y.at_boundary(hi).sub(Y.at_boundary(lo)).second_moment()
            for lo, hi in part.intervals()
        )
        rows.append((depth, energy))
    best_depth, value = max(rows, key=lambda r: r[1])
    return EnergyReport(value, best_depth, tuple(rows))


class ExtractionInconsistency(RuntimeError):
    """Read-off kernels disagree with the integrand's direct formula."""


def extract_region_kernels(
    u: ChaosProcess,
    Y: SkorohodProcess | None = None,
    tol: float = 1e-12,
) -> dict[tuple[int, int], SymKernel]:
    """Kernels f_{l,q} of the integral process by count of cells below t.

    f_{l,q}(mu) = (1/l) * sum over the q smallest positions i of
    g_{l-1}(mu minus mu_(i); mu_(i)), defined for every multiset including
    diagonal ones.  On the region where exactly q cells of mu lie at or
    before t this equals the integral's order-l kernel at time t.  When Y
    is supplied the values are cross-checked against its stored kernels at
    every achievable (multiset, q) pair and a mismatch raises
    ExtractionInconsistency.
    """
    grid = u.grid
    # gather candidate multisets per order from the full-time kernels
    full = skorohod_process(u) if Y is None else Y
    out: dict[tuple[int, int], SymKernel] = {}
    for l in range(1, full.at_boundary(grid.n_cells).max_order + 1):
        support = set()
        for F in full.functionals:
            kern = F.kernels.get(l)
            if kern:
                support.update(kern.data)
        for q in range(0, l + 1):
            vals: dict[tuple[int, ...], float] = {}
            for mu in support:
                s = 0.0
                for i in range(q):
                    rest = mu[:i] + mu[i + 1 :]
                    c = mu[i]
                    Fu = u.at_cell(c)
                    if l == 1:
                        s += Fu.mean
                    else:
                        g = Fu.kernels.get(l - 1)
                        if g is not None:
                            s += g.value(rest)
                v = s / l
                if v != 0.0:
                    vals[mu] = v
            out[(l, q)] = SymKernel(grid, l, vals)
    if Y is not None:
        _check_read_off(u, Y, out, tol)
    return out


def _check_read_off(
    u: ChaosProcess,
    Y: SkorohodProcess,
    kernels: dict[tuple[int, int], SymKernel],
    tol: float,
) -> None:
    grid = Y.grid
    for (l, q), f in kernels.items():
        support = set(f.data)
        for F in Y.functionals:
            kern = F.kernels.get(l)
            if kern:
                support.update(kern.data)
        for mu in support:
            # achievable: some boundary has exactly q cells of mu at or before it
            if q == 0:
                b = 0
            else:
                b = mu[q - 1]
                if sum(1 for c in mu if c <= b) != q:
                    continue
            stored = Y.at_boundary(b).kernels.get(l)
            read = stored.value(mu) if stored is not None else 0.0
            if abs(read - f.value(mu)) > tol:
                raise ExtractionInconsistency(
                    f"order {l}, count {q}, multiset {mu}: read {read!r} vs direct {f.value(mu)!r}"
                )


def resynthesize(grid: Grid, kernels: dict[tuple[int, int], SymKernel]) -> SkorohodProcess:
    """Rebuild the integral process from its region kernels."""
    orders = sorted({l for l, _ in kernels})
    snapshots = []
    for b in range(grid.n_cells + 1):
        ks: dict[int, SymKernel] = {}
        for l in orders:
            merged: dict[tuple[int, ...], float] = {}
            for q in range(0, l + 1):
                f = kernels.get((l, q))
                if f is None:
                    continue
                for mu, v in f.data.items():
                    if sum(1 for c in mu if c <= b) == q:
                        merged[mu] = v
            if merged:
                ks[l] = SymKernel(grid, l, merged)
        snapshots.append(ChaosFunctional(grid, 0.0, ks))
    return SkorohodProcess(grid, snapshots, "region-synthesis")


def region_energy_bound(kernels: dict[tuple[int, int], SymKernel]) -> float:
    """sum_l l! sum_q ||f_{l,q+1} - f_{l,q}||^2 with f_{l,0} = 0.

    This quantity is dominated by the max increment energy of the
    integral process; it is the exact-model face of the variation bound.
    """
    total = 0.0
    orders = sorted({l for l, _ in kernels})
    for l in orders:
        grid = kernels[(l, 0)].grid if (l, 0) in kernels else kernels[(l, 1)].grid
        prev = SymKernel.zero(grid, l)
        for q in range(1, l + 1):
            cur = kernels.get((l, q), SymKernel.zero(grid, l))
            total += math.factorial(l) * cur.sub(prev).norm_sq()
            prev = cur
    return total


# ---------------------------------------------------------------------------
# text round trip for integral processes

def process_to_text(Y: SkorohodProcess, fp: TextIO) -> None:
    fp.write(f"skorohod cells {Y.grid.n_cells} provenance {Y.provenance}\n")
    for i, F in enumerate(Y.functionals):
        fp.write(f"boundary {i}\n")
        functional_to_text(F, fp)


def process_from_text(fp: TextIO) -> SkorohodProcess:
    lines = iter(fp.read().splitlines())
    header = ""
    for line in lines:
        line = line.strip()
        if line:
            header = line
            break
    parts = header.split()
    if parts[:2] != ["skorohod", "cells"]:
        raise ValueError(f"bad process header {header!r}")
    grid = Grid(int(parts[2]))
    provenance = parts[4] if len(parts) > 4 else "direct"
    functionals = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("boundary "):
            continue
        functionals.append(functional_from_lines(lines, line))
    return SkorohodProcess(grid, functionals, provenance)
