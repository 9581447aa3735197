"""Finite chaos functionals: exact evaluation, moments, derivative, products.

A functional is stored as a constant plus one symmetric kernel per order,
F = c + sum_n I_n(f_n).  On the cell grid every multiple integral reduces
to a polynomial in the increments,

    I_n(f) = n! sum_mu f(mu) delta^{n/2} prod_j He_{m_j}(dX_{c_j} / sqrt(delta)),

with He_m the probabilists' Hermite polynomials normalized so that
exp(t x - t^2 / 2) = sum_m t^m He_m(x); equivalently He_m has leading
coefficient 1/m!.  Everything here is exact given the kernels: moments
come from the isometry, the Malliavin derivative at a cell is literally
the partial derivative in that increment, conditioning on the sigma-field
of a cell set is kernel projection, and products expand through the
multiplication formula for multiple integrals.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .grid import Grid, TimeSet
from .kernels import SymKernel, contract, project, tensor_power
from .paths import PathBatch, StepFunction, map_path_chunks

__all__ = [
    "hermite_values",
    "ChaosFunctional",
    "constant_functional",
    "first_order",
    "hermite_functional",
    "eval_functional",
    "eval_many",
    "malliavin_derivative",
    "conditional_expectation",
    "multiply",
    "functional_to_text",
    "functional_from_text",
]

_EVAL_BLOCK = 8192


def hermite_values(m_max: int, x: np.ndarray) -> np.ndarray:
    """He_0(x) .. He_{m_max}(x) stacked on a new leading axis.

    Uses the three-term recurrence (m + 1) He_{m+1} = x He_m - He_{m-1}.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((m_max + 1,) + x.shape, dtype=np.float64)
    out[0] = 1.0
    if m_max >= 1:
        out[1] = x
    for m in range(1, m_max):
        out[m + 1] = (x * out[m] - out[m - 1]) / (m + 1)
    return out


class ChaosFunctional:
    """Constant plus a finite stack of multiple integrals on one grid."""

    __slots__ = ("grid", "mean", "kernels")

    def __init__(self, grid: Grid, mean: float = 0.0, kernels: Mapping[int, SymKernel] | None = None):
        ks: dict[int, SymKernel] = {}
        for n, f in (kernels or {}).items():
            if f.grid != grid:
                raise ValueError("kernel grid differs from functional grid")
            if f.order != n:
                raise ValueError(f"kernel of order {f.order} filed under {n}")
            if f.data:
                ks[n] = f
        self.grid = grid
        self.mean = float(mean)
        self.kernels = ks

    @property
    def max_order(self) -> int:
        return max(self.kernels, default=0)

    def kernel(self, n: int) -> SymKernel:
        return self.kernels.get(n, SymKernel.zero(self.grid, n))

    def expectation(self) -> float:
        return self.mean

    def covariance(self, other: "ChaosFunctional") -> float:
        self._check(other)
        return sum(
            math.factorial(n) * f.inner(other.kernels[n])
            for n, f in self.kernels.items()
            if n in other.kernels
        )

    def product_expectation(self, other: "ChaosFunctional") -> float:
        return self.mean * other.mean + self.covariance(other)

    def variance(self) -> float:
        return self.covariance(self)

    def second_moment(self) -> float:
        return self.mean**2 + self.variance()

    def scaled(self, c: float) -> "ChaosFunctional":
        return ChaosFunctional(self.grid, self.mean * c, {n: f.scaled(c) for n, f in self.kernels.items()})

    def add(self, other: "ChaosFunctional") -> "ChaosFunctional":
        self._check(other)
        ks = dict(self.kernels)
        for n, g in other.kernels.items():
            ks[n] = ks[n].add(g) if n in ks else g
        return ChaosFunctional(self.grid, self.mean + other.mean, ks)

    def sub(self, other: "ChaosFunctional") -> "ChaosFunctional":
        return self.add(other.scaled(-1.0))

    def shifted(self, c: float) -> "ChaosFunctional":
        return ChaosFunctional(self.grid, self.mean + c, self.kernels)

    def max_abs_diff(self, other: "ChaosFunctional") -> float:
        self._check(other)
        worst = abs(self.mean - other.mean)
        for n in set(self.kernels) | set(other.kernels):
            worst = max(worst, self.kernel(n).max_abs_diff(other.kernel(n)))
        return worst

    def is_zero(self, tol: float = 0.0) -> bool:
        return abs(self.mean) <= tol and all(f.is_zero(tol) for f in self.kernels.values())

    def _check(self, other: "ChaosFunctional") -> None:
        if other.grid != self.grid:
            raise ValueError("functionals live on different grids")

    def __repr__(self) -> str:
        orders = sorted(self.kernels)
        return f"ChaosFunctional(mean={self.mean!r}, orders={orders})"


def constant_functional(grid: Grid, c: float) -> ChaosFunctional:
    return ChaosFunctional(grid, c, {})


def first_order(h: StepFunction) -> ChaosFunctional:
    """I_1(h), the isonormal evaluation at a step function."""
    from .kernels import from_step

    k = from_step(h)
    return ChaosFunctional(h.grid, 0.0, {1: k} if k.data else {})


def hermite_functional(h: StepFunction, n: int) -> ChaosFunctional:
    """I_n(h tensor n); equals n! ||h||^n He_n(X(h)/||h||) pathwise."""
    if n == 0:
        return constant_functional(h.grid, 1.0)
    return ChaosFunctional(h.grid, 0.0, {n: tensor_power(h, n)})


# ---------------------------------------------------------------------------
# evaluation on path batches

def _compile(F: ChaosFunctional) -> list[tuple[float, tuple[tuple[int, int], ...]]]:
    """Flatten a functional into (coefficient, ((multiplicity, cell), ...)) terms."""
    prog = []
    for n, f in sorted(F.kernels.items()):
        base = math.factorial(n) * F.grid.delta ** (n / 2.0)
        for mu, v in f.data.items():
            factors = tuple((len(tuple(g)), c) for c, g in itertools.groupby(mu))
            prog.append((base * v, factors))
    return prog


def eval_many(functionals: Sequence[ChaosFunctional], batch: PathBatch, workers: int = 1) -> np.ndarray:
    """Evaluate several functionals pathwise; returns (len(functionals), count).

    Hermite tables are shared across functionals and built per path block,
    so memory stays flat in the path count.  Results are bit-identical for
    every worker count: each block writes a disjoint output slice.
    """
    for F in functionals:
        if F.grid != batch.grid:
            raise ValueError("functional and batch live on different grids")
    count = batch.count
    out = np.empty((len(functionals), count), dtype=np.float64)
    if not functionals:
        return out
    progs = [_compile(F) for F in functionals]
    m_max = max((m for prog in progs for _, fs in prog for m, _ in fs), default=0)
    sqrt_d = math.sqrt(batch.grid.delta)

    def run(lo: int, hi: int) -> None:
        for b0 in range(lo, hi, _EVAL_BLOCK):
            b1 = min(b0 + _EVAL_BLOCK, hi)
            z = batch.increments[b0:b1] / sqrt_d
            htab = hermite_values(m_max, z)
            for fi, F in enumerate(functionals):
                acc = np.full(b1 - b0, F.mean)
                for coef, factors in progs[fi]:
                    term = htab[factors[0][0]][:, factors[0][1] - 1].copy()
                    for m, c in factors[1:]:
                        term *= htab[m][:, c - 1]
                    acc += coef * term
                out[fi, b0:b1] = acc

    map_path_chunks(run, count, workers)
    return out


def eval_functional(F: ChaosFunctional, batch: PathBatch, workers: int = 1) -> np.ndarray:
    return eval_many([F], batch, workers)[0]


# ---------------------------------------------------------------------------
# calculus

def malliavin_derivative(F: ChaosFunctional, cell: int) -> ChaosFunctional:
    """Derivative in the increment of one cell: D_c I_n(f) = n I_{n-1}(f(., c)).

    The result is again a chaos functional; pathwise it equals the exact
    partial derivative of eval_functional with respect to that increment.
    """
    if not 1 <= cell <= F.grid.n_cells:
        raise ValueError(f"cell {cell} outside grid")
    mean = 0.0
    ks: dict[int, SymKernel] = {}
    for n, f in F.kernels.items():
        if n == 1:
            mean += f.value((cell,))
            continue
        vals: dict[tuple[int, ...], float] = {}
        for mu, v in f.data.items():
            if cell not in mu:
                continue
            nu = list(mu)
            nu.remove(cell)
            vals[tuple(nu)] = n * v
        if vals:
            ks[n - 1] = SymKernel(F.grid, n - 1, vals)
    return ChaosFunctional(F.grid, mean, ks)


def conditional_expectation(F: ChaosFunctional, ts: TimeSet) -> ChaosFunctional:
    """E[F | sigma(increments in ts)]: project every kernel onto the set."""
    if ts.grid != F.grid:
        raise ValueError("time set and functional live on different grids")
    return ChaosFunctional(F.grid, F.mean, {n: project(f, ts) for n, f in F.kernels.items()})


def multiply(F: ChaosFunctional, G: ChaosFunctional) -> ChaosFunctional:
    """Exact pathwise product via the multiplication formula.

    I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(sym(f (x)_r g)).
    Raises when a term would exceed the supported order.
    """
    F._check(G)
    grid = F.grid
    mean = F.mean * G.mean
    acc: dict[int, SymKernel] = {}

    def put(n: int, k: SymKernel) -> None:
        acc[n] = acc[n].add(k) if n in acc else k

    for n, f in F.kernels.items():
        if G.mean != 0.0:
            put(n, f.scaled(G.mean))
    for n, g in G.kernels.items():
        if F.mean != 0.0:
            put(n, g.scaled(F.mean))
    for p, f in F.kernels.items():
        for q, g in G.kernels.items():
            for r in range(min(p, q) + 1):
                n = p + q - 2 * r
                coef = math.factorial(r) * math.comb(p, r) * math.comb(q, r)
                if n == 0:
                    mean += coef * f.inner(g)
                else:
                    put(n, contract(f, g, r).scaled(coef))
    return ChaosFunctional(grid, mean, acc)


# ---------------------------------------------------------------------------
# text round trip

def functional_to_text(F: ChaosFunctional, fp: TextIO) -> None:
    from .kernels import kernel_to_text

    fp.write(f"functional cells {F.grid.n_cells} mean {F.mean!r} kernels {len(F.kernels)}\n")
    for n in sorted(F.kernels):
        kernel_to_text(F.kernels[n], fp)
        fp.write("\n")


def functional_from_lines(lines, header: str) -> ChaosFunctional:
    from .kernels import read_kernel_block

    parts = header.split()
    if parts[:1] != ["functional"] or parts[1] != "cells" or parts[3] != "mean" or parts[5] != "kernels":
        raise ValueError(f"bad functional header {header!r}")
    grid = Grid(int(parts[2]))
    mean = float(parts[4])
    n_kernels = int(parts[6])
    ks: dict[int, SymKernel] = {}
    seen = 0
    while seen < n_kernels:
        line = next(lines, None)
        if line is None:
            raise ValueError("truncated functional text")
        line = line.strip()
        if not line:
            continue
        k = read_kernel_block(lines, line)
        ks[k.order] = k
        seen += 1
    return ChaosFunctional(grid, mean, ks)


def functional_from_text(fp: TextIO) -> ChaosFunctional:
    lines = iter(fp.read().splitlines())
    for line in lines:
        line = line.strip()
        if line:
            return functional_from_lines(lines, line)
    raise ValueError("empty functional text")
