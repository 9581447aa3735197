"""Symmetric piecewise-constant kernels on [0, 1]^n, stored by cell multiset.

A symmetric function that is constant on products of grid cells is
determined by its value on each sorted multiset of cell indices, so a
kernel of order n is a sparse map {(c_1 <= ... <= c_n): value}.  Stored
values are the function values themselves; counting distinct orderings of
a multiset recovers Lebesgue integrals, e.g.

    ||f||^2 = sum_mu f(mu)^2 * delta^n * n!/prod_j m_j!

where m_j are the multiplicities of mu.  The module implements the kernel
algebra needed by the chaos calculus: symmetrization, symmetrized tensor
products and contractions, projections onto cell sets, restriction by the
number of variables below a threshold, and time reversal.

Desk-scale caps: kernels accept at most MAX_CELLS cells and order at most
MAX_ORDER.  Dense constructors additionally refuse to enumerate more than
a few million multisets.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Iterator, Mapping, TextIO

import numpy as np

from .grid import Grid, TimeSet
from .paths import StepFunction

__all__ = [
    "MAX_ORDER",
    "MAX_CELLS",
    "SymKernel",
    "RawTensor",
    "symmetrize",
    "sym_tensor_product",
    "contract",
    "project",
    "restrict_below_count",
    "reverse_kernel",
    "tensor_power",
    "from_step",
    "constant_kernel",
    "kernel_to_text",
    "kernel_from_text",
    "read_kernel_block",
]

MAX_ORDER = 5
MAX_CELLS = 64
_DENSE_LIMIT = 2_000_000


def _multiplicities(mu: tuple[int, ...]) -> list[int]:
    out = []
    prev, run = None, 0
    for c in mu:
        if c == prev:
            run += 1
        else:
            if run:
                out.append(run)
            prev, run = c, 1
    if run:
        out.append(run)
    return out


def orderings(mu: tuple[int, ...]) -> int:
    """Number of distinct orderings of the multiset: n! / prod m_j!."""
    total = math.factorial(len(mu))
    for m in _multiplicities(mu):
        total //= math.factorial(m)
    return total


def _merge(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sorted(a + b))


def _counts(mu: tuple[int, ...]) -> dict[int, int]:
    d: dict[int, int] = {}
    for c in mu:
        d[c] = d.get(c, 0) + 1
    return d


def _remove(mu: tuple[int, ...], sub: tuple[int, ...]) -> tuple[int, ...]:
    out = list(mu)
    for c in sub:
        out.remove(c)
    return tuple(out)


def _split_weight(rho: tuple[int, ...], mu: tuple[int, ...]) -> int:
    """Number of ways to pick positions realizing sub-multiset mu inside rho."""
    rc, mc = _counts(rho), _counts(mu)
    w = 1
    for c, m in mc.items():
        w *= math.comb(rc[c], m)
    return w


class SymKernel:
    """Immutable sparse symmetric kernel of a fixed order on a grid."""

    __slots__ = ("grid", "order", "data")

    def __init__(self, grid: Grid, order: int, values: Mapping[tuple[int, ...], float]):
        if not 1 <= order <= MAX_ORDER:
            raise ValueError(f"kernel order {order} outside the supported range 1..{MAX_ORDER}")
        if grid.n_cells > MAX_CELLS:
            raise ValueError(f"kernels support at most {MAX_CELLS} cells, grid has {grid.n_cells}")
        data: dict[tuple[int, ...], float] = {}
        for mu, v in values.items():
            if len(mu) != order:
                raise ValueError(f"multiset {mu} does not have order {order}")
            if tuple(sorted(mu)) != tuple(mu):
                raise ValueError(f"multiset {mu} is not sorted")
            if mu[0] < 1 or mu[-1] > grid.n_cells:
                raise ValueError(f"multiset {mu} outside cells 1..{grid.n_cells}")
            if v != 0.0:
                data[tuple(mu)] = float(v)
        self.grid = grid
        self.order = order
        self.data = data

    @classmethod
    def zero(cls, grid: Grid, order: int) -> "SymKernel":
        return cls(grid, order, {})

    def value(self, mu: Iterable[int]) -> float:
        return self.data.get(tuple(sorted(mu)), 0.0)

    def items(self) -> Iterator[tuple[tuple[int, ...], float]]:
        return iter(self.data.items())

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.data.values())

    def norm_sq(self) -> float:
        d = self.grid.delta**self.order
        return sum(v * v * orderings(mu) for mu, v in self.data.items()) * d

    def inner(self, other: "SymKernel") -> float:
        self._check(other)
        small, big = (self.data, other.data) if len(self.data) <= len(other.data) else (other.data, self.data)
        d = self.grid.delta**self.order
        return sum(v * big.get(mu, 0.0) * orderings(mu) for mu, v in small.items()) * d

    def scaled(self, c: float) -> "SymKernel":
        return SymKernel(self.grid, self.order, {mu: v * c for mu, v in self.data.items()})

    def add(self, other: "SymKernel") -> "SymKernel":
        self._check(other)
        out = dict(self.data)
        for mu, v in other.data.items():
            out[mu] = out.get(mu, 0.0) + v
        return SymKernel(self.grid, self.order, out)

    def sub(self, other: "SymKernel") -> "SymKernel":
        return self.add(other.scaled(-1.0))

    def max_abs_diff(self, other: "SymKernel") -> float:
        self._check(other)
        keys = set(self.data) | set(other.data)
        return max((abs(self.data.get(mu, 0.0) - other.data.get(mu, 0.0)) for mu in keys), default=0.0)

    def map_values(self, fn: Callable[[tuple[int, ...], float], float]) -> "SymKernel":
        return SymKernel(self.grid, self.order, {mu: fn(mu, v) for mu, v in self.data.items()})

    def _check(self, other: "SymKernel") -> None:
        if other.grid != self.grid or other.order != self.order:
            raise ValueError("kernels differ in grid or order")

    def __repr__(self) -> str:
        return f"SymKernel(order={self.order}, cells={self.grid.n_cells}, nnz={len(self.data)})"


class RawTensor:
    """Unsymmetrized values on ordered cell tuples (input to symmetrize)."""

    __slots__ = ("grid", "order", "data")

    def __init__(self, grid: Grid, order: int, values: Mapping[tuple[int, ...], float]):
        if not 1 <= order <= MAX_ORDER:
            raise ValueError(f"tensor order {order} outside 1..{MAX_ORDER}")
        data: dict[tuple[int, ...], float] = {}
        for tup, v in values.items():
            if len(tup) != order:
                raise ValueError(f"tuple {tup} does not have order {order}")
            if any(not 1 <= c <= grid.n_cells for c in tup):
                raise ValueError(f"tuple {tup} outside cells 1..{grid.n_cells}")
            if v != 0.0:
                data[tuple(tup)] = float(v)
        self.grid = grid
        self.order = order
        self.data = data


def symmetrize(raw: RawTensor) -> SymKernel:
    """Average the tensor over all argument orderings.

    For each multiset the average runs over its distinct orderings; tuples
    absent from the tensor count as zero.
    """
    acc: dict[tuple[int, ...], float] = {}
    for tup, v in raw.data.items():
        mu = tuple(sorted(tup))
        acc[mu] = acc.get(mu, 0.0) + v
    return SymKernel(raw.grid, raw.order, {mu: s / orderings(mu) for mu, s in acc.items()})


def sym_tensor_product(f: SymKernel, g: SymKernel) -> SymKernel:
    """Symmetrized tensor product of orders p and q (no contraction).

    Value at a multiset rho:  C(p+q, p)^{-1} * sum over sub-multisets
    mu of rho of size p of [ways to place mu] * f(mu) * g(rho - mu).
    For disjoint supports this makes I(f) I(g) = I(f x g) exact.
    """
    if f.grid != g.grid:
        raise ValueError("kernels live on different grids")
    n = f.order + g.order
    if n > MAX_ORDER:
        raise ValueError(f"product order {n} exceeds the cap {MAX_ORDER}")
    acc: dict[tuple[int, ...], float] = {}
    for mu, a in f.data.items():
        for nu, b in g.data.items():
            rho = _merge(mu, nu)
            acc[rho] = acc.get(rho, 0.0) + a * b * _split_weight(rho, mu)
    scale = 1.0 / math.comb(n, f.order)
    return SymKernel(f.grid, n, {rho: v * scale for rho, v in acc.items()})


def _sub_multisets(counts: dict[int, int], size: int) -> Iterator[tuple[int, ...]]:
    cells = sorted(counts)
    def rec(i: int, remaining: int, acc: list[int]) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            yield tuple(acc)
            return
        if i == len(cells):
            return
        c = cells[i]
        for take in range(min(counts[c], remaining), -1, -1):
            yield from rec(i + 1, remaining - take, acc + [c] * take)
    return rec(0, size, [])


def contract(f: SymKernel, g: SymKernel, r: int) -> SymKernel:
    """Symmetrized r-fold contraction: integrate out r shared variables.

    Appears in the product formula for multiple integrals,
    I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(sym(f (x)_r g)).
    """
    if f.grid != g.grid:
        raise ValueError("kernels live on different grids")
    if not 0 <= r <= min(f.order, g.order):
        raise ValueError(f"contraction depth {r} out of range")
    if r == 0:
        return sym_tensor_product(f, g)
    n = f.order + g.order - 2 * r
    if n == 0:
        raise ValueError("full contraction is a scalar; use kernel.inner")
    if n > MAX_ORDER:
        raise ValueError(f"contraction order {n} exceeds the cap {MAX_ORDER}")
    dr = f.grid.delta**r
    acc: dict[tuple[int, ...], float] = {}
    for muf, a in f.data.items():
        cf = _counts(muf)
        for nug, b in g.data.items():
            cg = _counts(nug)
            common = {c: min(m, cg.get(c, 0)) for c, m in cf.items() if cg.get(c, 0)}
            if sum(common.values()) < r:
                continue
            for sigma in _sub_multisets(common, r):
                mu = _remove(muf, sigma)
                nu = _remove(nug, sigma)
                rho = _merge(mu, nu)
                w = orderings(sigma) * dr * _split_weight(rho, mu)
                acc[rho] = acc.get(rho, 0.0) + a * b * w
    scale = 1.0 / math.comb(n, f.order - r)
    return SymKernel(f.grid, n, {rho: v * scale for rho, v in acc.items()})


def project(f: SymKernel, ts: TimeSet) -> SymKernel:
    """Keep multisets with every cell inside the set (kernel of E[. | F_A])."""
    if ts.grid != f.grid:
        raise ValueError("time set and kernel live on different grids")
    return SymKernel(f.grid, f.order, {mu: v for mu, v in f.data.items() if ts.contains_multiset(mu)})


def restrict_below_count(f: SymKernel, q: int, t: float) -> SymKernel:
    """Keep multisets with exactly q cells at or before the boundary t.

    This realizes multiplication by the indicator of the region where
    exactly q coordinates sit below t; cells are never split because t is
    a boundary, so multisets with a repeated cell can only contribute when
    the whole repetition falls on one side.
    """
    if not 0 <= q <= f.order:
        raise ValueError(f"count {q} out of range 0..{f.order}")
    b = f.grid.boundary_index(t)
    out = {mu: v for mu, v in f.data.items() if sum(1 for c in mu if c <= b) == q}
    return SymKernel(f.grid, f.order, out)


def reverse_kernel(f: SymKernel) -> SymKernel:
    """Kernel of the time-reversed functional: cell k maps to n + 1 - k."""
    n = f.grid.n_cells
    return SymKernel(
        f.grid, f.order, {tuple(sorted(n + 1 - c for c in mu)): v for mu, v in f.data.items()}
    )


def _dense_guard(grid: Grid, order: int) -> None:
    count = math.comb(grid.n_cells + order - 1, order)
    if count > _DENSE_LIMIT:
        raise ValueError(
            f"dense kernel with {count} multisets exceeds the desk-scale limit {_DENSE_LIMIT}"
        )


def tensor_power(h: StepFunction, order: int) -> SymKernel:
    """h^{(x) order}: value at a multiset is the product of cell values."""
    if h.grid.n_cells > MAX_CELLS:
        raise ValueError(f"kernels support at most {MAX_CELLS} cells")
    _dense_guard(h.grid, order)
    support = [k for k in h.grid.cells() if h.values[k - 1] != 0.0]
    out: dict[tuple[int, ...], float] = {}
    for mu in itertools.combinations_with_replacement(support, order):
        v = 1.0
        for c in mu:
            v *= h.values[c - 1]
        out[mu] = v
    return SymKernel(h.grid, order, out)


def from_step(h: StepFunction) -> SymKernel:
    return SymKernel(h.grid, 1, {(k,): float(h.values[k - 1]) for k in h.grid.cells() if h.values[k - 1] != 0.0})


def constant_kernel(grid: Grid, order: int, value: float) -> SymKernel:
    _dense_guard(grid, order)
    cells = list(grid.cells())
    return SymKernel(grid, order, {mu: value for mu in itertools.combinations_with_replacement(cells, order)})


# ---------------------------------------------------------------------------
# text round trip: header "order n cells N", then "c_1,...,c_n=value" lines

def kernel_to_text(f: SymKernel, fp: TextIO) -> None:
    fp.write(f"order {f.order} cells {f.grid.n_cells}\n")
    for mu in sorted(f.data):
        fp.write(",".join(str(c) for c in mu) + "=" + repr(f.data[mu]) + "\n")


def read_kernel_block(lines: Iterator[str], header: str) -> SymKernel:
    """Parse one kernel block given its already-consumed header line."""
    parts = header.split()
    if len(parts) != 4 or parts[0] != "order" or parts[2] != "cells":
        raise ValueError(f"bad kernel header {header!r}")
    order, n_cells = int(parts[1]), int(parts[3])
    grid = Grid(n_cells)
    values: dict[tuple[int, ...], float] = {}
    for line in lines:
        line = line.strip()
        if not line:
            break
        mu_text, _, v_text = line.partition("=")
        mu = tuple(int(c) for c in mu_text.split(","))
        values[mu] = float(v_text)
    return SymKernel(grid, order, values)


def kernel_from_text(fp: TextIO) -> SymKernel:
    lines = iter(fp.read().splitlines())
    for line in lines:
        line = line.strip()
        if line:
            return read_kernel_block(lines, line)
    raise ValueError("empty kernel text")
