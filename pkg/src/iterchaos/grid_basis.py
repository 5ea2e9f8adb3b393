"""Dyadic grids on [0, T], step functions and the normalized indicator basis.

Cell ``k`` of a grid at level ``L`` is ``](k)T/2^L, (k+1)T/2^L]`` and the basis
element attached to it is ``e_k = 1_{I_k} / sqrt(|I_k|)``.  Everything here is
closed form; no quadrature is ever performed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GridError(ValueError):
    """Raised on grid mismatches and off-grid times."""


@dataclass(frozen=True)
class Grid:
    T: float
    level: int

    def __post_init__(self):
        if not self.T > 0:
            raise GridError(f"horizon must be positive, got {self.T}")
        if self.level < 0:
            raise GridError(f"level must be >= 0, got {self.level}")

    @property
    def n_cells(self) -> int:
        return 2**self.level

    @property
    def cell_length(self) -> float:
        return self.T / self.n_cells

    def points(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.cell_length

    def refines(self, other: "Grid") -> bool:
        """True when every cell of ``other`` is a union of cells of ``self``."""
        return self.T == other.T and self.level >= other.level

    def point_index(self, s: float, tol: float = 1e-12) -> int:
        """Index k with s == k * cell_length; off-grid times are rejected."""
        x = s / self.cell_length
        k = round(x)
        if abs(x - k) > tol * max(1.0, abs(x)) or k < 0 or k > self.n_cells:
            raise GridError(f"time {s} is not a point of {self}")
        return int(k)


@dataclass(frozen=True)
class StepFn:
    """Piecewise-constant function, one value per grid cell."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.shape != (self.grid.n_cells,):
            raise GridError(
                f"expected {self.grid.n_cells} cell values, got shape {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0) -> "StepFn":
        return cls(grid, np.full(grid.n_cells, float(c)))

    @classmethod
    def indicator(cls, grid: Grid, a: float, b: float) -> "StepFn":
        """1_{]a, b]} for grid points a <= b."""
        i, j = grid.point_index(a), grid.point_index(b)
        v = np.zeros(grid.n_cells)
        v[i:j] = 1.0
        return cls(grid, v)

    @classmethod
    def basis_element(cls, grid: Grid, k: int) -> "StepFn":
        v = np.zeros(grid.n_cells)
        v[k] = 1.0 / math.sqrt(grid.cell_length)
        return cls(grid, v)

    def refine(self, grid: Grid) -> "StepFn":
        if not grid.refines(self.grid):
            raise GridError(f"{grid} does not refine {self.grid}")
        rep = 2 ** (grid.level - self.grid.level)
        return StepFn(grid, np.repeat(self.values, rep))

    def __add__(self, other: "StepFn") -> "StepFn":
        g = _common(self.grid, other.grid)
        return StepFn(g, self.refine(g).values + other.refine(g).values)

    def __mul__(self, other):
        if isinstance(other, StepFn):
            g = _common(self.grid, other.grid)
            return StepFn(g, self.refine(g).values * other.refine(g).values)
        return StepFn(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def inner(self, other: "StepFn") -> float:
        g = _common(self.grid, other.grid)
        return float(np.dot(self.refine(g).values, other.refine(g).values) * g.cell_length)

    def norm2(self) -> float:
        return self.inner(self)


def _common(a: Grid, b: Grid) -> Grid:
    if a.T != b.T:
        raise GridError(f"grids {a} and {b} have different horizons")
    return a if a.level >= b.level else b


@dataclass(frozen=True)
class BasisSpec:
    grid: Grid

    @property
    def size(self) -> int:
        return self.grid.n_cells

    def gram(self) -> np.ndarray:
        # indicators of disjoint cells, each normalized by its own length
        return np.eye(self.size)


@dataclass(frozen=True)
class Kernel2:
    """Coefficients F[j, k] = <F, e_j (x) e_k> of an element of H (x) H.

    ``exact_norm2`` is the L2 squared norm of the kernel before projection,
    when it is known in closed form (None otherwise).
    """

    coef: np.ndarray = field(repr=False)
    exact_norm2: float | None = None

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=float).copy()
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"kernel must be square, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @property
    def size(self) -> int:
        return self.coef.shape[0]

    @property
    def T(self) -> "Kernel2":
        return Kernel2(self.coef.T, self.exact_norm2)

    def __add__(self, other: "Kernel2") -> "Kernel2":
        return Kernel2(self.coef + other.coef)

    def projected_norm2(self) -> float:
        return float(np.sum(self.coef**2))


def project(h: StepFn, basis: BasisSpec) -> np.ndarray:
    """Coefficients <h, e_k>; h must live on the basis grid or a coarsening."""
    if not basis.grid.refines(h.grid):
        raise GridError(f"basis grid {basis.grid} does not refine {h.grid}")
    v = h.refine(basis.grid).values
    return v * math.sqrt(basis.grid.cell_length)


def reconstruct(coef: np.ndarray, basis: BasisSpec) -> StepFn:
    return StepFn(basis.grid, np.asarray(coef) / math.sqrt(basis.grid.cell_length))


def causal_kernel(h: StepFn, g: StepFn, basis: BasisSpec) -> Kernel2:
    """Projection of (x, y) -> h(x) g(y) 1{x < y} onto e_j (x) e_k.

    Off the diagonal the cells lie entirely on one side of x < y; on the
    diagonal the triangle takes exactly half the square.
    """
    hv = h.refine(basis.grid).values if basis.grid.refines(h.grid) else None
    gv = g.refine(basis.grid).values if basis.grid.refines(g.grid) else None
    if hv is None or gv is None:
        raise GridError("step functions must be representable on the basis grid")
    d = basis.grid.cell_length
    F = np.triu(np.outer(hv, gv) * d, k=1)
    F[np.diag_indices_from(F)] = hv * gv * d / 2.0
    # sum_{j<k} h_j^2 g_k^2 d^2 + sum_j h_j^2 g_j^2 d^2 / 2
    h2, g2 = hv**2, gv**2
    cum = np.concatenate(([0.0], np.cumsum(h2)[:-1]))
    norm2 = float(np.dot(cum, g2) * d * d + np.dot(h2, g2) * d * d / 2.0)
    return Kernel2(F, norm2)


def tensor_kernel(h: StepFn, g: StepFn, basis: BasisSpec) -> Kernel2:
    """Plain h (x) g, without the causal indicator."""
    a, b = project(h, basis), project(g, basis)
    return Kernel2(np.outer(a, b), h.norm2() * g.norm2())


def restrict(h: StepFn, s: float) -> StepFn:
    """h * 1_{]0, s]}; s must be a point of h's grid."""
    k = h.grid.point_index(s)
    v = h.values.copy()
    v[k:] = 0.0
    return StepFn(h.grid, v)


def restrict_between(h: StepFn, s: float, t: float) -> StepFn:
    """h * 1_{]s, t]}."""
    i, j = h.grid.point_index(s), h.grid.point_index(t)
    v = np.zeros_like(h.values)
    v[i:j] = h.values[i:j]
    return StepFn(h.grid, v)


def block_sum(F: np.ndarray, factor: int) -> np.ndarray:
    """Coarsen a coefficient matrix by summing factor x factor blocks.

    Coefficients against e_j (x) e_k of a coarse cell pair relate to the fine
    ones by the sum divided by ``factor`` (normalization of the indicators).
    """
    n = F.shape[0] // factor
    return F.reshape(n, factor, n, factor).sum(axis=(1, 3)) / factor


def load_stepfn_csv(path: str | Path, grid: Grid) -> StepFn:
    """Read ``cell_index,value`` rows (header required); missing cells are 0."""
    v = np.zeros(grid.n_cells)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"cell_index", "value"}:
            raise GridError(f"{path}: header must be 'cell_index,value'")
        for row in reader:
            k = int(row["cell_index"])
            if not 0 <= k < grid.n_cells:
                raise GridError(f"{path}: cell index {k} outside grid {grid}")
            v[k] = float(row["value"])
    return StepFn(grid, v)


def save_stepfn_csv(h: StepFn, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "value"])
        for k, x in enumerate(h.values):
            w.writerow([k, repr(float(x))])
