"""The double integral int Phi(h)_s dPhi(g)_s and its companions.

Z_t is built from two causal kernels: the strictly-lower part read by phi11
carries the "h earlier, g later" products, the diagonal read by phi2 carries
half of each cell's square.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chaos_model import (
    GradedChaos,
    Realization,
    evaluate,
    phi2,
    phi11,
    product_decompose,
)
from .dist_moments import Model
from .grid_basis import (
    BasisSpec,
    Grid,
    GridError,
    Kernel2,
    StepFn,
    causal_kernel,
    restrict,
    restrict_between,
)
from .poly_algebra import expect


@dataclass(frozen=True)
class IntegralSpec:
    h: StepFn
    g: StepFn
    t: float
    basis: BasisSpec
    model: Model

    def __post_init__(self):
        self.basis.grid.point_index(self.t)
        for f in (self.h, self.g):
            if not self.basis.grid.refines(f.grid):
                raise GridError(f"{f.grid} is not representable on basis {self.basis.grid}")

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    def at(self, t: float) -> "IntegralSpec":
        return IntegralSpec(self.h, self.g, t, self.basis, self.model)

    def swapped(self) -> "IntegralSpec":
        return IntegralSpec(self.g, self.h, self.t, self.basis, self.model)

    def refined_h(self) -> StepFn:
        return self.h.refine(self.grid)

    def refined_g(self) -> StepFn:
        return self.g.refine(self.grid)


def integral_kernel(spec: IntegralSpec) -> Kernel2:
    """h (x) g1_{]0,t]} 1_C projected on the basis."""
    return causal_kernel(spec.refined_h(), restrict(spec.refined_g(), spec.t), spec.basis)


def double_integral(spec: IntegralSpec) -> GradedChaos:
    """phi11(h(x)g 1_C + g(x)h 1_Cbar) + phi2(h(x)g 1_C) at horizon t."""
    K = integral_kernel(spec)
    # g (x) h 1_Cbar is the transpose of h (x) g 1_C off the diagonal
    lower = Kernel2(K.coef + K.coef.T - 2 * np.diag(np.diag(K.coef)))
    return phi11(lower, spec.model, spec.basis) + phi2(K, spec.model, spec.basis)


def riemann_sum(spec: IntegralSpec, partition: Grid) -> GradedChaos:
    """sum_k phi(h 1_{]0,t_k]}) phi(g 1_{]t_k,t_{k+1}]}) over partition points <= t."""
    if not spec.grid.refines(partition):
        raise GridError(f"partition {partition} must coarsen the basis grid {spec.grid}")
    pts = [p for p in partition.points() if p <= spec.t + 1e-12 * spec.grid.T]
    h, g = spec.refined_h(), spec.refined_g()
    total = GradedChaos.zero(spec.model, spec.basis)
    for a, b in zip(pts[:-1], pts[1:]):
        if a == 0.0:
            continue
        p2, p11, c = product_decompose(restrict(h, a), restrict_between(g, a, b), spec.basis, spec.model)
        total = total + p2 + p11 + c
    return total


def ibp_residual(h: StepFn, g: StepFn, basis: BasisSpec, model: Model) -> GradedChaos:
    """phi(h)phi(g) - int Phi(h) dPhi(g) - int Phi(g) dPhi(h) - <h, g>, at t = T."""
    spec = IntegralSpec(h, g, basis.grid.T, basis, model)
    p2, p11, c = product_decompose(h, g, basis, model)
    return p2 + p11 + c - double_integral(spec) - double_integral(spec.swapped()) - h.inner(g)


def second_moment(spec: IntegralSpec, oracle: bool = True) -> dict[str, float]:
    """E[Z_t^2] two ways.

    ``direct`` expands Z^2 as a polynomial and takes its expectation (or uses
    the graded isometry when ``oracle`` is False, for large bases);
    ``formula`` is ||h(x)g1_C||^2 + sum_j <h(x)g1_C, e_j(x)e_j>^2 (E X_j^4 - 3).
    """
    K = integral_kernel(spec)
    z = double_integral(spec)
    if oracle:
        p = z.to_poly()
        direct = expect(p * p, spec.model)
    else:
        direct = z.second_moment()
    diag = np.diag(K.coef)
    m4 = np.array([spec.model.moments(j)[4] for j in range(len(diag))])
    formula = K.exact_norm2 + float(np.sum(diag**2 * (m4 - 3.0)))
    return {"direct": float(direct), "formula": float(formula)}


def z_path(spec: IntegralSpec, omega: Realization, partition: Grid) -> np.ndarray:
    """Z_{t_k}(omega) at each partition point, from double_integral at each horizon."""
    if not spec.grid.refines(partition):
        raise GridError(f"partition {partition} must coarsen the basis grid {spec.grid}")
    out = []
    for t in partition.points():
        out.append(0.0 if t == 0.0 else evaluate(double_integral(spec.at(t)), omega))
    return np.array(out)


def z_path_fast(h: StepFn, g: StepFn, basis: BasisSpec, x: np.ndarray) -> np.ndarray:
    """Z at every basis grid point for a batch of realizations x (M, N).

    Uses Z_{i+1} = Z_i + g_i sqrt(d) X_i U_i + h_i g_i d/2 (X_i^2 - 1) with
    U_i = sum_{k<i} h_k sqrt(d) X_k; returns shape (M, N + 1).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = basis.grid.cell_length
    hv, gv = h.refine(basis.grid).values, g.refine(basis.grid).values
    sd = np.sqrt(d)
    U = np.cumsum(hv * sd * x, axis=1) - hv * sd * x  # exclusive running sum
    inc = gv * sd * x * U + hv * gv * d / 2.0 * (x * x - 1.0)
    Z = np.zeros((x.shape[0], x.shape[1] + 1))
    Z[:, 1:] = np.cumsum(inc, axis=1)
    return Z
