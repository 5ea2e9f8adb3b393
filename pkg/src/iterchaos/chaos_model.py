"""Random variables built from the driving sequence X_0, X_1, ...

A ``GradedChaos`` is a constant plus symmetric kernels of orders 1..4; the
order-n kernel f is read through Phi^{on}, which sends the symmetric basis
element attached to the multiset {(j_i, alpha_i)} to prod_i P_{alpha_i}(X_{j_i}).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dist_moments import MAX_DEGREE, Model
from .grid_basis import BasisSpec, Kernel2, StepFn, project, tensor_kernel
from .poly_algebra import MultiPoly, basis_poly, regrade, regrade_strata
from .tensor_calc import (
    OrderError,
    Stratum,
    SymTensor,
    a_inner,
    index_of,
)


class RealizationError(ValueError):
    pass


@dataclass(frozen=True)
class Realization:
    x: np.ndarray = field(repr=False)
    seed: int | None = None
    replicate: int | None = None
    model: str = ""

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class GradedChaos:
    constant: float
    kernels: dict[int, SymTensor]
    model: Model
    basis: BasisSpec | None = None

    def __post_init__(self):
        ks = {}
        for n, f in self.kernels.items():
            if f.order != n:
                raise OrderError(f"kernel at order {n} has order {f.order}")
            if not f.is_zero():
                ks[n] = f
        object.__setattr__(self, "kernels", ks)
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def zero(cls, model: Model, basis: BasisSpec | None = None) -> "GradedChaos":
        return cls(0.0, {}, model, basis)

    @classmethod
    def from_strata(cls, strata: dict[Stratum, float], model: Model, basis=None) -> "GradedChaos":
        by_order: dict[int, dict] = defaultdict(dict)
        const = 0.0
        for s, c in strata.items():
            n = sum(a for _, a in s)
            if n == 0:
                const += c
            else:
                by_order[n][s] = c
        return cls(const, {n: SymTensor.from_coefs(n, d) for n, d in by_order.items()}, model, basis)

    def kernel(self, n: int) -> SymTensor:
        return self.kernels.get(n, SymTensor.zero(n))

    def orders(self) -> list[int]:
        return sorted(self.kernels)

    def strata(self):
        if self.constant:
            yield (), self.constant
        for n in self.orders():
            yield from self.kernels[n].coefs()

    def null_strata(self) -> list[tuple[Stratum, float]]:
        """Components on products with some q_alpha = 0 (identically zero variables)."""
        return [
            (s, c)
            for s, c in self.strata()
            if any(self.model.opoly(j).is_null(a) for j, a in s)
        ]

    def __add__(self, other: "GradedChaos") -> "GradedChaos":
        if isinstance(other, (int, float)):
            return GradedChaos(self.constant + other, self.kernels, self.model, self.basis)
        ks = dict(self.kernels)
        for n, f in other.kernels.items():
            ks[n] = ks[n] + f if n in ks else f
        return GradedChaos(self.constant + other.constant, ks, self.model, self.basis or other.basis)

    __radd__ = __add__

    def __mul__(self, c: float) -> "GradedChaos":
        return GradedChaos(
            self.constant * c, {n: f * c for n, f in self.kernels.items()}, self.model, self.basis
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other: "GradedChaos") -> "GradedChaos":
        return self + (-other)

    def max_abs_entry(self) -> float:
        return max([abs(self.constant)] + [f.max_abs() for f in self.kernels.values()])

    def to_poly(self, exact: bool = False) -> MultiPoly:
        """Monomial expansion; ``exact`` keeps rational coefficients (floats convert exactly)."""
        conv = Fraction if exact else float
        out = MultiPoly.const(conv(self.constant))
        for n in self.orders():
            for s, c in self.kernels[n].coefs():
                out = out + basis_poly(s, self.model, exact) * conv(c)
        return out

    def variables(self) -> set[int]:
        return {j for f in self.kernels.values() for k in f.values for j in k}

    def second_moment(self) -> float:
        """E[z^2] from the isometry, order by order (no polynomial expansion)."""
        return self.constant**2 + sum(a_inner(f, f, self.model) for f in self.kernels.values())

    def mean(self) -> float:
        return self.constant

    def to_json(self) -> str:
        doc = {
            "model": str(self.model),
            "constant": self.constant,
            "orders": {
                str(n): [
                    {"index": list(k), "value": v}
                    for k, v in sorted(self.kernels[n].values.items())
                ]
                for n in self.orders()
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, model: Model) -> "GradedChaos":
        doc = json.loads(text)
        ks = {
            int(n): SymTensor(int(n), {tuple(e["index"]): e["value"] for e in entries})
            for n, entries in doc["orders"].items()
        }
        return cls(doc["constant"], ks, model)


def _as_model(model) -> Model:
    return model if isinstance(model, Model) else Model(model)


def phi(h: StepFn, basis: BasisSpec, model) -> GradedChaos:
    """phi(h) = sum_k <h, e_k> X_k."""
    return GradedChaos(0.0, {1: SymTensor.vector(project(h, basis))}, _as_model(model), basis)


def phi_vector(c, model, basis=None) -> GradedChaos:
    return GradedChaos(0.0, {1: SymTensor.vector(c)}, _as_model(model), basis)


def phi2_poly(f: Kernel2) -> MultiPoly:
    """sum_j <f, e_j (x) e_j> (X_j^2 - 1) as a polynomial."""
    terms: dict = {}
    const = 0.0
    for j, v in enumerate(np.diag(f.coef)):
        if v:
            terms[((j, 2),)] = v
            const -= v
    terms[()] = const
    return MultiPoly(terms)


def phi11_poly(f: Kernel2) -> MultiPoly:
    """sum_j sum_{k<j} <f, e_j (x) e_k> X_k X_j (upper triangle ignored)."""
    F = f.coef
    terms = {}
    for j, k in zip(*np.nonzero(np.tril(F, k=-1))):
        terms[((int(k), 1), (int(j), 1))] = F[j, k]
    return MultiPoly(terms)


def phi2(f: Kernel2, model, basis=None) -> GradedChaos:
    return _with_basis(regrade(phi2_poly(f), _as_model(model)), basis)


def phi11(f: Kernel2, model, basis=None) -> GradedChaos:
    return _with_basis(regrade(phi11_poly(f), _as_model(model)), basis)


def _with_basis(z: GradedChaos, basis) -> GradedChaos:
    return GradedChaos(z.constant, z.kernels, z.model, basis)


def product_decompose(h: StepFn, g: StepFn, basis: BasisSpec, model):
    """(phi2(h(x)g), phi11(h(x)g + g(x)h), <h, g>), summing to phi(h) phi(g)."""
    hg = tensor_kernel(h, g, basis)
    gh = tensor_kernel(g, h, basis)
    return phi2(hg, model, basis), phi11(hg + gh, model, basis), h.inner(g)


def phi_circ_n(f: SymTensor, model, basis=None) -> GradedChaos:
    """Pure order-n element Phi^{on}(f)."""
    if f.order > MAX_DEGREE:
        raise OrderError(f"order {f.order} > {MAX_DEGREE}")
    if f.order == 0:
        return GradedChaos(f.as_scalar(), {}, _as_model(model), basis)
    return GradedChaos(0.0, {f.order: f}, _as_model(model), basis)


def evaluate(z: GradedChaos, omega) -> float | np.ndarray:
    """Value of z at one realization (or a batch: x of shape (M, N))."""
    x = np.asarray(omega.x if isinstance(omega, Realization) else omega, dtype=float)
    need = max(z.variables(), default=-1)
    if x.shape[-1] <= need:
        raise RealizationError(f"realization has {x.shape[-1]} variables, index {need} needed")
    cache: dict[tuple[int, int], np.ndarray] = {}

    def P(j, a):
        if (j, a) not in cache:
            cache[(j, a)] = z.model.opoly(j).eval(a, x[..., j])
        return cache[(j, a)]

    out = np.full(x.shape[:-1], z.constant)
    for n in z.orders():
        for s, c in z.kernels[n].coefs():
            term = c
            for j, a in s:
                term = term * P(j, a)
            out = out + term
    return float(out) if out.ndim == 0 else out


def truncate(z: GradedChaos, n_keep: int) -> GradedChaos:
    """Drop every kernel entry touching an index >= n_keep."""
    ks = {
        n: SymTensor(n, {k: v for k, v in f.values.items() if max(k) < n_keep})
        for n, f in z.kernels.items()
    }
    return GradedChaos(z.constant, ks, z.model, z.basis)


def regrade_poly(p: MultiPoly, model) -> GradedChaos:
    return GradedChaos.from_strata(regrade_strata(p, _as_model(model)), _as_model(model))


__all__ = [
    "GradedChaos",
    "Realization",
    "RealizationError",
    "evaluate",
    "index_of",
    "phi",
    "phi11",
    "phi2",
    "phi_circ_n",
    "product_decompose",
    "truncate",
]
