"""Symmetric tensors over the indicator basis and the operators acting on them.

A ``SymTensor`` of order n stores the full-tensor value at each sorted index
tuple; the value at any permutation of the tuple is the same.  The symmetric
basis element attached to a multiset u is sym(e_{u_1} x ... x e_{u_n}), whose
full-tensor entries are 1/mult(u), so the coefficient of f on that element
(the one Phi^{on} sends to a product of orthogonal polynomials) is
``mult(u) * value(u)``.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Iterator, Mapping

import numpy as np

from .dist_moments import MAX_DEGREE, Model
from .poly_algebra import multinomial

Index = tuple[int, ...]
Stratum = tuple[tuple[int, int], ...]


class OrderError(ValueError):
    pass


def stratum_of(idx: Index) -> Stratum:
    return tuple(sorted(Counter(idx).items()))


def index_of(stratum: Stratum) -> Index:
    return tuple(j for j, a in stratum for _ in range(a))


def mult(idx: Index) -> int:
    return multinomial(Counter(idx).values())


@dataclass(frozen=True)
class SymTensor:
    order: int
    values: Mapping[Index, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.order <= MAX_DEGREE:
            raise OrderError(f"order {self.order} outside 0..{MAX_DEGREE}")
        clean = {}
        for k, v in self.values.items():
            k = tuple(sorted(k))
            if len(k) != self.order:
                raise OrderError(f"index {k} does not have order {self.order}")
            if v != 0.0:
                clean[k] = float(v)
        object.__setattr__(self, "values", clean)

    @classmethod
    def zero(cls, order: int) -> "SymTensor":
        return cls(order, {})

    @classmethod
    def scalar(cls, c: float) -> "SymTensor":
        return cls(0, {(): c})

    @classmethod
    def vector(cls, v) -> "SymTensor":
        return cls(1, {(j,): x for j, x in enumerate(np.asarray(v, dtype=float))})

    @classmethod
    def basis(cls, *idx: int) -> "SymTensor":
        """The symmetric basis element e_{i1} o ... o e_{in}."""
        idx = tuple(sorted(idx))
        return cls(len(idx), {idx: 1.0 / mult(idx)})

    @classmethod
    def from_coefs(cls, order: int, coefs: Mapping[Stratum, float]) -> "SymTensor":
        """Build from coefficients on the symmetric basis elements."""
        vals = {}
        for s, c in coefs.items():
            idx = index_of(s)
            vals[idx] = c / mult(idx)
        return cls(order, vals)

    def coefs(self) -> Iterator[tuple[Stratum, float]]:
        for idx, v in self.values.items():
            yield stratum_of(idx), mult(idx) * v

    def is_zero(self) -> bool:
        return not self.values

    def __add__(self, other: "SymTensor") -> "SymTensor":
        if other.order != self.order:
            raise OrderError(f"cannot add orders {self.order} and {other.order}")
        out = dict(self.values)
        for k, v in other.values.items():
            out[k] = out.get(k, 0.0) + v
        return SymTensor(self.order, out)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        return self + other * -1.0

    def __mul__(self, c: float) -> "SymTensor":
        return SymTensor(self.order, {k: v * c for k, v in self.values.items()})

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max((abs(v) for v in self.values.values()), default=0.0)

    def to_full(self, n: int) -> np.ndarray:
        out = np.zeros((n,) * self.order)
        for idx, v in self.values.items():
            for p in set(permutations(idx)):
                out[p] = v
        return out

    def as_scalar(self) -> float:
        if self.order != 0:
            raise OrderError("not an order-0 tensor")
        return self.values.get((), 0.0)

    def tensor_inner(self, other: "SymTensor") -> float:
        """Inner product of the full arrays in H^{(x) n}."""
        return sum(mult(k) * v * other.values.get(k, 0.0) for k, v in self.values.items())

    def tensor_norm2(self) -> float:
        return self.tensor_inner(self)


def sym(t: np.ndarray) -> SymTensor:
    """Symmetrize a full (dense) tensor."""
    t = np.asarray(t, dtype=float)
    n = t.ndim
    if n > MAX_DEGREE:
        raise OrderError(f"order {n} > {MAX_DEGREE}")
    if n == 0:
        return SymTensor.scalar(float(t))
    vals: dict[Index, float] = defaultdict(float)
    for idx in zip(*np.nonzero(t)):
        idx = tuple(int(i) for i in idx)
        vals[tuple(sorted(idx))] += t[idx]
    # each distinct ordering occurs prod(a_i!) times among the n! permutations
    return SymTensor(n, {k: v / mult(k) for k, v in vals.items()})


def sym_matrix(F: np.ndarray) -> SymTensor:
    F = np.asarray(F, dtype=float)
    S = (F + F.T) / 2.0
    vals = {}
    for j, k in zip(*np.nonzero(np.triu(S))):
        vals[(int(j), int(k))] = S[j, k]
    return SymTensor(2, vals)


def circ(f: SymTensor, g: SymTensor) -> SymTensor:
    """Symmetric tensor product sym(f (x) g)."""
    n = f.order + g.order
    if n > MAX_DEGREE:
        raise OrderError(f"combined order {n} > {MAX_DEGREE}")
    out: dict[Index, float] = defaultdict(float)
    gc = [(index_of(s), c) for s, c in g.coefs()]
    for s, c in f.coefs():
        a = index_of(s)
        for b, d in gc:
            out[tuple(sorted(a + b))] += c * d
    return SymTensor(n, {k: v / mult(k) for k, v in out.items()})


def _stratum_weight(stratum: Stratum, model: Model) -> float:
    """prod q_{alpha_i}(X_{j_i}) / prod alpha_i!  (square of the A scaling)."""
    w = 1.0
    for j, a in stratum:
        w *= model.opoly(j).q[a] / math.factorial(a)
    return w


def a_scale(f: SymTensor, model: Model) -> SymTensor:
    """Scale each stratum by sqrt(prod q / prod alpha!)."""
    return SymTensor(
        f.order,
        {k: v * math.sqrt(_stratum_weight(stratum_of(k), model)) for k, v in f.values.items()},
    )


def a_inner(f: SymTensor, g: SymTensor, model: Model) -> float:
    """<f, g>_A = n! <A f, A g>; equals E[Phi^{on}(f) Phi^{on}(g)]."""
    if f.order != g.order:
        return 0.0
    return math.factorial(f.order) * a_scale(f, model).tensor_inner(a_scale(g, model))


def a_norm(f: SymTensor, model: Model) -> float:
    return math.sqrt(max(a_inner(f, f, model), 0.0))


def contract1(f: SymTensor, model: Model, n: int | None = None):
    """(f ~_1 f)(s1, s3) = int Af(s1, s2) Af(s3, s2) ds2, as a Kernel2."""
    from .grid_basis import Kernel2

    if f.order != 2:
        raise OrderError("contraction needs an order-2 tensor")
    if n is None:
        n = 1 + max((max(k) for k in f.values), default=-1)
    M = a_scale(f, model).to_full(max(n, 1))
    return Kernel2(M @ M.T)


def pi1(f: SymTensor) -> SymTensor:
    """Orthogonal projection on span{e_j o e_j}."""
    if f.order != 2:
        raise OrderError("pi1 acts on order-2 tensors")
    return SymTensor(2, {k: v for k, v in f.values.items() if k[0] == k[1]})


def _compositions(k: int, caps: list[int]) -> Iterator[tuple[int, ...]]:
    """k_1 + ... + k_r = k with 0 <= k_i <= caps[i]."""
    for ks in product(*(range(c + 1) for c in caps)):
        if sum(ks) == k:
            yield ks


def lowering_coef(stratum: Stratum, ks, model: Model) -> float:
    c = 1.0
    for (j, a), k in zip(stratum, ks):
        if k:
            tab = model.opoly(j)
            c *= tab.gamma[a, a - k] - tab.Gamma[a, a - k]
    return c


def a_op(n: int, k: int, f: SymTensor, model: Model) -> SymTensor:
    """Lowering operator a_k^n: H^{on} -> H^{o(n-k)}."""
    if not 1 <= k <= n <= MAX_DEGREE or f.order != n:
        raise OrderError(f"a_op needs 1 <= k <= n <= {MAX_DEGREE} and order n (got n={n}, k={k}, order {f.order})")
    out: dict[Stratum, float] = defaultdict(float)
    for s, c in f.coefs():
        for ks in _compositions(k, [a for _, a in s]):
            lc = lowering_coef(s, ks, model)
            if lc:
                low = tuple((j, a - kk) for (j, a), kk in zip(s, ks) if a - kk > 0)
                out[low] += c * lc
    return SymTensor.from_coefs(n - k, out)


def _alpha_compositions(n: int) -> Iterator[tuple[int, ...]]:
    """Compositions of n into positive parts (orderings kept)."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in _alpha_compositions(n - first):
            yield (first,) + rest


def sup_constants(model: Model, n: int) -> dict[str, dict[int, float]]:
    """C(k, n) and A(k, n) by enumeration over compositions of k and n.

    A(k, n) is taken over the alpha-compositions that admit a k-decomposition.
    Per-index models take the sup over all families they use.
    """
    C: dict[int, float] = {}
    A: dict[int, float] = {}
    fams = model.families()
    for k in range(0, n + 1):
        cs, as_ = [], []
        for fam in fams:
            m = Model(fam)
            for alphas in _alpha_compositions(n):
                s = tuple(enumerate(alphas))
                has = False
                for ks in _compositions(k, list(alphas)):
                    has = True
                    if k:
                        cs.append(lowering_coef(s, ks, m))
                if has:
                    as_.append(_stratum_weight(s, m))
        C[k] = float(max(cs)) if cs else 0.0
        A[k] = float(max(as_)) if as_ else 0.0
    return {"C": C, "A": A}
