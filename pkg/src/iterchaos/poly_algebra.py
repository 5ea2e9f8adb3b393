"""Sparse multivariate polynomials in the driving variables X_j.

A monomial is a tuple of ``(j, power)`` pairs sorted by ``j`` with positive
powers; the constant monomial is ``()``.  Expectations use independence: the
expectation of a monomial is the product of the per-variable raw moments.
"""

from __future__ import annotations

import math
from collections import defaultdict
from itertools import product
from typing import Iterable, Mapping

from .dist_moments import (
    MAX_DEGREE,
    MAX_MOMENT,
    DistributionError,
    Model,
    exact_moments,
    exact_orthopoly,
)

Monomial = tuple[tuple[int, int], ...]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for j, p in b:
        d[j] = d.get(j, 0) + p
    return tuple(sorted(d.items()))


class MultiPoly:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        self.terms: dict[Monomial, float] = {
            k: v for k, v in (terms or {}).items() if v != 0
        }

    @classmethod
    def const(cls, c: float) -> "MultiPoly":
        return cls({(): c})

    @classmethod
    def var(cls, j: int, power: int = 1) -> "MultiPoly":
        return cls({((j, power),): 1}) if power else cls.const(1)

    @classmethod
    def univariate(cls, j: int, coefs: Iterable[float]) -> "MultiPoly":
        """sum_i coefs[i] * X_j**i."""
        return cls({(((j, i),) if i else ()): c for i, c in enumerate(coefs)})

    def __add__(self, other):
        other = _lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return MultiPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            return MultiPoly({k: v * other for k, v in self.terms.items()})
        out: dict[Monomial, float] = defaultdict(int)
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                out[_mono_mul(ka, kb)] += va * vb
        return MultiPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = MultiPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, MultiPoly) and self.terms == other.terms

    def __repr__(self):
        return f"MultiPoly({len(self.terms)} terms)"

    def max_abs_coef(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def variables(self) -> set[int]:
        return {j for k in self.terms for j, _ in k}

    def degree(self) -> int:
        return max((sum(p for _, p in k) for k in self.terms), default=0)

    def max_var_degree(self) -> int:
        return max((p for k in self.terms for _, p in k), default=0)

    def constant(self) -> float:
        return self.terms.get((), 0.0)

    def evaluate(self, x) -> float:
        total = 0.0
        for k, v in self.terms.items():
            m = v
            for j, p in k:
                m *= x[j] ** p
            total += m
        return total

    def dump(self) -> str:
        """Sorted ``exponents:coefficient`` lines, for golden files."""
        lines = []
        for k in sorted(self.terms):
            mono = " ".join(f"{j}^{p}" for j, p in k) or "1"
            lines.append(f"{mono}:{self.terms[k]!r}")
        return "\n".join(lines) + ("\n" if lines else "")


def _lift(x) -> MultiPoly:
    return x if isinstance(x, MultiPoly) else MultiPoly.const(x)


def _check_degrees(p: MultiPoly, limit: int) -> None:
    d = p.max_var_degree()
    if d > limit:
        raise DistributionError(f"per-variable degree {d} exceeds {limit}")


def _moment_fn(model: Model, exact: bool):
    if not exact:
        return lambda j, k: model.moments(j)[k]

    def m(j, k):
        table = exact_moments(model.family(j))
        if table is None:
            raise DistributionError(f"{model.family(j)} has irrational moments; no exact oracle")
        return table[k]

    return m


def expect(p: MultiPoly, model: Model, exact: bool = False):
    """E[p]; with ``exact`` the moments are rationals and so is the result
    (pass Fraction coefficients to keep it exact)."""
    _check_degrees(p, MAX_MOMENT)
    mom = _moment_fn(model, exact)
    total = 0
    for k, v in p.terms.items():
        m = v
        for j, power in k:
            m *= mom(j, power)
            if m == 0:
                break
        total += m
    return total


def conditional_expect(p: MultiPoly, keep: Iterable[int], model: Model, exact: bool = False) -> MultiPoly:
    """Integrate out every variable not in ``keep``."""
    _check_degrees(p, MAX_MOMENT)
    mom = _moment_fn(model, exact)
    keep = set(keep)
    out: dict[Monomial, float] = defaultdict(int)
    for k, v in p.terms.items():
        kept = []
        for j, power in k:
            if j in keep:
                kept.append((j, power))
            else:
                v *= mom(j, power)
        if v != 0:
            out[tuple(kept)] += v
    return MultiPoly(out)


def regrade_strata(p: MultiPoly, model: Model) -> dict[tuple[tuple[int, int], ...], float]:
    """Coefficients of p in the basis prod_j P_{m_j}(X_j).

    Keys are sorted ``(j, m)`` tuples with m > 0; ``()`` is the constant.
    """
    _check_degrees(p, MAX_DEGREE)
    out: dict[tuple, float] = defaultdict(float)
    for k, v in p.terms.items():
        choices = []
        for j, d in k:
            g = model.opoly(j).gamma
            choices.append([(j, m, g[d, m]) for m in range(d + 1) if g[d, m] != 0.0])
        for combo in product(*choices):
            c = v
            key = []
            for j, m, gc in combo:
                c *= gc
                if m:
                    key.append((j, m))
            out[tuple(key)] += c
    return {k: c for k, c in out.items() if c != 0.0}


def basis_poly(stratum: tuple[tuple[int, int], ...], model: Model, exact: bool = False) -> MultiPoly:
    """prod_i P_{m_i}(X_{j_i}) expanded into monomials (rational coefficients if ``exact``)."""
    out = MultiPoly.const(1)
    for j, m in stratum:
        if exact:
            P = exact_orthopoly(model.family(j))
            if P is None:
                raise DistributionError(f"{model.family(j)} has irrational moments; no exact oracle")
        else:
            P = model.opoly(j).P
        out = out * MultiPoly.univariate(j, P[m])
    return out


def regrade(p: MultiPoly, model: Model):
    """Rewrite p as a GradedChaos (orders 0..4 of symmetric kernels)."""
    from .chaos_model import GradedChaos

    return GradedChaos.from_strata(regrade_strata(p, model), model)


def multinomial(alphas: Iterable[int]) -> int:
    alphas = list(alphas)
    out = math.factorial(sum(alphas))
    for a in alphas:
        out //= math.factorial(a)
    return out
