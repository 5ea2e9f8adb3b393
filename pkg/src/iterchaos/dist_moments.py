"""Driving-noise families, moment tables and monic orthogonal polynomials.

Polynomials are coefficient lists in increasing degree (``c[i]`` multiplies
``x**i``).  Connection coefficients are stored so that

    x**n == sum_m gamma[n][m] * P_m(x)

which is the direction the lowering operators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_MOMENT = 8
MAX_DEGREE = 4

FAMILY_TAGS = ("gaussian", "rademacher", "uniform", "centered_exponential", "twopoint")


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DistFamily:
    """Mean-zero, unit-variance law of one driving variable.

    ``param`` is only used by ``twopoint`` (the probability of the positive atom).
    """

    tag: str
    param: float | None = None

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise DistributionError(f"unknown family {self.tag!r}")
        if self.tag == "twopoint":
            if self.param is None or not 0.0 < self.param < 1.0:
                raise DistributionError(f"twopoint needs p in (0, 1), got {self.param}")
        elif self.param is not None:
            raise DistributionError(f"{self.tag} takes no parameter")

    @classmethod
    def parse(cls, text: str) -> "DistFamily":
        """Parse ``gaussian``, ``twopoint:0.2``, ``exp`` ..."""
        name, _, arg = text.strip().lower().partition(":")
        name = _ALIASES.get(name, name)
        return cls(name, float(arg) if arg else None)

    def __str__(self):
        return f"{self.tag}:{self.param:g}" if self.param is not None else self.tag

    @property
    def atoms(self) -> tuple[tuple[float, float], ...] | None:
        """(value, probability) pairs for the finitely atomic families."""
        if self.tag == "rademacher":
            return ((1.0, 0.5), (-1.0, 0.5))
        if self.tag == "twopoint":
            p = self.param
            return ((math.sqrt((1 - p) / p), p), (-math.sqrt(p / (1 - p)), 1 - p))
        return None

    @property
    def is_symmetric(self) -> bool:
        return self.tag in ("gaussian", "rademacher", "uniform") or (
            self.tag == "twopoint" and self.param == 0.5
        )


_ALIASES = {
    "normal": "gaussian",
    "gauss": "gaussian",
    "exp": "centered_exponential",
    "exponential": "centered_exponential",
    "centeredexponential": "centered_exponential",
    "centered-exponential": "centered_exponential",
    "two_point": "twopoint",
    "two-point": "twopoint",
}

GAUSSIAN = DistFamily("gaussian")
RADEMACHER = DistFamily("rademacher")
UNIFORM = DistFamily("uniform")
CENTERED_EXPONENTIAL = DistFamily("centered_exponential")

BASELINE_FAMILIES = (
    GAUSSIAN,
    RADEMACHER,
    UNIFORM,
    CENTERED_EXPONENTIAL,
    DistFamily("twopoint", 0.2),
)


@dataclass(frozen=True)
class MomentTable:
    m: tuple[float, ...]

    def __getitem__(self, k: int) -> float:
        if k > MAX_MOMENT:
            raise DistributionError(f"moment of order {k} > {MAX_MOMENT} not tabulated")
        return self.m[k]

    def hankel(self, order: int) -> np.ndarray:
        return np.array([[self.m[i + j] for j in range(order)] for i in range(order)])


@lru_cache(maxsize=None)
def moments(family: DistFamily) -> MomentTable:
    t = family.tag
    ks = range(MAX_MOMENT + 1)
    if t == "gaussian":
        m = [float(_double_factorial(k - 1)) if k % 2 == 0 else 0.0 for k in ks]
    elif t == "uniform":
        # uniform on [-sqrt 3, sqrt 3]
        m = [3.0 ** (k // 2) / (k + 1) if k % 2 == 0 else 0.0 for k in ks]
    elif t == "centered_exponential":
        # E[(E - 1)^n] with E[E^k] = k!
        m = [
            float(sum(math.comb(n, k) * (-1) ** (n - k) * math.factorial(k) for k in range(n + 1)))
            for n in ks
        ]
    else:
        m = [sum(p * v**k for v, p in family.atoms) for k in ks]
        m[0], m[1], m[2] = 1.0, 0.0, 1.0
    return MomentTable(tuple(m))


def _rational_sqrt(x: Fraction) -> Fraction | None:
    a, b = math.isqrt(x.numerator), math.isqrt(x.denominator)
    return Fraction(a, b) if a * a == x.numerator and b * b == x.denominator else None


@lru_cache(maxsize=None)
def exact_moments(family: DistFamily) -> tuple[Fraction, ...] | None:
    """Raw moments as rationals, or None when the law has an irrational moment.

    The twopoint parameter is read from its decimal repr, so 0.2 means 1/5.
    """
    t = family.tag
    ks = range(MAX_MOMENT + 1)
    if t == "gaussian":
        return tuple(Fraction(_double_factorial(k - 1)) if k % 2 == 0 else Fraction(0) for k in ks)
    if t == "uniform":
        return tuple(Fraction(3 ** (k // 2), k + 1) if k % 2 == 0 else Fraction(0) for k in ks)
    if t == "centered_exponential":
        return tuple(
            Fraction(sum(math.comb(n, k) * (-1) ** (n - k) * math.factorial(k) for k in range(n + 1)))
            for n in ks
        )
    p = Fraction(1, 2) if t == "rademacher" else Fraction(repr(family.param))
    a, b = _rational_sqrt((1 - p) / p), _rational_sqrt(p / (1 - p))
    if a is None or b is None:
        return None
    return tuple(p * a**k + (1 - p) * (-b) ** k for k in ks)


@lru_cache(maxsize=None)
def exact_orthopoly(family: DistFamily, n_max: int = MAX_DEGREE) -> tuple[tuple[Fraction, ...], ...] | None:
    """Monic P_0..P_n_max with rational coefficients (same recurrence as ``orthopoly``)."""
    m = exact_moments(family)
    if m is None:
        return None

    def E(c):
        return sum((x * m[i] for i, x in enumerate(c)), Fraction(0))

    atoms = family.atoms
    r = len(atoms) if atoms else None
    P = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    q = [Fraction(1), Fraction(1)]
    for n in range(1, n_max):
        if r is not None and n >= r:
            P.append([Fraction(0)] + P[n])
            q.append(Fraction(0))
            continue
        a = E(poly_mul([0, 1], poly_mul(P[n], P[n]))) / q[n]
        b = q[n] / q[n - 1]
        nxt = poly_mul([-a, 1], P[n])
        for i, c in enumerate(P[n - 1]):
            nxt[i] -= b * c
        P.append([Fraction(c) for c in nxt])
        q.append(E(poly_mul(nxt, nxt)))
    return tuple(tuple(p) for p in P)


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def poly_mul(a, b) -> list[float]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def poly_expect(c, table: MomentTable) -> float:
    return sum(x * table[i] for i, x in enumerate(c) if x)


def poly_eval(c, x):
    out = 0.0 * x
    for a in reversed(c):
        out = out * x + a
    return out


def hermite(n_max: int = MAX_DEGREE) -> list[list[float]]:
    """Monic probabilists' Hermite polynomials H_0..H_n_max."""
    H = [[1.0], [0.0, 1.0]]
    for n in range(1, n_max):
        H.append([a - n * b for a, b in zip(poly_mul([0.0, 1.0], H[n]), H[n - 1] + [0.0, 0.0])])
    return H[: n_max + 1]


def connection(P: list[list[float]]) -> np.ndarray:
    """gamma[n, m] with x^n = sum_m gamma[n, m] P_m, by back-substitution."""
    n_max = len(P) - 1
    g = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        rest = [0.0] * n + [1.0]
        for m in range(n, -1, -1):
            c = rest[m] if m < len(rest) else 0.0
            g[n, m] = c
            for i, a in enumerate(P[m]):
                rest[i] -= c * a
    return g


@dataclass(frozen=True)
class OPolyTable:
    family: DistFamily
    P: tuple[tuple[float, ...], ...]
    # three-term recurrence P_{n+1} = (x - a_n) P_n - b_n P_{n-1}
    rec_a: tuple[float, ...]
    rec_b: tuple[float, ...]
    gamma: np.ndarray
    Gamma: np.ndarray
    q: tuple[float, ...]
    atom_count: int | None

    def eval(self, n: int, x):
        """P_n(x) by the recurrence (atomic tail: x^(n-r) * P_r)."""
        x = np.asarray(x, dtype=float)
        p0, p1 = np.ones_like(x), x.copy()
        if n == 0:
            return p0
        r = self.atom_count if self.atom_count is not None else n + 1
        for k in range(1, min(n, r)):
            p0, p1 = p1, (x - self.rec_a[k]) * p1 - self.rec_b[k] * p0
        for _ in range(r, n):
            p1 = x * p1
        return p1

    def is_null(self, n: int) -> bool:
        return self.q[n] == 0.0


@lru_cache(maxsize=None)
def orthopoly(family: DistFamily, n_max: int = MAX_DEGREE) -> OPolyTable:
    atoms = family.atoms
    return orthopoly_from_table(
        moments(family), atom_count=len(atoms) if atoms else None, n_max=n_max, family=family
    )


def orthopoly_from_table(
    table: MomentTable,
    atom_count: int | None = None,
    n_max: int = MAX_DEGREE,
    family: DistFamily | None = None,
) -> OPolyTable:
    """Monic orthogonal polynomials from raw moments.

    Continuous laws must have a nonsingular Hankel matrix up to order n_max+1;
    atomic laws continue past their atom count with polynomials vanishing on
    the support (q_n = 0).
    """
    n_atoms = atom_count
    P: list[list[float]] = [[1.0], [0.0, 1.0]]
    q = [1.0, 1.0]
    ra, rb = [0.0] * (n_max + 1), [0.0] * (n_max + 1)
    for n in range(1, n_max):
        if n_atoms is not None and n >= n_atoms:
            # vanishes on the support: x^(n+1-r) * P_r
            P.append([0.0] + P[n])
            q.append(0.0)
            continue
        a = poly_expect(poly_mul([0.0, 1.0], poly_mul(P[n], P[n])), table) / q[n]
        b = q[n] / q[n - 1]
        nxt = poly_mul([-a, 1.0], P[n])
        for i, c in enumerate(P[n - 1]):
            nxt[i] -= b * c
        qn = poly_expect(poly_mul(nxt, nxt), table)
        if n_atoms is not None and n + 1 >= n_atoms:
            qn = 0.0
        elif qn <= 1e-12 * math.factorial(n + 1):
            raise DistributionError(
                f"{family or 'moment table'}: degenerate Hankel matrix at order {n + 2} (q_{n + 1} = {qn:.3g})"
            )
        P.append(nxt)
        q.append(qn)
        ra[n], rb[n] = a, b
    gamma = connection(P)
    Gamma = connection(hermite(n_max))
    return OPolyTable(
        family=family,
        P=tuple(tuple(p) for p in P),
        rec_a=tuple(ra),
        rec_b=tuple(rb),
        gamma=gamma,
        Gamma=Gamma,
        q=tuple(q),
        atom_count=n_atoms,
    )


@dataclass(frozen=True)
class Model:
    """Assignment of a family to each driving variable X_j.

    Either homogeneous (``per_index`` empty) or an explicit list covering the
    indices in use.
    """

    default: DistFamily = GAUSSIAN
    per_index: tuple[DistFamily, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Model":
        """``gaussian`` or a comma-separated per-index list ``exp,gaussian,...``."""
        parts = [DistFamily.parse(p) for p in text.split(",") if p.strip()]
        if len(parts) == 1:
            return cls(parts[0])
        return cls(parts[0], tuple(parts))

    def family(self, j: int) -> DistFamily:
        if not self.per_index:
            return self.default
        if j >= len(self.per_index):
            raise DistributionError(f"model lists {len(self.per_index)} families, index {j} requested")
        return self.per_index[j]

    def families(self) -> tuple[DistFamily, ...]:
        return self.per_index or (self.default,)

    def opoly(self, j: int) -> OPolyTable:
        return orthopoly(self.family(j))

    def moments(self, j: int) -> MomentTable:
        return moments(self.family(j))

    @property
    def is_gaussian(self) -> bool:
        return all(f.tag == "gaussian" for f in self.families())

    def __str__(self):
        return ",".join(map(str, self.per_index)) if self.per_index else str(self.default)
