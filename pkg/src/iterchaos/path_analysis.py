"""Square decomposition, increment moment scaling and quadratic variation.

For step integrands the increment Z_t - Z_s is driven cell by cell:

    U_{i+1} = U_i + h1_i sqrt(d) X_i
    Y_{i+1} = Y_i + 1[i in ]s,t]] (h2_i sqrt(d) X_i U_i + h1_i h2_i d/2 (X_i^2 - 1))

so the joint moments E[U^a Y^b] with a + b <= 4 evolve by a closed linear
recursion that only needs the first eight moments of each X_i.  That gives
E|Z_t - Z_s|^4 exactly at any basis size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .chaos_model import GradedChaos, phi_circ_n, regrade_poly
from .dist_moments import Model
from .grid_basis import (
    BasisSpec,
    Grid,
    GridError,
    StepFn,
    causal_kernel,
    restrict_between,
)
from .mc_engine import batch_values, summarize
from .poly_algebra import expect
from .stochastic_integral import IntegralSpec, double_integral, z_path_fast
from .tensor_calc import (
    SymTensor,
    a_norm,
    a_op,
    circ,
    contract1,
    pi1,
    sup_constants,
    sym_matrix,
)

# ---------------------------------------------------------------- square decomposition


@dataclass
class SquareDecomposition:
    rhs: GradedChaos
    oracle: GradedChaos
    residual: dict[int, float]
    order0_tensor_reading: float
    order0_a_reading: float
    oracle_order0: float
    exact_square_mean: float


def square_decomposition(f: SymTensor, model: Model) -> SquareDecomposition:
    """Order-by-order closed form of [(Phi^{o2} + Phi a_1^2)(f)]^2 against the oracle."""
    ff = circ(f, f)
    con = sym_matrix(contract1(f, model).coef)
    a14 = a_op(4, 1, ff, model)
    a24 = a_op(4, 2, ff, model)
    a34 = a_op(4, 3, ff, model)
    a44 = a_op(4, 4, ff, model).as_scalar()
    order1 = a34 + 4.0 * a_op(2, 1, con, model) - 6.0 * a_op(2, 1, pi1(con), model)
    tensor0 = 2.0 * f.tensor_norm2() + a44
    a_reading0 = 2.0 * a_norm(f, model) ** 2 + a44
    rhs = GradedChaos(
        tensor0,
        {4: ff, 3: a14, 2: 4.0 * con + a24, 1: order1},
        model,
    )
    y = phi_circ_n(f, model) + phi_circ_n(a_op(2, 1, f, model), model)
    yp = y.to_poly()
    sq = yp * yp
    oracle = regrade_poly(sq, model)
    diff = oracle - rhs
    residual = {0: abs(diff.constant)}
    for n in range(1, 5):
        residual[n] = diff.kernel(n).max_abs()
    return SquareDecomposition(
        rhs=rhs,
        oracle=oracle,
        residual=residual,
        order0_tensor_reading=tensor0,
        order0_a_reading=a_reading0,
        oracle_order0=oracle.constant,
        exact_square_mean=expect(sq, model),
    )


# ---------------------------------------------------------------- increment moments


def _moment_states(top: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(top + 1) for b in range(top + 1 - a)]


def increment_moments(
    h1: StepFn, h2: StepFn, s: float, t: float, basis: BasisSpec, model: Model, top: int = 4
) -> np.ndarray:
    """E[(Z_t - Z_s)^p] for p = 0..top, exact."""
    g = basis.grid
    i0, i1 = g.point_index(s), g.point_index(t)
    if i0 > i1:
        raise GridError(f"need s <= t, got {s} > {t}")
    d = g.cell_length
    a_c = h1.refine(g).values * math.sqrt(d)
    b_c = h2.refine(g).values * math.sqrt(d)
    states = _moment_states(top)
    pos = {st: i for i, st in enumerate(states)}
    M = np.zeros(len(states))
    M[pos[(0, 0)]] = 1.0
    binom = [[math.comb(n, k) for k in range(top + 1)] for n in range(top + 1)]
    for i in range(i1):
        m = model.moments(i)
        alpha = a_c[i]
        live = i >= i0
        beta, dd = (b_c[i], a_c[i] * b_c[i] / 2.0) if live else (0.0, 0.0)
        # E[X^p (X^2 - 1)^r]
        w = {}

        def xw(p, r):
            if (p, r) not in w:
                w[(p, r)] = sum(
                    math.comb(r, u) * (-1) ** (r - u) * m[p + 2 * u] for u in range(r + 1)
                )
            return w[(p, r)]

        new = np.zeros_like(M)
        for a, b in states:
            acc = 0.0
            # (U + alpha X)^a (Y + beta X U + dd (X^2 - 1))^b
            for p in range(a + 1):
                ca = binom[a][p] * alpha**p
                if ca == 0.0:
                    continue
                for q in range(b + 1):
                    for r in range(b - q + 1):
                        cb = binom[b][q] * binom[b - q][r] * beta**q * dd**r
                        if cb == 0.0:
                            continue
                        e = xw(p + q, r)
                        if e == 0.0:
                            continue
                        acc += ca * cb * e * M[pos[(a - p + q, b - q - r)]]
            new[pos[(a, b)]] = acc
        M = new
    return np.array([M[pos[(0, b)]] for b in range(top + 1)])


def increment_moments_oracle(
    h1: StepFn, h2: StepFn, s: float, t: float, basis: BasisSpec, model: Model, top: int = 4
) -> np.ndarray:
    """Same quantity by polynomial expansion (small bases only)."""
    zs = double_integral(IntegralSpec(h1, h2, s, basis, model)) if s > 0 else None
    zt = double_integral(IntegralSpec(h1, h2, t, basis, model))
    y = zt.to_poly() - (zs.to_poly() if zs is not None else 0.0)
    out, p = [1.0], y
    for _ in range(top):
        out.append(expect(p, model))
        p = p * y
    return np.array(out)


def moment_bound_constant(model: Model) -> float:
    C = sup_constants(model, 4)["C"]
    return 3.5 * C[1] + C[2] + C[3] + C[4] + 2.0


@dataclass
class ScalingRow:
    s: float
    t: float
    gap: float
    fourth_moment: float
    scaled: float  # E|dZ|^4 / gap^2
    bound_ratio: float  # E|dZ|^4 / (||h1||_A^4 ||h2 1_{]s,t]}||_A^4)


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    slope: float
    spread: float  # max/min of E|dZ|^4 / gap^2
    candidate_constant: float
    empirical_constant: float


def fourth_moment_scaling(
    h1: StepFn, h2: StepFn, gaps: list[tuple[float, float]], basis: BasisSpec, model: Model
) -> ScalingReport:
    h1n = h1.norm2() ** 0.5  # order 1: the A-norm is the L2 norm
    rows = []
    for s, t in gaps:
        m4 = float(increment_moments(h1, h2, s, t, basis, model)[4])
        gap = t - s
        seg = StepFn(h2.grid, h2.values * _window(h2.grid, s, t)).norm2() ** 0.5
        denom = h1n**4 * seg**4
        rows.append(
            ScalingRow(
                s, t, gap, m4,
                m4 / gap**2 if gap > 0 else 0.0,
                m4 / denom if denom > 0 else 0.0,
            )
        )
    pos = [r for r in rows if r.gap > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([r.gap for r in pos]), np.log([r.fourth_moment for r in pos]), 1)[0])
        sc = [r.scaled for r in pos]
        spread = max(sc) / min(sc)
    else:
        slope, spread = float("nan"), float("nan")
    return ScalingReport(
        rows=rows,
        slope=slope,
        spread=spread,
        candidate_constant=moment_bound_constant(model),
        empirical_constant=max((r.bound_ratio for r in rows), default=0.0),
    )


def _window(grid: Grid, s: float, t: float) -> np.ndarray:
    v = np.zeros(grid.n_cells)
    v[grid.point_index(s) : grid.point_index(t)] = 1.0
    return v


# ---------------------------------------------------------------- quadratic variation


def qv_limit_pathwise(
    h1: StepFn, h2: StepFn, t: float, basis: BasisSpec, model: Model, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(Gaussian-form term, skewness correction) of the QV limit, per realization.

    On cell i, s -> Phi(h1 1_{]0,s]}) is A_i + B_i (s - t_i) with
    A_i = sum_{j<i} h1_j sqrt(d) x_j and B_i = h1_i x_i / sqrt(d), so its square
    integrates exactly.  The correction integrates sum_j m3_j c_j(s)^2 x_j
    with c_j(s) = <h1 1_{]0,s]}, e_j>.
    """
    g = basis.grid
    n = g.point_index(t)
    x = np.atleast_2d(np.asarray(x, dtype=float))[:, :n]
    d = g.cell_length
    sd = math.sqrt(d)
    a1 = h1.refine(g).values[:n]
    w = h2.refine(g).values[:n] ** 2
    m3 = np.array([model.moments(j)[3] for j in range(n)])
    lin = a1 * sd * x
    A = np.cumsum(lin, axis=1) - lin
    B = a1 * x / sd
    term1 = (w * (A * A * d + A * B * d * d + B * B * d**3 / 3.0)).sum(axis=1)
    sk = m3 * a1 * a1 * x
    prior = np.cumsum(sk, axis=1) - sk
    term2 = (w * (prior * d * d + sk * d * d / 3.0)).sum(axis=1)
    return term1, term2


def qv_sums(
    h1: StepFn, h2: StepFn, t: float, basis: BasisSpec, x: np.ndarray, levels: list[int]
) -> np.ndarray:
    """sum_k |Z_{t_{k+1}} - Z_{t_k}|^2 on the dyadic partition of each level; (M, len(levels))."""
    g = basis.grid
    n = g.point_index(t)
    Z = z_path_fast(h1, h2, basis, x)[:, : n + 1]
    out = []
    for lev in levels:
        if lev > g.level:
            raise GridError(f"partition level {lev} finer than basis level {g.level}")
        step = 2 ** (g.level - lev)
        if n % step:
            raise GridError(f"t={t} is not a point of the level-{lev} partition")
        dz = np.diff(Z[:, ::step], axis=1)
        out.append((dz * dz).sum(axis=1))
    return np.stack(out, axis=1)


@dataclass
class QVRow:
    level: int
    mesh: float
    residual_mean: float
    residual_ci: float
    residual_nocorr_mean: float
    residual_nocorr_ci: float
    qv_mean: float
    qv_stderr: float
    undersampled: bool


@dataclass
class QVReport:
    model: str
    seed: int
    replicates: int
    t: float
    basis_level: int
    limit_mean: float
    limit_stderr: float
    correction_mean_abs: float
    rows: list[QVRow] = field(default_factory=list)

    CSV_COLUMNS = ("level", "mesh", "residual_mean", "residual_ci", "residual_nocorr_mean", "replicates", "seed")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.level, repr(r.mesh), repr(r.residual_mean), repr(r.residual_ci),
                        repr(r.residual_nocorr_mean), self.replicates, self.seed])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return asdict(self)


def qv_convergence(
    h1: StepFn,
    h2: StepFn,
    t: float,
    basis: BasisSpec,
    model: Model,
    levels: list[int],
    M: int,
    seed: int,
    workers: int | None = None,
) -> QVReport:
    n = basis.grid.n_cells
    k = len(levels)

    def functional(x):
        qv = qv_sums(h1, h2, t, basis, x, levels)
        t1, t2 = qv_limit_pathwise(h1, h2, t, basis, model, x)
        return np.column_stack([qv, t1, t2])

    vals = batch_values(functional, model, n, M, seed, workers)
    qv, t1, t2 = vals[:, :k], vals[:, k], vals[:, k + 1]
    lim = summarize(t1 + t2, seed)
    rep = QVReport(
        model=str(model), seed=seed, replicates=M, t=t, basis_level=basis.grid.level,
        limit_mean=lim.mean, limit_stderr=lim.stderr,
        correction_mean_abs=float(np.sum(np.abs(t2)) / M),
    )
    for i, lev in enumerate(levels):
        res = summarize((qv[:, i] - t1 - t2) ** 2, seed)
        res0 = summarize((qv[:, i] - t1) ** 2, seed)
        q = summarize(qv[:, i], seed)
        ci = 1.96 * res.stderr
        rep.rows.append(QVRow(
            level=lev,
            mesh=basis.grid.T / 2**lev,
            residual_mean=res.mean,
            residual_ci=ci,
            residual_nocorr_mean=res0.mean,
            residual_nocorr_ci=1.96 * res0.stderr,
            qv_mean=q.mean,
            qv_stderr=q.stderr,
            undersampled=bool(res.mean > 0 and ci > 0.5 * res.mean),
        ))
    return rep


# ---------------------------------------------------------------- symmetric square sums


def increment_kernels(h1: StepFn, h2: StepFn, t: float, basis: BasisSpec, level: int) -> np.ndarray:
    """Symmetrized coefficient matrices of h1 (x) h2 1_{]t_k,t_{k+1}]} 1_C, stacked."""
    g = basis.grid
    step = 2 ** (g.level - level)
    n = g.point_index(t)
    pts = range(0, n + 1, step)
    mats = []
    for a, b in zip(pts[:-1], pts[1:]):
        K = causal_kernel(h1.refine(g), restrict_between(h2.refine(g), a * g.cell_length, b * g.cell_length), basis).coef
        mats.append((K + K.T) / 2.0)
    return np.array(mats)


def circ_square_sum_norm(S: np.ndarray) -> float:
    """|| sum_k S_k o S_k ||_(x) for symmetric matrices S_k, without forming order-4 arrays.

    For symmetric S, sym(S (x) S') pairs indices in three ways, so
    ||sym A||^2 = (<A, A> + 2 <A_(13)(24), A>) / 3 with A = sum_k S_k (x) S_k.
    """
    G = np.einsum("kij,lij->kl", S, S)
    P = np.einsum("kij,ljm->klim", S, S)  # S_k S_l
    cross = np.einsum("klim,klmi->", P, P)  # sum_kl tr(S_k S_l S_k S_l)
    return math.sqrt(max((np.sum(G * G) + 2.0 * cross) / 3.0, 0.0))


def square_sum_surrogate(h1: StepFn, h2: StepFn, t: float, basis: BasisSpec, levels: list[int]) -> list[dict]:
    out = []
    for lev in levels:
        S = increment_kernels(h1, h2, t, basis, lev)
        out.append({"level": lev, "mesh": basis.grid.T / 2**lev, "norm": circ_square_sum_norm(S)})
    return out
