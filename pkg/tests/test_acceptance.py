"""Acceptance criteria, each at its stated tolerance; one PASS/FAIL line per criterion."""

import numpy as np
import pytest

from iterchaos.chaos_model import (
    phi,
    phi2,
    phi11,
    phi_circ_n,
    product_decompose,
    truncate,
)
from iterchaos.cli import run
from iterchaos.dist_moments import BASELINE_FAMILIES, Model
from iterchaos.grid_basis import BasisSpec, Grid, Kernel2, StepFn
from iterchaos.path_analysis import (
    fourth_moment_scaling,
    qv_convergence,
    square_decomposition,
)
from iterchaos.poly_algebra import MultiPoly, conditional_expect
from iterchaos.stochastic_integral import (
    IntegralSpec,
    double_integral,
    ibp_residual,
    riemann_sum,
    second_moment,
)
from iterchaos.tensor_calc import sym

MODELS = [Model(f) for f in BASELINE_FAMILIES]
GAUSS, EXP = Model.parse("gaussian"), Model.parse("exp")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


def _rand_step(rng, grid):
    v = rng.normal(size=grid.n_cells)
    v[rng.random(grid.n_cells) < 0.2] = 0.0
    return StepFn(grid, v)


def _baseline(L, model):
    grid = Grid(1.0, L)
    one = StepFn.constant(grid)
    return IntegralSpec(one, one, 1.0, BasisSpec(grid), model)


def test_c1_product_formula_exact(report):
    grid = Grid(1.0, 3)  # N = 8
    b = BasisSpec(grid)
    rng = np.random.default_rng(101)
    pairs = [(_rand_step(rng, grid), _rand_step(rng, grid)) for _ in range(100)]
    worst = 0.0
    for model in MODELS:
        for h, g in pairs:
            p2, p11, c = product_decompose(h, g, b, model)
            lhs = phi(h, b, model).to_poly() * phi(g, b, model).to_poly()
            worst = max(worst, (p2.to_poly() + p11.to_poly() + c - lhs).max_abs_coef())
    assert report(1, worst < 1e-10, f"product formula: max residual coefficient {worst:.3g} (< 1e-10), 100 pairs x 5 families, N=8")


def test_c2_riemann_convergence(report):
    lines, ok = [], True
    for model in (GAUSS, EXP):
        spec = _baseline(8, model)
        z = double_integral(spec)
        ez2 = z.second_moment()
        errs = [(riemann_sum(spec, Grid(1.0, l)) - z).second_moment() for l in range(2, 9)]
        dec = all(b < a for a, b in zip(errs, errs[1:]))
        rel = errs[-1] / ez2
        ok &= dec and rel < 1e-3
        lines.append(f"{model}: decreasing={dec}, E[(S_8-Z)^2]/E[Z^2]={rel:.4g}")
    assert report(2, ok, "Riemann sums (target < 1e-3 at level 8): " + "; ".join(lines))


def test_c3_integration_by_parts(report):
    grid = Grid(1.0, 3)
    b = BasisSpec(grid)
    rng = np.random.default_rng(103)
    pairs = [(_rand_step(rng, grid), _rand_step(rng, grid)) for _ in range(50)]
    worst = max(ibp_residual(h, g, b, m).max_abs_entry() for m in MODELS for h, g in pairs)
    assert report(3, worst < 1e-10, f"integration by parts: max kernel entry {worst:.3g} (< 1e-10), 50 pairs x 5 families")


def test_c4_norm_identity(report):
    rng = np.random.default_rng(104)
    worst = 0.0
    for model in MODELS:
        for _ in range(20):
            grid = Grid(1.0, int(rng.integers(1, 4)))
            t = grid.cell_length * int(rng.integers(1, grid.n_cells + 1))
            sm = second_moment(IntegralSpec(_rand_step(rng, grid), _rand_step(rng, grid), t, BasisSpec(grid), model))
            worst = max(worst, abs(sm["direct"] - sm["formula"]))
    g = second_moment(_baseline(1, GAUSS))
    r = second_moment(_baseline(1, Model.parse("rademacher")))
    base_err = max(abs(g["direct"] - 0.5), abs(g["formula"] - 0.5), abs(r["direct"] - 0.25), abs(r["formula"] - 0.25))
    ok = worst < 1e-10 and base_err < 1e-12
    assert report(4, ok, f"norm identity: max |direct-formula| {worst:.3g} (< 1e-10); baselines off by {base_err:.3g} (< 1e-12)")


def test_c5_square_decomposition(report):
    rng = np.random.default_rng(105)
    fs = [sym(rng.normal(size=(4, 4))) for _ in range(10)]
    gauss_worst, o4, o0 = 0.0, 0.0, 0.0
    table = {}
    for model in MODELS:
        per = {k: 0.0 for k in range(5)}
        for f in fs:
            sd = square_decomposition(f, model)
            for k, v in sd.residual.items():
                per[k] = max(per[k], v)
            o4 = max(o4, sd.residual[4])
            o0 = max(o0, abs(sd.oracle_order0 - sd.exact_square_mean))
        if model.is_gaussian:
            gauss_worst = max(per.values())
        table[str(model)] = per
    complete = all(set(v) == set(range(5)) for v in table.values()) and len(table) == 5
    ok = gauss_worst < 1e-9 and o4 < 1e-9 and o0 < 1e-9 and complete
    cells = "; ".join(f"{m}: " + ",".join(f"{v:.2g}" for v in per.values()) for m, per in table.items())
    assert report(
        5, ok,
        f"square decomposition: Gaussian max {gauss_worst:.3g}, order-4 max {o4:.3g}, order-0 vs mean {o0:.3g} (< 1e-9); "
        f"table complete={complete} [{cells}]",
    )


def test_c6_fourth_moment_scaling(report):
    grid = Grid(1.0, 11)
    b = BasisSpec(grid)
    one = StepFn.constant(grid)
    gaps = [(1.0 - 2.0**-e, 1.0) for e in range(2, 8)]
    ok, lines = True, []
    for model in (GAUSS, EXP):
        rep = fourth_moment_scaling(one, one, gaps, b, model)
        ok &= rep.spread < 3 and 1.9 <= rep.slope <= 2.1
        lines.append(f"{model}: spread {rep.spread:.3f} (< 3), slope {rep.slope:.3f} (in [1.9, 2.1])")
    assert report(6, ok, "fourth-moment scaling: " + "; ".join(lines))


def test_c7_quadratic_variation(report):
    grid = Grid(1.0, 8)
    b = BasisSpec(grid)
    one = StepFn.constant(grid)
    levels = [4, 5, 6, 7, 8]
    g = qv_convergence(one, one, 1.0, b, GAUSS, levels, 10_000, 7)
    last = g.rows[-1]
    z = abs(last.qv_mean - 0.5) / last.qv_stderr
    res = [r.residual_mean for r in g.rows]
    mono = all(y < x for x, y in zip(res, res[1:]))
    e = qv_convergence(one, one, 1.0, b, EXP, levels, 10_000, 7)
    helps = all(r.residual_mean < r.residual_nocorr_mean for r in e.rows)
    ok = z < 3 and mono and helps
    assert report(
        7, ok,
        f"quadratic variation: level-8 mean {last.qv_mean:.4f} is {z:.2f} SE from 0.5 (< 3); residual decreasing={mono}; "
        f"exponential correction lowers residual at every level={helps}",
    )


def test_c8_martingale_tails(report):
    rng = np.random.default_rng(108)
    n, cut = 4, 2
    bad = 0
    for model in MODELS:
        for _ in range(20):
            elems = [phi2(Kernel2(rng.normal(size=(n, n))), model), phi11(Kernel2(rng.normal(size=(n, n))), model)]
            elems += [phi_circ_n(sym(rng.normal(size=(n,) * k)), model) for k in range(1, 5)]
            for z in elems:
                tail = (z - truncate(z, cut)).to_poly(exact=True)
                bad += conditional_expect(tail, range(cut), model, exact=True) != MultiPoly()
    assert report(8, bad == 0, f"martingale tails: {bad} nonzero conditional expectations (exact rational arithmetic), 20 x 6 elements x 5 families")


def test_c9_selftest_reproducible(report, tmp_path, monkeypatch):
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "8")):
        monkeypatch.setenv("ITERCHAOS_THREADS", threads)
        d = tmp_path / name
        run(["selftest", "--seed", "7", "--out", str(d)])
        outs.append({f: (d / f).read_bytes() for f in ("selftest.csv", "selftest.json")})
    same = outs[0] == outs[1] == outs[2]
    assert report(9, same, "selftest reports byte-identical across two runs and 1 vs 8 workers")
