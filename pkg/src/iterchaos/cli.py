"""Command-line entry point: one verification study per subcommand.

Every command writes ``<command>.csv`` and ``<command>.json`` into ``--out``.
Exit status: 0 all checks pass, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .chaos_model import phi, phi2, phi11, phi_circ_n, product_decompose, truncate
from .dist_moments import BASELINE_FAMILIES, DistributionError, Model
from .grid_basis import BasisSpec, Grid, GridError, Kernel2, StepFn, load_stepfn_csv
from .mc_engine import default_workers
from .path_analysis import (
    fourth_moment_scaling,
    qv_convergence,
    square_decomposition,
    square_sum_surrogate,
)
from .poly_algebra import conditional_expect
from .stochastic_integral import (
    IntegralSpec,
    double_integral,
    ibp_residual,
    riemann_sum,
    second_moment,
)
from .tensor_calc import SymTensor, sym

SCHEMA_VERSION = 1
COMMANDS = ("product-check", "riemann", "ibp", "norm", "square-decomp", "moment-bound", "qv", "selftest")
ALL_FAMILIES = "+".join(str(f) for f in BASELINE_FAMILIES)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    T: float = 1.0
    level: int | None = None
    model: str | None = None  # '+'-separated list of models; ',' separates per-index families
    h: str = "1"
    g: str = "1"
    h1: str = "1"
    h2: str = "1"
    t: float | None = None
    seed: int = 7
    replicates: int = 10000
    levels: str | None = None  # "lo:hi"
    pairs: int | None = None
    gap_exponents: str = "2:7"
    out: str = "reports"
    workers: int | None = None

    @classmethod
    def from_sources(cls, path: str | None, overrides: dict) -> "RunConfig":
        data: dict = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg._coerce()
        return cfg

    def _coerce(self):
        try:
            self.T = float(self.T)
            self.level = None if self.level is None else int(self.level)
            self.t = None if self.t is None else float(self.t)
            self.seed = int(self.seed)
            self.replicates = int(self.replicates)
            self.pairs = None if self.pairs is None else int(self.pairs)
            self.workers = None if self.workers is None else int(self.workers)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def digest_fields(self) -> dict:
        # output location and worker count never change a result byte
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("workers")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.digest_fields(), sort_keys=True).encode()).hexdigest()


def parse_range(text: str) -> list[int]:
    lo, _, hi = text.partition(":")
    try:
        lo_i, hi_i = int(lo), int(hi or lo)
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r} (expected lo:hi)") from exc
    if hi_i < lo_i:
        raise ConfigError(f"empty range {text!r}")
    return list(range(lo_i, hi_i + 1))


def parse_models(text: str) -> list[Model]:
    try:
        return [Model.parse(m) for m in text.split("+") if m.strip()]
    except DistributionError as exc:
        raise ConfigError(str(exc)) from exc


def load_fn(src: str, grid: Grid) -> StepFn:
    try:
        return StepFn.constant(grid, float(src))
    except ValueError:
        pass
    return load_stepfn_csv(src, grid)


def random_step(rng: np.random.Generator, grid: Grid) -> StepFn:
    v = rng.normal(size=grid.n_cells)
    v[rng.random(grid.n_cells) < 0.2] = 0.0
    return StepFn(grid, v)


# ---------------------------------------------------------------- result collection


@dataclass
class Check:
    name: str
    value: float
    tolerance: str
    passed: bool


@dataclass
class Result:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def check(self, name: str, value: float, tolerance: str, passed: bool):
        self.checks.append(Check(name, float(value), tolerance, bool(passed)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def write_reports(command: str, cfg: RunConfig, res: Result) -> tuple[Path, Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.columns)
    for r in res.rows:
        w.writerow([_fmt(x) for x in r])
    csv_path = out / f"{command}.csv"
    csv_path.write_text(buf.getvalue())
    summary = {
        "schema_version": SCHEMA_VERSION,
        "tool": "iterchaos",
        "version": __version__,
        "command": command,
        "config": cfg.digest_fields(),
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "passed": res.passed,
        "checks": [dataclasses.asdict(c) for c in res.checks],
        **res.extra,
    }
    json_path = out / f"{command}.json"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return csv_path, json_path


# ---------------------------------------------------------------- commands


def cmd_product_check(cfg: RunConfig) -> Result:
    grid = Grid(cfg.T, cfg.level if cfg.level is not None else 3)
    basis = BasisSpec(grid)
    rng = np.random.default_rng(cfg.seed)
    n_pairs = cfg.pairs or 100
    res = Result(["model", "pair", "max_residual"])
    worst = 0.0
    pairs = [(random_step(rng, grid), random_step(rng, grid)) for _ in range(n_pairs)]
    for model in parse_models(cfg.model or ALL_FAMILIES):
        for i, (h, g) in enumerate(pairs):
            p2, p11, c = product_decompose(h, g, basis, model)
            lhs = phi(h, basis, model).to_poly() * phi(g, basis, model).to_poly()
            r = (p2.to_poly() + p11.to_poly() + c - lhs).max_abs_coef()
            worst = max(worst, r)
            res.rows.append([str(model), i, r])
    res.check("product_max_residual", worst, "<1e-10", worst < 1e-10)
    return res


def cmd_ibp(cfg: RunConfig) -> Result:
    grid = Grid(cfg.T, cfg.level if cfg.level is not None else 3)
    basis = BasisSpec(grid)
    rng = np.random.default_rng(cfg.seed)
    n_pairs = cfg.pairs or 50
    pairs = [(random_step(rng, grid), random_step(rng, grid)) for _ in range(n_pairs)]
    res = Result(["model", "pair", "max_residual"])
    worst = 0.0
    for model in parse_models(cfg.model or ALL_FAMILIES):
        for i, (h, g) in enumerate(pairs):
            r = ibp_residual(h, g, basis, model).max_abs_entry()
            worst = max(worst, r)
            res.rows.append([str(model), i, r])
    res.check("ibp_max_residual", worst, "<1e-10", worst < 1e-10)
    return res


def cmd_norm(cfg: RunConfig) -> Result:
    rng = np.random.default_rng(cfg.seed)
    res = Result(["model", "case", "direct", "formula", "abs_diff"])
    worst = 0.0
    n_cfg = cfg.pairs or 20
    for model in parse_models(cfg.model or ALL_FAMILIES):
        for i in range(n_cfg):
            grid = Grid(cfg.T, int(rng.integers(1, 4)) if cfg.level is None else cfg.level)
            basis = BasisSpec(grid)
            t = grid.cell_length * int(rng.integers(1, grid.n_cells + 1))
            spec = IntegralSpec(random_step(rng, grid), random_step(rng, grid), t, basis, model)
            sm = second_moment(spec)
            d = abs(sm["direct"] - sm["formula"])
            worst = max(worst, d)
            res.rows.append([str(model), f"random{i}", sm["direct"], sm["formula"], d])
    res.check("norm_identity_max_diff", worst, "<1e-10", worst < 1e-10)
    grid = Grid(1.0, 1)
    basis = BasisSpec(grid)
    one = StepFn.constant(grid)
    for tag, target in (("gaussian", 0.5), ("rademacher", 0.25)):
        sm = second_moment(IntegralSpec(one, one, 1.0, basis, Model.parse(tag)))
        err = max(abs(sm["direct"] - target), abs(sm["formula"] - target))
        res.rows.append([tag, "baseline", sm["direct"], sm["formula"], abs(sm["direct"] - sm["formula"])])
        res.check(f"norm_baseline_{tag}", err, f"|.-{target}|<1e-12", err < 1e-12)
    return res


def cmd_riemann(cfg: RunConfig) -> Result:
    grid = Grid(cfg.T, cfg.level if cfg.level is not None else 8)
    basis = BasisSpec(grid)
    levels = parse_range(cfg.levels or f"2:{grid.level}")
    if levels[-1] > grid.level:
        raise ConfigError(f"partition level {levels[-1]} exceeds basis level {grid.level}")
    t = cfg.t if cfg.t is not None else cfg.T
    res = Result(["model", "level", "mesh", "sq_error", "z_second_moment"])
    for model in parse_models(cfg.model or "gaussian+centered_exponential"):
        spec = IntegralSpec(load_fn(cfg.h, grid), load_fn(cfg.g, grid), t, basis, model)
        z = double_integral(spec)
        ez2 = z.second_moment()
        errs = []
        for lev in levels:
            e = (riemann_sum(spec, Grid(cfg.T, lev)) - z).second_moment()
            errs.append(e)
            res.rows.append([str(model), lev, cfg.T / 2**lev, e, ez2])
        dec = all(b < a for a, b in zip(errs, errs[1:]))
        res.check(f"riemann_strictly_decreasing[{model}]", float(dec), "true", dec)
        res.check(f"riemann_final_relative[{model}]", errs[-1] / ez2, "<1e-3", errs[-1] < 1e-3 * ez2)
    return res


def cmd_square_decomp(cfg: RunConfig) -> Result:
    rng = np.random.default_rng(cfg.seed)
    n = 2 ** (cfg.level if cfg.level is not None else 2)
    if n > 4:
        raise ConfigError("square-decomp uses N <= 4 (level <= 2)")
    count = cfg.pairs or 10
    tensors = []
    for _ in range(count):
        A = rng.normal(size=(n, n))
        tensors.append(sym(A))
    res = Result(["model", "case", "order", "residual", "oracle_order0", "exact_mean", "order0_tensor", "order0_a"])
    table = {}
    for model in parse_models(cfg.model or ALL_FAMILIES):
        worst = {k: 0.0 for k in range(5)}
        m0 = 0.0
        for i, f in enumerate(tensors):
            sd = square_decomposition(f, model)
            for k, r in sd.residual.items():
                worst[k] = max(worst[k], r)
                res.rows.append([str(model), i, k, r, sd.oracle_order0, sd.exact_square_mean,
                                 sd.order0_tensor_reading, sd.order0_a_reading])
            m0 = max(m0, abs(sd.oracle_order0 - sd.exact_square_mean))
        table[str(model)] = {str(k): v for k, v in worst.items()}
        res.check(f"order4_residual[{model}]", worst[4], "<1e-9", worst[4] < 1e-9)
        res.check(f"order0_equals_mean[{model}]", m0, "<1e-9", m0 < 1e-9)
        if model.is_gaussian:
            g = max(worst.values())
            res.check(f"gaussian_all_orders[{model}]", g, "<1e-9", g < 1e-9)
    complete = all(len(v) == 5 for v in table.values())
    res.check("residual_table_complete", float(complete), "true", complete)
    res.extra["per_order_residual"] = table
    return res


def baseline_gaps(cfg: RunConfig, grid: Grid) -> list[tuple[float, float]]:
    t = cfg.t if cfg.t is not None else cfg.T
    gaps = []
    for e in parse_range(cfg.gap_exponents):
        gaps.append((t - 2.0**-e, t))
    for s, tt in gaps:
        grid.point_index(s)
    return gaps


def cmd_moment_bound(cfg: RunConfig) -> Result:
    grid = Grid(cfg.T, cfg.level if cfg.level is not None else 11)
    basis = BasisSpec(grid)
    gaps = baseline_gaps(cfg, grid)
    res = Result(["model", "s", "t", "gap", "fourth_moment", "scaled", "bound_ratio"])
    consts = {}
    for model in parse_models(cfg.model or "gaussian+centered_exponential"):
        rep = fourth_moment_scaling(load_fn(cfg.h1, grid), load_fn(cfg.h2, grid), gaps, basis, model)
        for r in rep.rows:
            res.rows.append([str(model), r.s, r.t, r.gap, r.fourth_moment, r.scaled, r.bound_ratio])
        res.check(f"scaled_spread[{model}]", rep.spread, "<3", rep.spread < 3.0)
        res.check(f"loglog_slope[{model}]", rep.slope, "in [1.9, 2.1]", 1.9 <= rep.slope <= 2.1)
        consts[str(model)] = {"candidate": rep.candidate_constant, "empirical": rep.empirical_constant}
    res.extra["constants"] = consts
    return res


def cmd_qv(cfg: RunConfig) -> Result:
    grid = Grid(cfg.T, cfg.level if cfg.level is not None else 8)
    basis = BasisSpec(grid)
    levels = parse_range(cfg.levels or f"4:{grid.level}")
    if levels[-1] > grid.level:
        raise ConfigError(f"partition level {levels[-1]} exceeds basis level {grid.level}")
    t = cfg.t if cfg.t is not None else cfg.T
    grid.point_index(t)
    h1, h2 = load_fn(cfg.h1, grid), load_fn(cfg.h2, grid)
    res = Result(["model", "level", "mesh", "residual_mean", "residual_ci", "residual_nocorr_mean", "replicates", "seed"])
    reports = {}
    for model in parse_models(cfg.model or "gaussian+centered_exponential"):
        rep = qv_convergence(h1, h2, t, basis, model, levels, cfg.replicates, cfg.seed, cfg.workers)
        for r in rep.rows:
            res.rows.append([str(model), r.level, r.mesh, r.residual_mean, r.residual_ci,
                             r.residual_nocorr_mean, rep.replicates, rep.seed])
        resid = [r.residual_mean for r in rep.rows]
        mono = all(b < a for a, b in zip(resid, resid[1:]))
        res.check(f"qv_residual_decreasing[{model}]", float(mono), "true", mono)
        if model.is_gaussian and cfg.h1 == "1" and cfg.h2 == "1":
            target = t * t / 2.0
            last = rep.rows[-1]
            z = abs(last.qv_mean - target) / last.qv_stderr
            res.check(f"qv_mean_within_3se[{model}]", z, f"|mean-{target}|/se<3", z < 3.0)
        if any(abs(model.moments(j)[3]) > 0 for j in range(grid.n_cells)):
            better = all(r.residual_mean < r.residual_nocorr_mean for r in rep.rows)
            res.check(f"qv_correction_helps[{model}]", float(better), "true", better)
        reports[str(model)] = rep.to_dict()
    res.extra["qv_reports"] = reports
    return res


def cmd_selftest(cfg: RunConfig) -> Result:
    """Every study at its default size plus the exact invariants, in one report."""
    res = Result(["check", "value", "tolerance", "passed"])
    sub = {
        "product-check": cmd_product_check,
        "ibp": cmd_ibp,
        "norm": cmd_norm,
        "riemann": cmd_riemann,
        "square-decomp": cmd_square_decomp,
        "moment-bound": cmd_moment_bound,
        "qv": cmd_qv,
    }
    base = dataclasses.replace(cfg, level=None, model=None, levels=None, pairs=None)
    for name, fn in sub.items():
        r = fn(base)
        for c in r.checks:
            res.checks.append(Check(f"{name}:{c.name}", c.value, c.tolerance, c.passed))
    for c in _martingale_checks(cfg.seed):
        res.checks.append(c)
    grid = Grid(1.0, 6)
    one = StepFn.constant(grid)
    sur = square_sum_surrogate(one, one, 1.0, BasisSpec(grid), list(range(1, 7)))
    norms = [s["norm"] for s in sur]
    dec = all(b < a for a, b in zip(norms, norms[1:]))
    res.checks.append(Check("square_sum_surrogate_decreasing", float(dec), "true", dec))
    for c in res.checks:
        res.rows.append([c.name, c.value, c.tolerance, c.passed])
    return res


def _martingale_checks(seed: int, count: int = 20) -> list[Check]:
    rng = np.random.default_rng(seed)
    n, cut = 4, 2
    worst = 0.0
    for fam in BASELINE_FAMILIES:
        model = Model(fam)
        for _ in range(count):
            F = Kernel2(rng.normal(size=(n, n)))
            elems = [phi2(F, model), phi11(F, model)]
            for order in range(1, 5):
                elems.append(phi_circ_n(_random_sym(rng, order, n), model))
            for z in elems:
                tail = (z - truncate(z, cut)).to_poly(exact=True)
                worst = max(worst, float(conditional_expect(tail, range(cut), model, exact=True).max_abs_coef()))
    return [Check("martingale_tail_max", worst, "==0", worst == 0.0)]


def _random_sym(rng, order: int, n: int) -> SymTensor:
    return sym(rng.normal(size=(n,) * order))


HANDLERS: dict[str, Callable[[RunConfig], Result]] = {
    "product-check": cmd_product_check,
    "riemann": cmd_riemann,
    "ibp": cmd_ibp,
    "norm": cmd_norm,
    "square-decomp": cmd_square_decomp,
    "moment-bound": cmd_moment_bound,
    "qv": cmd_qv,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iterchaos", description=__doc__.splitlines()[0], allow_abbrev=False)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    for f in dataclasses.fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = RunConfig.from_sources(args.config, overrides)
        if cfg.workers is None:
            cfg.workers = default_workers()
        res = HANDLERS[args.command](cfg)
    except (ConfigError, GridError, DistributionError, FileNotFoundError) as exc:
        print(f"iterchaos: config error: {exc}", file=sys.stderr)
        return 2
    write_reports(args.command, cfg, res)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.value:.6g}  ({c.tolerance})")
    return 0 if res.passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
