"""Command-line entry point: ``predictivity <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or domain error.
Every command writes its CSV/text outputs plus ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import disease_model as dm
from . import estimators as est
from . import exact_binomial as eb
from . import fileio
from . import partition_retention as pr
from . import reference_values as ref
from . import simulator as sim
from .errors import DataError, PredictivityError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# Seed used by ``reproduce`` for the bias studies unless --seed is given.
STUDY_SEED = 12345

BIAS_DECIMALS, STUDY_DECIMALS, REPORT_DECIMALS = 4, 3, 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


class _Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.inputs: dict[str, str] = {}

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"cannot read {path}")
        self.inputs[str(path)] = fileio.file_digest(path)
        return path

    def text(self, name: str, body: str):
        self.path(name).write_text(body)

    def finish(self):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func",)}
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "config": config,
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _bias_rows(quantity, n_list, lambdas, rs):
    fn = eb.neg_rel_bias if quantity == "b" else eb.tie_half_prob
    return [(n, lam, r, fn(n, lam, r)) for n in n_list for lam in lambdas for r in rs]


def cmd_bias_table(args, run: _Run):
    points = eb.bias_grid(args.n, args.lam, args.r)
    rows = [(p.n, repr(p.lam), repr(p.r), p.b, p.a) for p in points]
    fileio.write_csv(run.path("bias_table.csv"), ("n", "lambda", "r", "b", "a"), rows, BIAS_DECIMALS)


def _load_model(args, run):
    return fileio.parse_model_spec(run.input(args.model))


def cmd_oracle_params(args, run: _Run):
    model = _load_model(args, run)
    params = dm.oracle_params(model)
    tables = dm.conditional_tables(model)
    items = [(k, getattr(params, k)) for k in ("theta_e", "theta_c", "theta_I0", "noise_factor", "theta_I", "bound_on_theta_e", "f_y_d")]
    if args.costs:
        spec = dm.CostPriorSpec.parse(args.costs)
        theta_c, sq = dm.weighted_cost(model, spec)
        items += [("theta_C", theta_c), ("weighted_sq_diff", sq)]
    fileio.write_csv(run.path("oracle_params.csv"), ("quantity", "value"), items, REPORT_DECIMALS)
    lines = ["u,f_u,f_u_given_d,f_u_given_h"]
    for u, a, b, c in zip(tables.tuples, tables.f_u, tables.f_u_given_d, tables.f_u_given_h):
        lines.append(",".join(["".join(map(str, u))] + [fileio.fmt(v, REPORT_DECIMALS) for v in (a, b, c)]))
    run.text("conditional_tables.csv", "\n".join(lines) + "\n")


def _write_curves(run, table: sim.CurveTable, name: str):
    fileio.write_csv(run.path(name), table.columns, table.rows, REPORT_DECIMALS)


def cmd_figure_data(args, run: _Run):
    grid = args.grid if args.grid else None
    _write_curves(run, sim.figure_curves(args.figure, n=args.n, grid=grid, points=args.points), f"figure{args.figure}.csv")


def cmd_simulate(args, run: _Run):
    model = _load_model(args, run)
    sample = sim.draw_case_control(model, args.n, args.seed)
    fileio.write_dataset(sample, run.path("sample.csv"))


def _study_csv(run, name, rows, summaries):
    columns = ("row", "reps", "n") + ref.STUDY_COLUMNS
    data = [(i + 1, row.reps, row.n, *s.row()) for i, (row, s) in enumerate(zip(rows, summaries))]
    fileio.write_csv(run.path(name), columns, data, STUDY_DECIMALS)


def _run_study(rows, seed, args):
    return [
        sim.replicate_bias_study(sim.SimConfig(r.model, r.n, r.reps, seed, args.mode, args.form, args.ties))
        for r in rows
    ]


def cmd_bias_study(args, run: _Run):
    rows = fileio.parse_study_config(run.input(args.config))
    if args.reps is not None:
        rows = [fileio.StudyRow(r.model, args.reps, r.n) for r in rows]
    _study_csv(run, "study.csv", rows, _run_study(rows, args.seed, args))


def cmd_estimate(args, run: _Run):
    parsed = fileio.parse_dataset(run.input(args.data), args.label_column, args.delimiter)
    sample = parsed.sample
    subset = args.subset.split(",") if args.subset else list(sample.variable_names)
    truth = _load_model(args, run) if args.model else None
    costs = dm.CostPriorSpec.parse(args.costs) if args.costs else None
    report = est.estimate(sample, subset, truth, costs, form=args.form, mode=args.mode)
    items = [(k, " ".join(map(str, v)) if isinstance(v, (list, tuple)) else v) for k, v in report.items()]
    lines = [f"# {parsed.summary()}"] + [f"{k}: {fileio.fmt(v, REPORT_DECIMALS)}" for k, v in items]
    run.text("report.txt", "\n".join(lines) + "\n")
    fileio.write_csv(run.path("report.csv"), ("quantity", "value"), items, REPORT_DECIMALS)


def cmd_pr_select(args, run: _Run):
    parsed = fileio.parse_dataset(run.input(args.data), args.label_column, args.delimiter)
    sample = parsed.sample
    config = pr.RetentionConfig(
        group_size=args.k, num_groups=args.groups, rounds=args.rounds, top_fraction=args.top_fraction,
        mix_count=args.mix, stages=tuple(args.stages) if args.stages else None, seed=args.seed,
    )
    result = pr.staged_selection(sample, config)
    names = sample.variable_names
    freq = result.frequency
    order = result.ranking()
    rows = [(names[v], int(result.appearances[v]), int(result.survivals[v]), freq[v]) for v in order]
    fileio.write_csv(run.path("retention.csv"), ("variable", "appearances", "survivals", "frequency"), rows, REPORT_DECIMALS)

    balanced = sample.n_d == sample.n_h
    n_half = len(sample.y) / 2.0
    mod_rows = []
    for i, mod in enumerate(result.modules[: args.max_modules], start=1):
        counts = est.cell_counts(sample, mod.variables)
        train = est.theta_e_train(counts) if balanced else None
        mod_rows.append((
            i, " ".join(names[v] for v in mod.variables), mod.i_score, train,
            dm.error_bound(min(mod.i_score / n_half, 1.0)), mod.count,
        ))
    fileio.write_csv(
        run.path("modules.csv"), ("module", "variables", "i_score", "train_error", "bound", "count"),
        mod_rows, REPORT_DECIMALS,
    )
    if result.flags:
        run.text("flags.txt", "\n".join(result.flags) + "\n")


def _reproduce_bias_table(run, table):
    if table == 1:
        rs, quantity, printed = ref.TABLE1_R, "b", ref.TABLE1_B
    else:
        rs, quantity, printed = ref.TABLE2_R, "a", ref.TABLE2_A
    rows = _bias_rows(quantity, ref.BIAS_TABLE_N, ref.TABLE_LAMBDA, rs)
    out = [(n, repr(lam), repr(r), v) for n, lam, r, v in rows]
    fileio.write_csv(run.path(f"table{table}.csv"), ("n", "lambda", "r", quantity), out, BIAS_DECIMALS)
    ref_vals = [printed[n][i][j] for n in ref.BIAS_TABLE_N for i in range(6) for j in range(5)]
    worst = max(abs(v[3] - p) for v, p in zip(rows, ref_vals))
    run.text(f"table{table}_report.txt", f"cells: {len(rows)}\nmax_abs_diff_vs_reference: {worst:.2e}\n")


def _reproduce_study(run, table, args):
    seed = STUDY_SEED if args.seed is None else args.seed
    configs = sim.study_rows(table)
    rows = [fileio.StudyRow(m, reps, n) for m, reps, n in configs]
    summaries = _run_study(rows, seed, args)
    _study_csv(run, f"table{table}.csv", rows, summaries)
    printed = ref.TABLE4_RESULTS if table == 4 else ref.TABLE6_RESULTS
    lines = ["row,column,ours,reference,z"]
    for i, (s, p) in enumerate(zip(summaries, printed), start=1):
        ours = s.row()
        for col, sd_col in (("mean_b", "sd_b"), ("mean_b1", "sd_b1"), ("mean_bo", "sd_bo")):
            ci, si = ref.STUDY_COLUMNS.index(col), ref.STUDY_COLUMNS.index(sd_col)
            se = math.sqrt((p[si] ** 2 + ours[si] ** 2) / s.reps) or float("nan")
            lines.append(f"{i},{col},{ours[ci]:.3f},{p[ci]:.3f},{(ours[ci] - p[ci]) / se:.2f}")
    run.text(f"table{table}_comparison.csv", "\n".join(lines) + "\n")


def cmd_reproduce(args, run: _Run):
    if args.table in (1, 2):
        _reproduce_bias_table(run, args.table)
    elif args.table in (4, 6):
        _reproduce_study(run, args.table, args)
    else:
        _write_curves(run, sim.figure_curves(args.figure), f"figure{args.figure}.csv")


def _study_options(p):
    p.add_argument("--mode", choices=("plugin", "oracle"), default=est.DEFAULT_MODE)
    p.add_argument("--form", choices=("inverse", "literal"), default=est.DEFAULT_FORM)
    p.add_argument("--ties", choices=("healthy", "half", "diseased"), default="healthy",
                   help="how the out-of-sample rule decides tied and unseen cells")


def _data_options(p):
    p.add_argument("--data", required=True, help="CSV or TSV with a header row")
    p.add_argument("--label-column", default="label")
    p.add_argument("--delimiter", choices=("comma", "tab"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="predictivity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default="output", help="output directory")
        p.set_defaults(func=func)
        return p

    p = command("bias-table", cmd_bias_table, "b(n, lambda, r) and a(n, lambda, r) over a grid")
    p.add_argument("--n", type=_ints, default=list(ref.BIAS_TABLE_N))
    p.add_argument("--lambda", dest="lam", type=_floats, default=list(ref.TABLE_LAMBDA))
    p.add_argument("--r", type=_floats, default=list(ref.PRINTED_R))

    p = command("oracle-params", cmd_oracle_params, "exact error and predictivity of a disease model")
    p.add_argument("--model", required=True, help="model spec file (key = JSON lines)")
    p.add_argument("--costs", help="e.g. pi_d=0.3,c_d=2,c_h=1")

    p = command("figure-data", cmd_figure_data, "curve data for figures 1-4")
    p.add_argument("--figure", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--grid", type=_floats, help="lambda values (figures 1-2) or MAFs (3-4)")

    p = command("simulate", cmd_simulate, "draw a balanced case-control sample")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True, help="subjects per class")
    p.add_argument("--seed", type=int, required=True)

    p = command("bias-study", cmd_bias_study, "Monte Carlo bias study over configured rows")
    p.add_argument("--config", required=True, help="CSV: maf, influential, t, order, reps, n")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int, help="override every row's replicate count")
    _study_options(p)

    p = command("estimate", cmd_estimate, "all estimates for one variable subset")
    _data_options(p)
    p.add_argument("--subset", help="comma-separated variable names (default: all)")
    p.add_argument("--model", help="model spec giving the true laws, enabling oracle estimates")
    p.add_argument("--costs")
    p.add_argument("--mode", choices=("plugin", "oracle"), default=est.DEFAULT_MODE)
    p.add_argument("--form", choices=("inverse", "literal"), default=est.DEFAULT_FORM)

    p = command("pr-select", cmd_pr_select, "Partition Retention variable selection")
    _data_options(p)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--groups", type=int, help="groups per round (default ceil(20 m / k))")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--stages", type=_ints, help="group size per stage, e.g. 1,2,6")
    p.add_argument("--top-fraction", type=float, default=0.05)
    p.add_argument("--mix", type=int, help="good variables per resuscitation group (default k/2)")
    p.add_argument("--max-modules", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)

    p = command("reproduce", cmd_reproduce, "regenerate a reference table or figure")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--table", type=int, choices=(1, 2, 4, 6))
    which.add_argument("--figure", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--seed", type=int, help=f"bias-study seed (default {STUDY_SEED})")
    _study_options(p)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        run = _Run(args, argv)
        with np.errstate(all="ignore"):
            args.func(args, run)
        run.finish()
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PredictivityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
