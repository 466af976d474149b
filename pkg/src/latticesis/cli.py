"""Command-line front end.

Subcommands write CSV to ``--out`` (default: standard output); progress goes
to standard error.  Exit codes: 0 success, 2 usage, 3 runtime, 4 IO.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import shlex
import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

import numpy as np

from . import csvio, experiments, meanfield, stats
from .core import SimParams
from .rng import derive

log = logging.getLogger("latticesis")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4
SUBCOMMANDS = ("simulate", "meanfield", "threshold", "sweep", "acor")
# flags that never change the output bytes
_NOT_RECORDED = {"out", "jobs", "quiet"}


class UsageError(Exception):
    pass


# -- value parsing -----------------------------------------------------------

def _number(text: str) -> Decimal:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_finite():
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return value


def parse_grid(text: str) -> list[float]:
    """Comma list whose items are numbers or inclusive ``lo:hi:step`` ranges.

    >>> parse_grid("0.1:0.5:0.1,2")
    [0.1, 0.2, 0.3, 0.4, 0.5, 2.0]
    """
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise argparse.ArgumentTypeError(f"empty item in {text!r}")
        parts = item.split(":")
        if len(parts) == 1:
            values.append(float(_number(parts[0])))
        elif len(parts) == 3:
            lo, hi, step = (_number(x) for x in parts)
            if step <= 0:
                raise argparse.ArgumentTypeError(f"range step must be positive in {item!r}")
            n = int((hi - lo) / step)
            values.extend(float(lo + i * step) for i in range(n + 1) if lo + i * step <= hi)
        else:
            raise argparse.ArgumentTypeError(f"bad range {item!r}; expected lo:hi:step")
    return values


def _ranged(parse, lo, hi, lo_open=False, label=None):
    def check(text):
        value = parse(text)
        for v in value if isinstance(value, list) else [value]:
            low_bad = v <= lo if lo_open else v < lo
            if low_bad or (hi is not None and v > hi):
                rng = label or f"{'(' if lo_open else '['}{lo:g}, {hi:g}]"
                raise argparse.ArgumentTypeError(f"value {v:g} outside {rng}")
        return value
    return check


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"value {value} must be >= 1")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"value {value} outside [0, 2**64)")
    return value


_prob = _ranged(lambda t: float(_number(t)), 0.0, 1.0)
_prob_grid = _ranged(parse_grid, 0.0, 1.0)
_density = _ranged(lambda t: float(_number(t)), 0.0, None, lo_open=True, label="(0, inf)")
_density_grid = _ranged(parse_grid, 0.0, None, lo_open=True, label="(0, inf)")
_positive_float = _ranged(lambda t: float(_number(t)), 0.0, None, lo_open=True, label="(0, inf)")


# -- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticesis", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND",
                                parser_class=_Parser)
    sub.required = True

    def common(sp, out=True):
        if out:
            sp.add_argument("--out", default=None, help="output CSV path (default: stdout)")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")

    def lattice(sp, steps_default, steps_help):
        sp.add_argument("--size", type=_positive_int, default=128,
                        help="lattice side L (default 128)")
        sp.add_argument("--steps", type=_positive_int, default=steps_default,
                        help=steps_help)
        sp.add_argument("--f0", type=_prob, default=0.2,
                        help="initial infected fraction (default 0.2)")
        sp.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")

    sp = sub.add_parser("simulate", help="one trajectory of the infected fraction")
    lattice(sp, 10000, "ticks to simulate (default 10000)")
    sp.add_argument("--density", type=_density, default=1.0, help="agents per site (default 1)")
    sp.add_argument("--p", type=_prob, default=0.5, help="infection probability (default 0.5)")
    sp.add_argument("--q", type=_prob, default=0.05, help="healing probability (default 0.05)")
    sp.add_argument("--thin", type=_positive_int, default=1,
                    help="record every k-th tick (default 1)")
    common(sp)

    sp = sub.add_parser("meanfield", help="mean-field threshold curve or fixed points")
    sp.add_argument("--p", type=_prob_grid, default=[0.5], help="p grid (default 0.5)")
    sp.add_argument("--q", type=_prob_grid, default=None,
                    help="q grid; omit to tabulate the threshold q0(p, d)")
    sp.add_argument("--density", type=_ranged(parse_grid, 0.0, None, label="[0, inf)"),
                    default=[1.0], help="d grid (default 1)")
    sp.add_argument("--tol", type=_positive_float, default=meanfield.DEFAULT_TOL,
                    help="fixed-point tolerance (default 1e-10)")
    common(sp)

    sp = sub.add_parser("threshold", help="empirical threshold q* by bisection")
    lattice(sp, None, "horizon in ticks (default 50 * size**2)")
    sp.add_argument("--p", type=_prob_grid, default=[0.5], help="p grid (default 0.5)")
    sp.add_argument("--density", type=_density_grid, default=[1.0], help="d grid (default 1)")
    sp.add_argument("--replicates", type=_positive_int, default=16,
                    help="replicates per probe (default 16)")
    sp.add_argument("--resolution", type=_positive_float, default=1 / 256,
                    help="final bracket width (default 1/256)")
    sp.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (default 1)")
    common(sp)

    sp = sub.add_parser("sweep", help="equilibrium f_inf over a p x q x d grid")
    lattice(sp, 10000, "ticks per replicate (default 10000)")
    sp.add_argument("--p", type=_prob_grid, default=[0.5], help="p grid (default 0.5)")
    sp.add_argument("--q", type=_prob_grid, default=[0.05], help="q grid (default 0.05)")
    sp.add_argument("--density", type=_density_grid, default=[1.0], help="d grid (default 1)")
    sp.add_argument("--replicates", type=_positive_int, default=16,
                    help="replicates per cell (default 16)")
    sp.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (default 1)")
    common(sp)

    sp = sub.add_parser("acor", help="autocorrelation analysis of a saved trajectory")
    sp.add_argument("input", help="trajectory CSV written by 'simulate'")
    sp.add_argument("--column", default="infected_fraction",
                    help="column to analyse (default infected_fraction)")
    sp.add_argument("--window-c", type=_positive_float, default=stats.SOKAL_C,
                    help="self-consistent window constant (default 7)")
    common(sp)
    return parser


@dataclass
class RunConfig:
    subcommand: str
    flags: dict = field(default_factory=dict)

    def command_line(self) -> str:
        """Canonical invocation reproducing this run's output."""
        parts = ["latticesis", self.subcommand]
        for key, value in self.flags.items():
            if key in _NOT_RECORDED or value is None:
                continue
            if key == "input":
                parts.append(shlex.quote(value))
                continue
            flag = "--" + key.replace("_", "-")
            if isinstance(value, list):
                value = ",".join(csvio.format_value(v) for v in value)
            else:
                value = csvio.format_value(value)
            parts += [flag, value]
        return " ".join(parts)

    def recorded(self) -> dict:
        return {k: v for k, v in self.flags.items() if k not in _NOT_RECORDED}


def parse_args(argv) -> RunConfig:
    """Parse ``argv`` (without the program name).  Raises UsageError."""
    ns = build_parser().parse_args(list(argv))
    flags = vars(ns).copy()
    subcommand = flags.pop("subcommand")
    if subcommand == "threshold" and flags["steps"] is None:
        flags["steps"] = experiments.default_steps(flags["size"])
    return RunConfig(subcommand, flags)


# -- execution ---------------------------------------------------------------

@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
        return
    try:
        handle = open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc
    with handle:
        yield handle


class _IOFailure(Exception):
    pass


def _writer(config, stream, columns, master_seed=None):
    settings = {k: csvio.format_value(v) if not isinstance(v, list)
                else ",".join(csvio.format_value(x) for x in v)
                for k, v in config.recorded().items()}
    lines = csvio.header_lines(config.command_line(), master_seed, settings)
    return csvio.CsvWriter(stream, columns, lines)


def _run_simulate(config, stream):
    f = config.flags
    params = SimParams.from_density(f["size"], f["density"], f["p"], f["q"],
                                    initial_infected_fraction=f["f0"],
                                    max_steps=f["steps"], seed=f["seed"])
    log.info("simulate L=%d N=%d T=%d", params.lattice_side, params.agent_count,
             params.max_steps)
    series = experiments.run_trajectory(params, derive(f["seed"], 0), thin=f["thin"])
    out = _writer(config, stream, csvio.TRAJECTORY_COLUMNS, f["seed"])
    ticks = np.arange(1, series.length + 1) * f["thin"]
    for t, value in zip(ticks.tolist(), series.values.tolist()):
        out.write((t, value))


def _run_meanfield(config, stream):
    f = config.flags
    if f["q"] is None:
        out = _writer(config, stream, csvio.THRESHOLD_CURVE_COLUMNS)
        for d in f["density"]:
            for p, q0 in meanfield.mf_threshold_curve(d, f["p"]):
                out.write((p, d, q0))
        return
    out = _writer(config, stream, csvio.SOLVER_COLUMNS)
    for d in f["density"]:
        for p in f["p"]:
            for q in f["q"]:
                r = meanfield.solve_fmf(meanfield.MeanFieldParams(p, q, d), f["tol"])
                out.write((p, q, d, r.f_mf, r.regime, r.residual, r.q0))


def _run_threshold(config, stream):
    f = config.flags
    out = _writer(config, stream, csvio.QSTAR_COLUMNS, f["seed"])
    for d in f["density"]:
        for p in f["p"]:
            est = experiments.find_q_star(
                p, d, f["size"], f["replicates"], f["steps"], f["resolution"],
                f["seed"], f0=f["f0"], jobs=f["jobs"], progress=log.info)
            probes = ";".join(f"{csvio.format_value(q)}:{s}/{r}"
                              for q, s, r in est.survival_counts)
            out.write((p, d, f["size"], f["seed"], est.q_star, est.bracket_low,
                       est.bracket_high, est.resolution, meanfield.threshold_q0(p, d),
                       probes))


def _run_sweep(config, stream):
    f = config.flags
    out = _writer(config, stream, experiments.SWEEP_COLUMNS, f["seed"])

    def emit(row):
        log.info("p=%g q=%g d=%g f_inf=%s", row["p"], row["q"], row["d"], row["f_inf"])
        out.write(row)

    experiments.sweep(f["p"], f["q"], f["density"], f["size"], f["steps"],
                      f["replicates"], f["seed"], f["f0"], f["jobs"], on_row=emit)


def _run_acor(config, stream):
    f = config.flags
    try:
        with open(f["input"], encoding="utf-8") as handle:
            header, columns, rows = csvio.read_csv(handle)
    except OSError as exc:
        raise _IOFailure(f"cannot read {f['input']}: {exc.strerror or exc}") from exc
    if f["column"] not in columns:
        raise ValueError(f"column {f['column']!r} not found in {f['input']}")
    j = columns.index(f["column"])
    values = np.array([float(r[j]) for r in rows])
    # tau must exist for the raw series; a constant trajectory is rejected here
    stats.integrated_autocorrelation_time(values, f["window_c"])
    est = stats.estimate_equilibrium(values, f["window_c"])
    meta = _source_params(header)
    out = _writer(config, stream, csvio.ANALYSIS_COLUMNS, meta.get("seed"))
    out.write((meta.get("p"), meta.get("q"), meta.get("density"), meta.get("size"),
               meta.get("seed"), est.tau, est.burn_in, est.mean, est.std_error,
               est.n_effective, est.extinct))


def _source_params(header: dict) -> dict:
    meta = {}
    for key, cast in (("p", float), ("q", float), ("density", float),
                      ("size", int), ("seed", int)):
        if key in header:
            try:
                meta[key] = cast(header[key])
            except ValueError:
                pass
    return meta


_RUNNERS = {
    "simulate": _run_simulate,
    "meanfield": _run_meanfield,
    "threshold": _run_threshold,
    "sweep": _run_sweep,
    "acor": _run_acor,
}


def execute(config: RunConfig) -> int:
    for handler in list(log.handlers):
        log.removeHandler(handler)
    if not config.flags.get("quiet"):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
    log.propagate = False
    try:
        with _output(config.flags.get("out")) as stream:
            _RUNNERS[config.subcommand](config, stream)
    except _IOFailure as exc:
        print(f"latticesis: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"latticesis: {config.subcommand} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
