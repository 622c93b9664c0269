"""
The `hormander-spectral` command.

Each subcommand runs one check or experiment, prints a summary on standard
output, and writes the full JSON report when `--report PATH` is given.
The exit code is 0 when every verdict passes, 1 on a failure, 2 on a
configuration error and 3 when a verdict is inconclusive.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import TYPE_CHECKING

import pydantic

from . import dnsystem, harness, interp, roparam, schemas, settings
from .errors import HormanderError
from .hspace import Grid, hnorm, load_fields, vector_hnorm
from .report import Report, Verdict, combine
from .roparam import Power


if TYPE_CHECKING:
    from collections.abc import Callable, Iterator, Sequence

    from .dnsystem import DNSystem
    from .roparam import ROParam


__all__ = ["build_parser", "main"]

logger = logging.getLogger(__name__)

EXIT_CODES = {Verdict.PASS: 0, Verdict.FAIL: 1, Verdict.INCONCLUSIVE: 3}
CONFIG_ERROR = 2


class ConfigError(Exception):
    """
    Raised for unusable command-line input that argparse cannot detect,
    such as a malformed `--orders` matrix.
    """


def _grid_size(text: str) -> int:
    size = int(text)
    if size < 4 or size % 2:
        msg = f"grid sizes must be even and at least 4, not {size}"
        raise argparse.ArgumentTypeError(msg)
    return size


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        msg = f"expected a positive integer, not {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def _param(text: str) -> ROParam:
    try:
        return schemas.parse_param(text)
    except ValueError as error:
        raise argparse.ArgumentTypeError(str(error)) from error


# Commands


def _load(args: argparse.Namespace) -> DNSystem:
    """
    The system file, with DN numbers solved for when the file has none.
    """
    system = schemas.load_system(args.system)
    return system if system.dn is not None else system.with_dn()


def _battery(args: argparse.Namespace) -> list[ROParam]:
    return args.phi or [Power(0.0)]


def _grids(args: argparse.Namespace, n: int, default: Sequence[int]) -> list[Grid]:
    return [Grid(n, size) for size in (args.grid or default)]


def _parse_orders(text: str) -> list[list[int | None]]:
    try:
        orders = json.loads(text)
    except json.JSONDecodeError as error:
        msg = f"--orders is not valid JSON: line {error.lineno} column {error.colno}: {error.msg}"
        raise ConfigError(msg) from error
    if (
        not isinstance(orders, list)
        or not orders
        or any(not isinstance(row, list) or len(row) != len(orders) for row in orders)
        or any(not (v is None or isinstance(v, int)) for row in orders for v in row)
    ):
        msg = "--orders must be a square matrix of integers or null"
        raise ConfigError(msg)
    return orders


def run_dn_numbers(args: argparse.Namespace) -> Report:
    if args.orders is not None:
        orders = _parse_orders(args.orders)
    elif args.system is not None:
        orders = _load(args).order_matrix
    else:
        msg = "give a system file or --orders"
        raise ConfigError(msg)
    dn = dnsystem.solve_dn_numbers(orders)
    return Report(
        name="dn_numbers",
        invariant="ord A_jk ≤ l_j + m_k with minimal Σ l_j + Σ m_k",
        verdict=Verdict.PASS,
        values={"l": list(dn.l), "m": list(dn.m), "q": dn.q},
        config={"orders": orders},
    )


def run_check_elliptic(args: argparse.Namespace) -> Report:
    return dnsystem.ellipticity_margin(_load(args), tolerance=args.tolerance)


def run_check_condition_b(args: argparse.Namespace) -> Report:
    return dnsystem.condition_b_margin(_load(args), c2=args.c2, tolerance=args.tolerance)


def run_norm(args: argparse.Namespace) -> Report:
    fields = load_fields(Path(args.fields))
    if args.component is not None and not 0 <= args.component < fields.p:
        msg = f"--component must lie in [0, {fields.p}), got {args.component}"
        raise ConfigError(msg)
    reports = []
    for phi in _battery(args):
        if args.component is None:
            values = {
                "norm": vector_hnorm(fields, [phi] * fields.p),
                "components": [hnorm(component, phi) for component in fields],
            }
        else:
            values = {"norm": hnorm(fields[args.component], phi)}
        reports.append(
            Report(
                name="norm",
                invariant="‖u‖_φ is finite",
                verdict=Verdict.PASS,
                values=values,
                config={"param": repr(phi), "component": args.component},
                grid_sizes=[fields.grid.N],
            )
        )
    return combine("norm", "‖u‖_φ is finite", reports)


def run_apriori(args: argparse.Namespace) -> Report:
    sys_ = _load(args)
    reports = [
        harness.apriori_check(
            sys_,
            phi,
            sigma,
            trials=args.trials,
            grids=_grids(args, sys_.n, harness.REFINEMENTS),
            seed=args.seed,
            adjoint=args.adjoint,
        )
        for phi in _battery(args)
        for sigma in (args.sigma or [1.0])
    ]
    return combine("apriori", "a priori estimate for every parameter and σ", reports)


def run_regularity(args: argparse.Namespace) -> Report:
    sys_ = _load(args)
    reports = [
        harness.regularity_check(
            sys_,
            phi,
            grids=_grids(args, sys_.n, harness.REFINEMENTS),
            seed=args.seed,
            project=args.project,
        )
        for phi in _battery(args)
    ]
    return combine("regularity", "regularity lifting for every parameter", reports)


def run_continuity(args: argparse.Namespace) -> Report:
    sys_ = _load(args)
    reports = [
        harness.continuity_check(
            sys_,
            phi,
            args.lam,
            k=args.component or 0,
            grids=_grids(args, sys_.n, harness.REFINEMENTS),
            seed=args.seed,
            project=args.project,
        )
        for phi in _battery(args)
    ]
    return combine("continuity", "bounded derivatives for every parameter", reports)


def run_fredholm(args: argparse.Namespace) -> Report:
    sys_ = _load(args)
    battery = _battery(args)
    grid = _grids(args, sys_.n, [16])[0]
    analysis = harness.fredholm_analysis(sys_, battery[0], grid)
    return combine(
        "fredholm",
        "A is Fredholm with index 0 and range orthogonal to N⁺",
        [
            harness.fredholm_report(analysis),
            harness.kernel_phi_independence(sys_, battery, grid),
            harness.adjoint_consistency(sys_, grid),
            harness.verify_projectors(analysis, trials=args.trials, seed=args.seed),
            harness.solvability_biconditional(analysis, trials=args.trials, seed=args.seed),
        ],
        seeds=[args.seed],
    )


def run_interp_verify(args: argparse.Namespace) -> Report:
    reports = [
        interp.verify_sobolev_interpolation(
            phi,
            args.s0,
            args.s1,
            trials=args.trials,
            grids=_grids(args, 1, [16, 32]),
            seed=args.seed,
            tolerance=args.tolerance,
        )
        for phi in _battery(args)
    ]
    return combine("interp_verify", "interpolation recovers H^φ for every parameter", reports)


def run_indices(args: argparse.Namespace) -> Report:
    reports = []
    for phi in _battery(args):
        reports.append(roparam.index_report(phi, tolerance=args.tolerance))
        reports.append(roparam.verify_ro(phi, args.a))
    return combine("indices", "RO condition and Matuszewska indices", reports)


def run_adjoint(args: argparse.Namespace) -> Report:
    adjoint = dnsystem.formal_adjoint(_load(args))
    print(schemas.dump_system(adjoint, name="adjoint"))  # noqa: T201
    return Report(
        name="adjoint",
        invariant="(Au, v) = (u, A⁺v)",
        verdict=Verdict.PASS,
        values={"p": adjoint.p, "n": adjoint.n},
    )


# Parser


def _common(parser: argparse.ArgumentParser, *, system: bool = True) -> None:
    if system:
        parser.add_argument("system", type=Path, help="system JSON file")
    parser.add_argument("--phi", action="append", type=_param, metavar="KIND:ARGS", help="parameter, repeatable (default power:0)")
    parser.add_argument("--grid", action="append", type=_grid_size, metavar="N", help="modes per axis, repeatable")
    parser.add_argument("--trials", type=_positive_int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tolerance", type=float, default=None)


COMMANDS: dict[str, tuple[Callable[[argparse.Namespace], Report], str]] = {
    "dn-numbers": (run_dn_numbers, "solve for Douglis–Nirenberg numbers"),
    "check-elliptic": (run_check_elliptic, "sample the ellipticity margin"),
    "check-condition-b": (run_check_condition_b, "sample the lower bound of condition b)"),
    "norm": (run_norm, "Hörmander norms of a saved field file"),
    "apriori": (run_apriori, "run the a priori estimate"),
    "regularity": (run_regularity, "run the regularity experiment"),
    "continuity": (run_continuity, "run the continuity experiment"),
    "fredholm": (run_fredholm, "kernel, cokernel, index, projectors and solvability"),
    "interp-verify": (run_interp_verify, "check the interpolation norm identity"),
    "indices": (run_indices, "estimate Matuszewska indices and the RO constant"),
    "adjoint": (run_adjoint, "print the formal adjoint as JSON"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hormander-spectral",
        description="Verify elliptic Douglis–Nirenberg systems in Hörmander spaces on the torus.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log more; repeat for debug output")
    parser.add_argument("--report", type=Path, metavar="PATH", help="write the JSON report here")
    parser.add_argument("--workers", type=_positive_int, default=None, help="threads for trial maps")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, (_, summary) in COMMANDS.items():
        command = commands.add_parser(name, help=summary, description=summary)
        if name == "dn-numbers":
            command.add_argument("system", type=Path, nargs="?", help="system JSON file")
            command.add_argument("--orders", help='order matrix as JSON, e.g. "[[2,1],[1,0]]"')
        elif name == "norm":
            command.add_argument("fields", type=Path, help="binary field file with a JSON manifest")
            _common(command, system=False)
            command.add_argument("--component", type=int, default=None)
        elif name in {"interp-verify", "indices"}:
            _common(command, system=False)
            if name == "indices":
                command.epilog = (
                    "Without --tolerance the estimated indices are not compared with the declared ones"
                    " and the verdict is inconclusive, with exit status 3."
                )
        else:
            _common(command)
    apriori = commands.choices["apriori"]
    apriori.add_argument("--sigma", action="append", type=float, help="σ > 0, repeatable (default 1)")
    apriori.add_argument("--adjoint", action="store_true", help="run the estimate for A⁺")
    for name in ("regularity", "continuity"):
        commands.choices[name].add_argument("--project", action="store_true", help="project f onto the solvable subspace")
    continuity = commands.choices["continuity"]
    continuity.add_argument("--lambda", dest="lam", type=int, default=0, metavar="L")
    continuity.add_argument("--component", type=int, default=None)
    commands.choices["check-condition-b"].add_argument("--c2", type=float, default=0.0)
    interp_verify = commands.choices["interp-verify"]
    interp_verify.add_argument("--s0", type=float, required=True)
    interp_verify.add_argument("--s1", type=float, required=True)
    commands.choices["indices"].add_argument("--a", type=float, default=2.0, help="dilation bound for the RO constant")
    return parser


# Output


def _format(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.14e}"
    if isinstance(value, list):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    return str(value)


def summarize(report: Report, depth: int = 0) -> Iterator[str]:
    indent = "  " * depth
    yield f"{indent}{report.name}: {report.verdict.value} ({report.invariant})"
    for key, value in report.values.items():
        yield f"{indent}  {key} = {_format(value)}"
    for child in report.children:
        yield from summarize(child, depth + 1)


@contextlib.contextmanager
def _environment(**overrides: str | None) -> Iterator[None]:
    """
    Set environment variables for the duration of a command.
    """
    saved = {key: os.environ.get(key) for key in overrides}
    try:
        for key, value in overrides.items():
            if value is not None:
                os.environ[key] = value
        yield
    finally:
        for key, value in saved.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value


def main(argv: Sequence[str] | None = None) -> int:
    settings.env.read_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: settings.log_level(), 1: "INFO"}.get(args.verbose, "DEBUG")
    logging.basicConfig(stream=sys.stderr, level=level.upper(), format="%(levelname)s %(name)s: %(message)s")
    command, _ = COMMANDS[args.command]
    workers = None if args.workers is None else str(args.workers)
    try:
        with _environment(HORMANDER_WORKERS=workers):
            report = command(args)
    except (pydantic.ValidationError, ConfigError, OSError, ValueError, IndexError) as error:
        print(f"configuration error: {error}", file=sys.stderr)  # noqa: T201
        return CONFIG_ERROR
    except HormanderError as error:
        print(f"{type(error).__name__}: {error}", file=sys.stderr)  # noqa: T201
        return EXIT_CODES[Verdict.FAIL]
    if args.command != "adjoint":
        for line in summarize(report):
            print(line)  # noqa: T201
    if args.report is not None:
        args.report.write_text(report.to_json() + "\n")
    logger.debug("verdict %s", report.verdict)
    return EXIT_CODES[report.verdict]
