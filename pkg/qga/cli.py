from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys

from logging.handlers import RotatingFileHandler
from typing import Any, Dict, List, Optional

from qga.benchmark import (
    HAMILTONIAN_STREAM, INITIAL_STATE_STREAM, MUTATION_STREAM,
    run_benchmark, summarize, variant_stream_key
)
from qga.channels import generation_channel
from qga.engine import InitMode, initial_state, run
from qga.errors import ConvergenceError, QGAError, ResumeConflictError
from qga.files import ExperimentPaths, get_log_file
from qga.hamiltonian import ProblemHamiltonian, random_problem_hamiltonian
from qga.models import Cloner, MutationMode, PopulationLayout, Variant
from qga.reading import load_records, load_spectral_reports
from qga.settings import ExperimentConfig
from qga.spectral import DENSE_CAP, analyze
from qga.states import RngStream

__VERSION__ = (0, 3, 0)
__VERSION_NAME__ = ".".join(str(v) for v in __VERSION__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_CONVERGENCE = 4
EXIT_RESUME = 5

DEFAULT_MUTATION_PROBABILITY = 1 / 24

logger = logging.getLogger("qga")

def setup_logging(debug: bool = False) -> None:
    """Attaches the file and stderr handlers to the package logger."""
    level = logging.DEBUG if debug else logging.INFO
    logger.setLevel(level)
    if logger.handlers:
        for handler in logger.handlers:
            handler.setLevel(level)
        return

    formatter = logging.Formatter(f'[%(asctime)s %(name)s-{__VERSION_NAME__}:%(levelname)s]: %(message)s', "%Y-%m-%d %H:%M:%S")

    fh = RotatingFileHandler(get_log_file(), encoding="utf-8", maxBytes=1024 * 512, backupCount=10)
    fh.setFormatter(formatter)
    fh.setLevel(level)
    logger.addHandler(fh)

    ch = logging.StreamHandler()
    ch.setFormatter(formatter)
    ch.setLevel(level)
    logger.addHandler(ch)

    logger.debug(f"Running on {platform.system()} {platform.release()} [{platform.machine()}], Python {platform.python_version()}")

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qga", description="Density-matrix simulator and spectral analyzer for the quantum genetic algorithm.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__VERSION_NAME__}")
    parser.add_argument("--debug", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run one QGA trajectory")
    run_parser.add_argument("--n", type=int, default=4, help="number of registers (multiple of 4)")
    run_parser.add_argument("--c", type=int, required=True, help="qubits per register")
    run_parser.add_argument("--cloner", choices=[c.value for c in Cloner], required=True)
    run_parser.add_argument("--mutation", choices=[m.value for m in MutationMode], default=MutationMode.OFF.value)
    run_parser.add_argument("--pm", type=float, default=None, help="mutation probability (default 1/24)")
    run_parser.add_argument("--generations", type=int, default=10)
    run_parser.add_argument("--seed", type=int, default=0)
    run_parser.add_argument("--ham", default="random", help="'random' or a .ham file")
    run_parser.add_argument("--init", choices=[m.value for m in InitMode], default=InitMode.HAAR_FULL.value)
    run_parser.add_argument("--out", default=None, help="JSON-lines file for the trajectory")

    spectral_parser = commands.add_parser("spectral", help="dominant eigenpairs and fixed point of a generation channel")
    spectral_parser.add_argument("--ham", required=True, help=".ham file")
    spectral_parser.add_argument("--n", type=int, default=4)
    spectral_parser.add_argument("--cloner", choices=[c.value for c in Cloner], required=True)
    spectral_parser.add_argument("--mutation", choices=[m.value for m in MutationMode], default=MutationMode.OFF.value)
    spectral_parser.add_argument("--pm", type=float, default=None)
    spectral_parser.add_argument("--topk", type=int, default=6)
    spectral_parser.add_argument("--method", choices=["auto", "arnoldi", "dense"], default="auto")
    spectral_parser.add_argument("--cap", type=int, default=DENSE_CAP, help="largest dense superoperator dimension")
    spectral_parser.add_argument("--seed", type=int, default=0)
    spectral_parser.add_argument("--out", default=None, help="JSON file for the report")

    bench_parser = commands.add_parser("bench", help="run the benchmark experiment")
    source = bench_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="JSON experiment configuration")
    source.add_argument("--preset", choices=["full", "reduced"])
    bench_parser.add_argument("--resume", action="store_true")
    bench_parser.add_argument("--out", default=None, help="override the output directory")
    bench_parser.add_argument("--workers", type=int, default=None)

    compare_parser = commands.add_parser("compare", help="join simulation fits with spectral predictions")
    compare_parser.add_argument("--records", required=True)
    compare_parser.add_argument("--spectral", required=True)
    compare_parser.add_argument("--out", required=True, help="output directory")
    return parser

def _variant(parser: argparse.ArgumentParser, args: argparse.Namespace) -> Variant:
    mutation = MutationMode(args.mutation)
    if mutation is MutationMode.OFF and args.pm is not None:
        parser.error("--pm requires --mutation sampled or exact")
    p_m = DEFAULT_MUTATION_PROBABILITY if args.pm is None else args.pm
    return Variant(Cloner(args.cloner), mutation, p_m if mutation is not MutationMode.OFF else 0.0)

def _require_positive(parser: argparse.ArgumentParser, **values: int) -> None:
    for name, value in values.items():
        if value < 1:
            parser.error(f"--{name} must be positive, got {value}")

def _write_lines(file_path: Optional[str], items: List[Dict[str, Any]]) -> None:
    if file_path is None:
        return
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        for data in items:
            _ = f.write(json.dumps(data) + "\n")

def cmd_run(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    _require_positive(parser, n=args.n, c=args.c, generations=args.generations)
    variant = _variant(parser, args)
    layout = PopulationLayout(args.n, args.c)
    layout.require_qga()
    if args.ham == "random":
        h = random_problem_hamiltonian(args.c, RngStream(args.seed, (0, HAMILTONIAN_STREAM)))
    else:
        h = ProblemHamiltonian.load(args.ham)
        if h.c != args.c:
            parser.error(f"--c {args.c} does not match the Hamiltonian file (c={h.c})")

    rho_in = initial_state(layout, RngStream(args.seed, (0, INITIAL_STATE_STREAM, 0)), args.init)
    rng = RngStream(args.seed, (0, MUTATION_STREAM, *variant_stream_key(variant), 0))
    trajectory = run(
        rho_in, h, variant, args.generations,
        rng=rng if variant.mutation is MutationMode.SAMPLED else None,
        init_mode=args.init
    )
    _write_lines(args.out, [trajectory.to_dict()])
    print(f"F_QGA {trajectory.fidelity_series[-1]:.17g}")
    print(f"energy {trajectory.energy_series[-1]:.17g}")
    return EXIT_OK

def cmd_spectral(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    _require_positive(parser, n=args.n)
    variant = _variant(parser, args)
    if variant.mutation is MutationMode.SAMPLED:
        parser.error("sampled mutation has no superoperator; use --mutation off or exact")
    if args.topk < 2:
        parser.error("--topk must be at least 2")
    h = ProblemHamiltonian.load(args.ham)
    layout = PopulationLayout(args.n, h.c)
    channel = generation_channel(layout, h, variant)
    report = analyze(channel, h, variant.label, topk=args.topk, method=args.method, cap=args.cap, seed=args.seed)

    text = json.dumps(report.to_dict(), indent=2)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as f:
            _ = f.write(text + "\n")
    print(text)
    if report.flagged:
        logger.warning(f"Fixed set is not unique (m={report.multiplicity}, oscillating={report.oscillating})")
        return EXIT_DEGENERATE
    return EXIT_OK

def cmd_bench(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    if args.config is not None:
        config = ExperimentConfig.load(args.config)
    elif args.preset == "reduced":
        config = ExperimentConfig.reduced_preset()
    else:
        config = ExperimentConfig.full_preset()
    if args.out is not None:
        config.output_dir = args.out

    stats = run_benchmark(config, resume=args.resume, workers=args.workers)
    print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK

def cmd_compare(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    records = load_records(args.records)
    reports = load_spectral_reports(args.spectral)
    if not reports:
        logger.warning(f"No spectral reports found in '{args.spectral}'")
    paths = ExperimentPaths(args.out)
    os.makedirs(paths.output_dir, exist_ok=True)
    stats = summarize(records, reports, paths)
    print(json.dumps(stats.agreement, indent=2, sort_keys=True))
    return EXIT_OK

COMMANDS = {
    "run": cmd_run,
    "spectral": cmd_spectral,
    "bench": cmd_bench,
    "compare": cmd_compare
}

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.debug)
    try:
        return COMMANDS[args.command](parser, args)
    except ConvergenceError as e:
        logger.error(e)
        if e.best_residual is not None:
            print(f"best residual {e.best_residual:.3e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResumeConflictError as e:
        logger.error(e)
        return EXIT_RESUME
    except QGAError as e:
        # Malformed input, invalid layouts and oversized dense requests
        logger.error(e)
        return EXIT_USAGE
