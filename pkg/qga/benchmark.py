"""Benchmark orchestration: Hamiltonians x initial states x variants."""
from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile

from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import votakvot

from typing_extensions import override

from qga.channels import Channel, generation_channel, sorting_channel
from qga.engine import initial_state, run
from qga.errors import QGAError, ResumeConflictError
from qga.files import ExperimentPaths, get_worker_count
from qga.fitting import fit_convergence
from qga.hamiltonian import ProblemHamiltonian, random_problem_hamiltonian
from qga.models import BenchRecord, Cloner, MutationMode, PopulationLayout, SpectralReport, Variant
from qga.reading import JsonLinesWriter, load_records, load_spectral_reports
from qga.settings import ExperimentConfig
from qga.spectral import analyze
from qga.states import RngStream
from qga.summaries import AggregateStats, ScatterRow, aggregate, hamiltonian_averages, scatter_rows

logger = logging.getLogger("qga")

# Stream key namespaces below the Hamiltonian index
HAMILTONIAN_STREAM = 0
INITIAL_STATE_STREAM = 1
MUTATION_STREAM = 2

SCATTER_COLUMNS = ["ham_hash", "variant", "F_inf_sim", "F_inf_pred", "gamma_sim", "gamma_pred"]

def variant_stream_key(variant: Variant) -> Tuple[int, int]:
    return list(Cloner).index(variant.cloner), list(MutationMode).index(variant.mutation)

class HamiltonianBatch:
    """Everything produced for one sampled Hamiltonian."""

    def __init__(self, index: int, hamiltonian: ProblemHamiltonian, records: List[BenchRecord], reports: List[SpectralReport]) -> None:
        self.index = index
        self.hamiltonian = hamiltonian
        self.records = records
        self.reports = reports

    @override
    def __repr__(self) -> str:
        return f'<HamiltonianBatch index={self.index} records={len(self.records)} reports={len(self.reports)}>'

    @property
    def failed(self) -> int:
        return sum(1 for r in self.records if not r.ok)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "hamiltonian": self.hamiltonian.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "reports": [r.to_dict() for r in self.reports]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> HamiltonianBatch:
        return cls(
            int(data["index"]),
            ProblemHamiltonian.from_dict(data["hamiltonian"]),
            [BenchRecord.from_dict(r) for r in data["records"]],
            [SpectralReport.from_dict(r) for r in data["reports"]]
        )

def _failed_record(index: int, h: ProblemHamiltonian, variant: Variant, init_index: int, config: ExperimentConfig, cause: str) -> BenchRecord:
    return BenchRecord(
        index, h.hash, variant.label, init_index, config.seed, config.init_mode,
        [], [], None, status="failed", error=cause
    )

def _spectral_reports(index: int, h: ProblemHamiltonian, config: ExperimentConfig, layout: PopulationLayout, sorting: Channel) -> List[SpectralReport]:
    reports: List[SpectralReport] = []
    cloners = []
    for variant in config.parsed_variants:
        if variant.cloner not in cloners:
            cloners.append(variant.cloner)
    for cloner in cloners:
        variant = Variant(cloner)
        channel = generation_channel(layout, h, variant, sorting=sorting)
        try:
            reports.append(analyze(
                channel, h, variant.label, topk=config.topk, ham_index=index, seed=config.seed
            ))
        except QGAError as e:
            logger.error(f"Spectral analysis of {variant.label} on Hamiltonian {index} failed: {e}")
    return reports

def run_hamiltonian(config: ExperimentConfig, index: int) -> HamiltonianBatch:
    """Runs every variant from shared initial states on the index-th Hamiltonian."""
    layout = PopulationLayout(config.n, config.c)
    h = random_problem_hamiltonian(config.c, RngStream(config.seed, (index, HAMILTONIAN_STREAM)))
    sorting = sorting_channel(layout, h)
    initial_states = [
        initial_state(layout, RngStream(config.seed, (index, INITIAL_STATE_STREAM, j)), config.init_mode)
        for j in range(config.num_initial_states)
    ]

    records: List[BenchRecord] = []
    for variant in config.parsed_variants:
        for j, rho_in in enumerate(initial_states):
            rng = RngStream(config.seed, (index, MUTATION_STREAM, *variant_stream_key(variant), j))
            try:
                trajectory = run(
                    rho_in, h, variant, config.generations,
                    rng=rng if variant.mutation is MutationMode.SAMPLED else None,
                    init_mode=config.init_mode, sorting=sorting
                )
                fit = fit_convergence(trajectory.fidelity_series, config.burn_in)
            except (QGAError, np.linalg.LinAlgError, ValueError) as e:
                logger.error(f"Trajectory {variant.label} #{j} on Hamiltonian {index} failed: {e}")
                records.append(_failed_record(index, h, variant, j, config, f"{type(e).__name__}: {e}"))
                continue
            records.append(BenchRecord(
                index, h.hash, variant.label, j, config.seed, config.init_mode,
                trajectory.fidelity_series, trajectory.energy_series, fit,
                trajectory.final_statistics
            ))

    reports = _spectral_reports(index, h, config, layout, sorting) if config.spectral else []
    return HamiltonianBatch(index, h, records, reports)

def _run_guarded(config: ExperimentConfig, index: int) -> HamiltonianBatch:
    try:
        return run_hamiltonian(config, index)
    except Exception as e:
        logger.exception(e)
        h = random_problem_hamiltonian(config.c, RngStream(config.seed, (index, HAMILTONIAN_STREAM)))
        cause = f"{type(e).__name__}: {e}"
        records = [
            _failed_record(index, h, variant, j, config, cause)
            for variant in config.parsed_variants
            for j in range(config.num_initial_states)
        ]
        return HamiltonianBatch(index, h, records, [])

@votakvot.track()
def hamiltonian_task(index: int, seed: int, settings: Dict[str, Any]) -> Dict[str, Any]:
    """Tracked unit of work: the index-th Hamiltonian of the experiment seeded with `seed`."""
    config = ExperimentConfig.from_dict({**settings, "seed": seed})
    return _run_guarded(config, index).to_dict()

def run_experiment(
    config: ExperimentConfig,
    indices: Optional[Sequence[int]] = None,
    workers: Optional[int] = None,
    store_path: Optional[str] = None
) -> Iterator[HamiltonianBatch]:
    """Yields one batch per Hamiltonian in index order.

    Each Hamiltonian is one tracked trial, at most `workers` of them run at once
    and every trial is stored under `store_path`. The order of the stream does not
    depend on the worker count."""
    config.validate()
    indices = list(range(config.num_hamiltonians)) if indices is None else list(indices)
    workers = get_worker_count(workers)
    store_path = store_path or tempfile.mkdtemp(prefix="qga-trials-")
    votakvot.init(runner="process", path=store_path)
    logger.debug(f"Tracking {len(indices)} trials in {store_path} with {workers} workers")

    settings = {key: value for key, value in config._as_dict().items() if key != "seed"}
    for start in range(0, len(indices), workers):
        chunk = indices[start:start + workers]
        batches: Dict[int, HamiltonianBatch] = {}
        for trial in hamiltonian_task.multi([
            {"index": index, "seed": config.seed, "settings": settings}
            for index in chunk
        ]):
            batch = HamiltonianBatch.from_dict(trial.result)
            batches[batch.index] = batch
        for index in chunk:
            yield batches[index]

def _format(value: float) -> str:
    return "%.17g" % value

def write_scatter(file_path: str, rows: Sequence[ScatterRow]) -> None:
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SCATTER_COLUMNS)
        for row in rows:
            writer.writerow([
                row.ham_hash, row.variant,
                _format(row.f_inf_sim), _format(row.f_inf_pred),
                _format(row.gamma_sim), _format(row.gamma_pred)
            ])

def write_summary(file_path: str, stats: AggregateStats) -> None:
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(stats.to_dict(), f, indent=2, sort_keys=True)
        _ = f.write("\n")

def summarize(records: Sequence[BenchRecord], reports: Sequence[SpectralReport], paths: ExperimentPaths) -> AggregateStats:
    """Aggregates records and writes summary.json and scatter.csv."""
    stats = aggregate(records, reports)
    write_summary(paths.summary, stats)
    write_scatter(paths.scatter, scatter_rows(hamiltonian_averages(records), reports))
    return stats

def _prepare_output(config: ExperimentConfig, paths: ExperimentPaths, resume: bool) -> List[int]:
    """Returns the Hamiltonian indices still to be computed."""
    manifest = {"config": config._as_dict(), "config_hash": config.config_hash}
    if resume and os.path.exists(paths.manifest):
        try:
            with open(paths.manifest, "r", encoding="utf-8") as f:
                stored = json.load(f)
        except (OSError, json.JSONDecodeError):
            raise ResumeConflictError from None
        if stored.get("config_hash") != config.config_hash:
            raise ResumeConflictError
    elif not resume:
        for path in (paths.records, paths.spectral):
            if os.path.exists(path):
                os.remove(path)
        for directory in (paths.hamiltonians, paths.trials):
            shutil.rmtree(directory, ignore_errors=True)
    paths.create()
    with open(paths.manifest, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        _ = f.write("\n")

    if not os.path.exists(paths.records):
        return list(range(config.num_hamiltonians))

    # The .ham file is written after records and reports, so it marks a finished Hamiltonian
    expected = len(config.variants) * config.num_initial_states
    records = load_records(paths.records)
    counts: Dict[int, int] = {}
    for record in records:
        counts[record.ham_index] = counts.get(record.ham_index, 0) + 1
    done = {
        index for index, count in counts.items()
        if count >= expected and os.path.exists(paths.hamiltonian(index))
    }
    kept = [r for r in records if r.ham_index in done]
    stored_reports = load_spectral_reports(paths.spectral)
    reports = [r for r in stored_reports if r.ham_index in done]
    if len(kept) != len(records) or len(reports) != len(stored_reports):
        logger.info(f"Discarding {len(records) - len(kept)} records of incomplete Hamiltonians")
        _rewrite(paths.records, [r.to_dict() for r in kept])
        _rewrite(paths.spectral, [r.to_dict() for r in reports])
    if done:
        logger.info(f"Resuming: {len(done)} Hamiltonians already complete")
    return [index for index in range(config.num_hamiltonians) if index not in done]

def _rewrite(file_path: str, items: List[Dict[str, Any]]) -> None:
    if os.path.exists(file_path):
        os.remove(file_path)
    writer = JsonLinesWriter(file_path)
    try:
        writer.write_all(items)
    finally:
        writer.close()

def run_benchmark(config: ExperimentConfig, resume: bool = False, workers: Optional[int] = None) -> AggregateStats:
    """Runs (or resumes) the experiment and writes every output file."""
    config.validate()
    paths = ExperimentPaths(config.output_dir)
    pending = _prepare_output(config, paths, resume)
    logger.info(f"Running {len(pending)} of {config.num_hamiltonians} Hamiltonians into {paths.output_dir}")

    store_path = tempfile.mkdtemp(prefix="run-", dir=paths.trials)
    records_writer = JsonLinesWriter(paths.records)
    spectral_writer = JsonLinesWriter(paths.spectral)
    try:
        for batch in run_experiment(config, pending, workers, store_path):
            records_writer.write_all([r.to_dict() for r in batch.records])
            spectral_writer.write_all([r.to_dict() for r in batch.reports])
            batch.hamiltonian.save(paths.hamiltonian(batch.index))
            logger.info(f"Hamiltonian {batch.index} done ({batch.failed} failed records)")
    finally:
        records_writer.close()
        spectral_writer.close()

    return summarize(load_records(paths.records), load_spectral_reports(paths.spectral), paths)
