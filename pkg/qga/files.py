import os
import sys

from typing import Optional

if sys.platform == "win32":
    DEFAULT_DATA_PATH = os.path.join(os.environ.get("APPDATA", os.path.expanduser("~")), "qga")
else:
    DEFAULT_DATA_PATH = os.path.join(os.path.expanduser("~"), ".config", "qga")

RECORDS_FILE = "records.jsonl"
SPECTRAL_FILE = "spectral.jsonl"
SUMMARY_FILE = "summary.json"
SCATTER_FILE = "scatter.csv"
MANIFEST_FILE = "run.json"
HAMILTONIANS_DIR = "hamiltonians"
TRIALS_DIR = "trials"

def get_data_dir() -> str:
    """Returns the data directory, honouring QGA_DATA_DIR."""
    path = os.environ.get("QGA_DATA_DIR") or DEFAULT_DATA_PATH
    os.makedirs(path, exist_ok=True)
    return path

def get_log_file() -> str:
    return os.path.join(get_data_dir(), "qga.log")

def get_worker_count(default: Optional[int] = None) -> int:
    """Returns the worker count, capped by QGA_THREADS."""
    count = default or os.cpu_count() or 1
    raw = os.environ.get("QGA_THREADS")
    if raw:
        try:
            count = min(count, max(1, int(raw)))
        except ValueError:
            pass
    return max(1, count)

class ExperimentPaths:
    """Locations of every file a benchmark writes."""

    def __init__(self, output_dir: str) -> None:
        self.output_dir = output_dir

    def __repr__(self) -> str:
        return f'<ExperimentPaths output_dir="{self.output_dir}">'

    @property
    def records(self) -> str:
        return os.path.join(self.output_dir, RECORDS_FILE)

    @property
    def spectral(self) -> str:
        return os.path.join(self.output_dir, SPECTRAL_FILE)

    @property
    def summary(self) -> str:
        return os.path.join(self.output_dir, SUMMARY_FILE)

    @property
    def scatter(self) -> str:
        return os.path.join(self.output_dir, SCATTER_FILE)

    @property
    def manifest(self) -> str:
        return os.path.join(self.output_dir, MANIFEST_FILE)

    @property
    def hamiltonians(self) -> str:
        return os.path.join(self.output_dir, HAMILTONIANS_DIR)

    @property
    def trials(self) -> str:
        """Tracked trial store, one subdirectory per benchmark invocation."""
        return os.path.join(self.output_dir, TRIALS_DIR)

    def hamiltonian(self, index: int) -> str:
        return os.path.join(self.hamiltonians, f"{index:04d}.ham")

    def create(self) -> None:
        os.makedirs(self.hamiltonians, exist_ok=True)
        os.makedirs(self.trials, exist_ok=True)
