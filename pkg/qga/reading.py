from __future__ import annotations

import json
import os

from typing import TYPE_CHECKING, Any, Dict, Iterator, List

from qga.errors import ParsingError
from qga.models import BenchRecord, SpectralReport

class JsonLinesReader:
    """A class which reads one JSON object per line."""

    if TYPE_CHECKING:
        file_path: str

    def __init__(self, file_path: str) -> None:
        self.file_path = file_path
        try:
            self._f = open(self.file_path, "r", encoding="utf-8")
        except OSError as e:
            raise ParsingError(f"Could not open '{file_path}': {e}") from None

    def __iter__(self) -> Iterator[Dict[str, Any]]:
        for number, line in enumerate(self._f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParsingError(f"{self.file_path}:{number}: {e.msg}") from None
            if not isinstance(data, dict):
                raise ParsingError(f"{self.file_path}:{number}: expected a JSON object")
            yield data

    def close(self) -> None:
        """Closes the reader."""
        self._f.close()

class JsonLinesWriter:
    """Appends JSON objects to a file, flushing after every batch."""

    def __init__(self, file_path: str) -> None:
        self.file_path = file_path
        self._f = open(self.file_path, "a", encoding="utf-8")

    def write(self, data: Dict[str, Any]) -> None:
        _ = self._f.write(json.dumps(data) + "\n")

    def write_all(self, items: List[Dict[str, Any]]) -> None:
        for data in items:
            self.write(data)
        self._f.flush()
        os.fsync(self._f.fileno())

    def close(self) -> None:
        self._f.close()

def load_records(file_path: str) -> List[BenchRecord]:
    reader = JsonLinesReader(file_path)
    try:
        records = []
        for data in reader:
            try:
                records.append(BenchRecord.from_dict(data))
            except (KeyError, TypeError, ValueError) as e:
                raise ParsingError(f"{file_path}: malformed record ({e})") from None
        return records
    finally:
        reader.close()

def load_spectral_reports(file_path: str) -> List[SpectralReport]:
    if not os.path.exists(file_path):
        return []
    reader = JsonLinesReader(file_path)
    try:
        reports = []
        for data in reader:
            try:
                reports.append(SpectralReport.from_dict(data))
            except (KeyError, TypeError, ValueError) as e:
                raise ParsingError(f"{file_path}: malformed spectral report ({e})") from None
        return reports
    finally:
        reader.close()
