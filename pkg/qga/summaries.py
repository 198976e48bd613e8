from __future__ import annotations

import math

from collections import OrderedDict
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from typing_extensions import override

from qga.errors import EmptyStatsError
from qga.models import BenchRecord, Cloner, SpectralReport, Variant

TIE_TOLERANCE = 1e-6
Z_95 = 1.96

class HamiltonianAverage:
    """Fit parameters of one (Hamiltonian, variant) averaged over initial states."""

    def __init__(self, ham_index: int, ham_hash: str, variant: str, f_inf: float, beta: float, gamma: float, count: int) -> None:
        self.ham_index = ham_index
        self.ham_hash = ham_hash
        self.variant = variant
        self.f_inf = f_inf
        self.beta = beta
        self.gamma = gamma
        self.count = count

    @override
    def __repr__(self) -> str:
        return f'<HamiltonianAverage ham={self.ham_index} variant="{self.variant}" F_inf={self.f_inf:.4f} gamma={self.gamma:.4f}>'

def hamiltonian_averages(records: Sequence[BenchRecord]) -> List[HamiltonianAverage]:
    """Averages fitted parameters over initial states per (Hamiltonian, variant).

    Failed records are left out."""
    groups: Dict[Tuple[int, str], List[BenchRecord]] = OrderedDict()
    for record in records:
        if not record.ok:
            continue
        groups.setdefault((record.ham_index, record.variant), []).append(record)
    averages: List[HamiltonianAverage] = []
    for (ham_index, variant), members in sorted(groups.items()):
        fits = [m.fit for m in members if m.fit is not None]
        averages.append(HamiltonianAverage(
            ham_index,
            members[0].ham_hash,
            variant,
            float(np.mean([f.f_inf for f in fits])),
            float(np.mean([f.beta for f in fits])),
            float(np.mean([f.gamma for f in fits])),
            len(fits)
        ))
    return averages

def _std(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0

class VariantStats:

    def __init__(self, variant: str, averages: Sequence[HamiltonianAverage]) -> None:
        f_inf = [a.f_inf for a in averages]
        gamma = [a.gamma for a in averages]
        self.variant = variant
        self.count = len(averages)
        self.f_inf_mean = float(np.mean(f_inf))
        self.f_inf_std = _std(f_inf)
        self.gamma_mean = float(np.mean(gamma))
        self.gamma_std = _std(gamma)
        self.gamma_min = float(np.min(gamma))
        self.gamma_max = float(np.max(gamma))

    @override
    def __repr__(self) -> str:
        return f'<VariantStats variant="{self.variant}" F_inf={self.f_inf_mean:.3f}±{self.f_inf_std:.3f}>'

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hamiltonians": self.count,
            "F_inf_mean": self.f_inf_mean,
            "F_inf_std": self.f_inf_std,
            "gamma_mean": self.gamma_mean,
            "gamma_std": self.gamma_std,
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max
        }

class WinRate:
    """How often `first` converges strictly faster (lower gamma) than `second`.

    Rates and interval bounds are in percentage points."""

    if TYPE_CHECKING:
        first: str
        second: str
        wins: int
        total: int
        ties: int

    def __init__(self, first: str, second: str, wins: int, total: int, ties: int) -> None:
        self.first = first
        self.second = second
        self.wins = wins
        self.total = total
        self.ties = ties

    @override
    def __repr__(self) -> str:
        return f'<WinRate "{self.first}" < "{self.second}" {self.rate:.1f}% of {self.total}>'

    @property
    def proportion(self) -> float:
        return self.wins / self.total if self.total else 0.0

    @property
    def rate(self) -> float:
        return 100.0 * self.proportion

    @property
    def half_width(self) -> float:
        p = self.proportion
        if self.total == 0:
            return 0.0
        return 100.0 * Z_95 * math.sqrt(p * (1 - p) / self.total)

    @property
    def interval(self) -> Tuple[float, float]:
        """Returns the 95% interval; one-sided when every comparison agrees."""
        if self.total == 0:
            return 0.0, 100.0
        if self.wins == 0:
            return 0.0, 100.0 * (1 - 0.05 ** (1 / self.total))
        if self.wins == self.total:
            return 100.0 * 0.05 ** (1 / self.total), 100.0
        return max(0.0, self.rate - self.half_width), min(100.0, self.rate + self.half_width)

    def to_dict(self) -> Dict[str, Any]:
        low, high = self.interval
        return {
            "first": self.first,
            "second": self.second,
            "wins": self.wins,
            "total": self.total,
            "ties": self.ties,
            "rate": self.rate,
            "ci_half_width": self.half_width,
            "ci_low": low,
            "ci_high": high
        }

def win_rate(averages: Sequence[HamiltonianAverage], first: str, second: str, tie_tolerance: float = TIE_TOLERANCE) -> WinRate:
    by_key = {(a.ham_index, a.variant): a for a in averages}
    wins = total = ties = 0
    for (ham_index, variant), average in sorted(by_key.items()):
        if variant != first or (ham_index, second) not in by_key:
            continue
        other = by_key[(ham_index, second)]
        if abs(average.gamma - other.gamma) < tie_tolerance:
            ties += 1
            continue
        total += 1
        if average.gamma < other.gamma:
            wins += 1
    return WinRate(first, second, wins, total, ties)

def r_squared(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Returns the squared sample correlation coefficient, or None when undefined."""
    if len(x) < 2 or np.std(x) == 0 or np.std(y) == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1] ** 2)

class ScatterRow:

    def __init__(self, ham_hash: str, variant: str, f_inf_sim: float, f_inf_pred: float, gamma_sim: float, gamma_pred: float) -> None:
        self.ham_hash = ham_hash
        self.variant = variant
        self.f_inf_sim = f_inf_sim
        self.f_inf_pred = f_inf_pred
        self.gamma_sim = gamma_sim
        self.gamma_pred = gamma_pred

    @override
    def __repr__(self) -> str:
        return f'<ScatterRow variant="{self.variant}" ham="{self.ham_hash[:12]}">'

def scatter_rows(averages: Sequence[HamiltonianAverage], reports: Sequence[SpectralReport]) -> List[ScatterRow]:
    """Joins simulation fits with spectral predictions on (Hamiltonian, variant)."""
    predictions = {(r.ham_hash, r.variant): r for r in reports}
    rows: List[ScatterRow] = []
    for average in averages:
        report = predictions.get((average.ham_hash, average.variant))
        if report is None:
            continue
        rows.append(ScatterRow(average.ham_hash, average.variant, average.f_inf, report.f_inf, average.gamma, report.gamma))
    return rows

def agreement(rows: Sequence[ScatterRow]) -> Dict[str, Dict[str, Any]]:
    """Returns R^2 of fitted against predicted F_inf and gamma per variant."""
    variants: Dict[str, List[ScatterRow]] = OrderedDict()
    for row in rows:
        variants.setdefault(row.variant, []).append(row)
    return {
        variant: {
            "count": len(members),
            "r2_F_inf": r_squared([m.f_inf_sim for m in members], [m.f_inf_pred for m in members]),
            "r2_gamma": r_squared([m.gamma_sim for m in members], [m.gamma_pred for m in members])
        } for variant, members in variants.items()
    }

class AggregateStats:

    def __init__(
        self,
        variants: Dict[str, VariantStats],
        win_rates: List[WinRate],
        agreement: Dict[str, Dict[str, Any]],
        failed: int
    ) -> None:
        self.variants = variants
        self.win_rates = win_rates
        self.agreement = agreement
        self.failed = failed

    @override
    def __repr__(self) -> str:
        return f'<AggregateStats variants={list(self.variants)} failed={self.failed}>'

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variants": {name: stats.to_dict() for name, stats in self.variants.items()},
            "win_rates": [w.to_dict() for w in self.win_rates],
            "agreement": self.agreement,
            "failed_records": self.failed,
            "metadata": {
                "win_rate_units": "percentage points",
                "ci": "normal approximation, one-sided exact bound when all comparisons agree",
                "tie_tolerance": TIE_TOLERANCE,
                "averaging": "fit per initial state, then mean over initial states per Hamiltonian"
            }
        }

def aggregate(records: Sequence[BenchRecord], reports: Optional[Sequence[SpectralReport]] = None) -> AggregateStats:
    if not records:
        raise EmptyStatsError
    averages = hamiltonian_averages(records)
    variants: Dict[str, VariantStats] = OrderedDict()
    for name in sorted({a.variant for a in averages}):
        variants[name] = VariantStats(name, [a for a in averages if a.variant == name])

    win_rates: List[WinRate] = []
    for name in variants:
        variant = Variant.parse(name)
        if variant.cloner is not Cloner.BCQO:
            continue
        rival = f"{Cloner.UQCM.value}/{variant.mutation.value}"
        if rival in variants:
            win_rates.append(win_rate(averages, name, rival))

    rows = scatter_rows(averages, reports or [])
    failed = sum(1 for r in records if not r.ok)
    return AggregateStats(variants, win_rates, agreement(rows), failed)
