from __future__ import annotations

import logging

from typing import Sequence

import numpy as np

from scipy.optimize import least_squares

from qga.errors import ConfigurationError
from qga.models import FitResult

logger = logging.getLogger("qga")

FLAT_TOLERANCE = 1e-12
STEP_TOLERANCE = 1e-10
MAX_ITERATIONS = 200
GAMMA_CEILING = 1.0 - 1e-12
PLATEAU_GAMMA = 1.0 - 1e-6

def model(generations: np.ndarray, f_inf: float, beta: float, gamma: float) -> np.ndarray:
    return f_inf + beta * gamma ** generations

def _linear_coefficients(generations: np.ndarray, values: np.ndarray, gamma: float) -> np.ndarray:
    """Solves for (F_inf, beta) with gamma fixed."""
    design = np.column_stack([np.ones_like(generations), gamma ** generations])
    coefficients, *_ = np.linalg.lstsq(design, values, rcond=None)
    return coefficients

def fit_convergence(series: Sequence[float], burn_in: int = 4) -> FitResult:
    """Fits F(G) = F_inf + beta * gamma^G to the points G >= burn_in.

    gamma starts at the median ratio of successive differences, F_inf and beta
    from the linear problem at that gamma, then the three are refined jointly
    within F_inf in [0, 1] and gamma in [0, 1)."""
    values = np.asarray(series, dtype=np.float64)
    if values.size <= burn_in + 2:
        raise ConfigurationError(f"Series of length {values.size} is too short for burn-in {burn_in}")
    generations = np.arange(values.size, dtype=np.float64)[burn_in:]
    window = values[burn_in:]

    differences = np.diff(window)
    if np.all(np.abs(differences) < FLAT_TOLERANCE):
        return FitResult(float(window[-1]), 0.0, 0.0, 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.abs(differences[1:] / differences[:-1])
    ratios = ratios[np.isfinite(ratios)]
    gamma0 = float(np.clip(np.median(ratios), 1e-6, 1 - 1e-6)) if ratios.size else 0.5
    f_inf0, beta0 = _linear_coefficients(generations, window, gamma0)

    def residuals(params: np.ndarray) -> np.ndarray:
        return model(generations, *params) - window

    solution = least_squares(
        residuals, np.array([float(np.clip(f_inf0, 0.0, 1.0)), beta0, gamma0]), method="trf",
        bounds=([0.0, -np.inf, 0.0], [1.0, np.inf, GAMMA_CEILING]),
        xtol=STEP_TOLERANCE, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS * 4
    )
    f_inf, beta, gamma = (float(v) for v in solution.x)
    if gamma >= PLATEAU_GAMMA:
        # No decay left in the window: the constant and gamma^G columns are collinear
        logger.debug(f"Fitted gamma {gamma:.8f} at the ceiling, using the tail mean")
        f_inf, beta = float(np.mean(window)), 0.0
    rms = float(np.sqrt(np.mean(residuals(np.array([f_inf, beta, gamma])) ** 2)))
    return FitResult(f_inf, beta, gamma, rms)
