"""Spectral analysis of generation channels.

Vectorization stacks columns throughout: `vec(rho) = rho.reshape(-1, order="F")`,
so a Kraus channel becomes `sum_k conj(E_k) (x) E_k`."""
from __future__ import annotations

import logging

from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs
from typing_extensions import TypeAlias, override

from qga.channels import Channel, ChannelKind
from qga.engine import best_individual_energy, qga_fidelity
from qga.errors import ConfigurationError, ConvergenceError, RegisterRangeError, SuperoperatorSizeError
from qga.hamiltonian import ProblemHamiltonian
from qga.models import Matrix, PopulationState, SpectralReport, Vector
from qga.states import RngStream

logger = logging.getLogger("qga")

DENSE_CAP = 4096
RESIDUAL_TOLERANCE = 1e-8
UNIT_CIRCLE_TOLERANCE = 1e-8
ARPACK_TOLERANCE = 1e-12
RESTART_BUDGET = 2000

Eigenpair: TypeAlias = Tuple[complex, Matrix]

def vectorize(matrix: npt.ArrayLike) -> Vector:
    return np.asarray(matrix, dtype=np.complex128).reshape(-1, order="F")

def unvectorize(vector: npt.ArrayLike, dim: int) -> Matrix:
    return np.asarray(vector, dtype=np.complex128).reshape(dim, dim, order="F")

def vectorize_apply(channel: Channel, v: npt.ArrayLike) -> Vector:
    """Applies the channel to a column-stacked operator."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    dim = channel.layout.D
    if v.size != dim * dim:
        raise RegisterRangeError(f"Vector of length {v.size} does not match a {dim}x{dim} channel")
    return vectorize(channel.apply_matrix(unvectorize(v, dim)))

def dense_superoperator(channel: Channel, cap: int = DENSE_CAP) -> Matrix:
    """Returns the D^2 x D^2 matrix of the channel, column by column."""
    _require_linear(channel)
    size = channel.layout.D ** 2
    if size > cap:
        raise SuperoperatorSizeError(size, cap)
    superoperator = np.empty((size, size), dtype=np.complex128)
    basis = np.zeros(size, dtype=np.complex128)
    for column in range(size):
        basis[column] = 1
        superoperator[:, column] = vectorize_apply(channel, basis)
        basis[column] = 0
    return superoperator

def kraus_superoperator(kraus: Sequence[npt.ArrayLike]) -> Matrix:
    """Returns sum_k conj(E_k) (x) E_k."""
    operators = [np.asarray(e, dtype=np.complex128) for e in kraus]
    return sum(np.kron(e.conj(), e) for e in operators)

def _require_linear(channel: Channel) -> None:
    if channel.stochastic:
        raise ConfigurationError(
            "Sampled mutation draws a new unitary per application and has no fixed superoperator; "
            "use mutation 'off' or 'exact'"
        )

def _order(values: npt.NDArray[np.complex128]) -> npt.NDArray[np.int64]:
    """Orders by magnitude descending, then by real and imaginary part."""
    return np.lexsort((-values.imag, -values.real, -np.abs(values)))

def _residual(channel: Channel, value: complex, vector: Vector) -> float:
    norm = np.linalg.norm(vector)
    return float(np.linalg.norm(vectorize_apply(channel, vector) - value * vector) / norm)

def _dense_eigenpairs(channel: Channel, k: int, cap: int) -> List[Eigenpair]:
    values, vectors = np.linalg.eig(dense_superoperator(channel, cap))
    order = _order(values)[:k]
    dim = channel.layout.D
    return [(complex(values[i]), unvectorize(vectors[:, i], dim)) for i in order]

def _arnoldi_eigenpairs(channel: Channel, k: int, max_restarts: int, seed: int) -> Tuple[List[Eigenpair], float]:
    dim = channel.layout.D
    size = dim * dim
    operator = LinearOperator((size, size), matvec=lambda v: vectorize_apply(channel, v), dtype=np.complex128)
    krylov = min(size, max(4 * k, 40))
    start = RngStream(seed).complex_normal(size)
    try:
        values, vectors = eigs(
            operator, k=k, which="LM", ncv=krylov, v0=start,
            tol=ARPACK_TOLERANCE, maxiter=max_restarts
        )
    except ArpackNoConvergence as e:
        residuals = [_residual(channel, complex(v), e.eigenvectors[:, i]) for i, v in enumerate(e.eigenvalues)]
        best = min(residuals) if residuals else float("inf")
        raise ConvergenceError(f"Arnoldi iteration did not converge after {max_restarts} restarts", best) from None
    order = _order(values)
    pairs = [(complex(values[i]), vectors[:, i]) for i in order]
    worst = max(_residual(channel, value, vector) for value, vector in pairs)
    return [(value, unvectorize(vector, dim)) for value, vector in pairs], worst

def top_eigenpairs(
    channel: Channel,
    k: int = 6,
    method: str = "auto",
    cap: int = DENSE_CAP,
    max_restarts: int = RESTART_BUDGET,
    seed: int = 0
) -> List[Eigenpair]:
    """Returns the `k` largest-magnitude eigenpairs (lambda, W) of the channel.

    `auto` runs the matrix-free Arnoldi iteration and falls back to dense
    diagonalization when it fails and the superoperator fits under `cap`."""
    if k < 2:
        raise ConfigurationError(f"At least two eigenpairs are needed, got k={k}")
    _require_linear(channel)
    size = channel.layout.D ** 2
    if method == "dense":
        return _dense_eigenpairs(channel, k, cap)
    if method not in ("auto", "arnoldi"):
        raise ConfigurationError(f"Unknown eigensolver method '{method}'")
    if k >= size - 1:
        if size > cap:
            raise ConfigurationError(f"Cannot compute {k} eigenpairs of a {size}-dimensional superoperator")
        return _dense_eigenpairs(channel, k, cap)

    try:
        pairs, worst = _arnoldi_eigenpairs(channel, k, max_restarts, seed)
    except ConvergenceError as e:
        if method == "auto" and size <= cap:
            logger.warning(f"{e}; falling back to dense diagonalization")
            return _dense_eigenpairs(channel, k, cap)
        raise
    if worst > RESIDUAL_TOLERANCE:
        if method == "auto" and size <= cap:
            logger.warning(f"Arnoldi residual {worst:.3e} above tolerance; falling back to dense diagonalization")
            return _dense_eigenpairs(channel, k, cap)
        raise ConvergenceError("Arnoldi eigenpairs exceed the residual tolerance", worst)
    return pairs

class FixedPoint:
    """Fixed point of a channel together with its spectral context."""

    if TYPE_CHECKING:
        matrix: Matrix
        multiplicity: int
        residual: float
        eigenvalues: List[complex]
        oscillating: bool

    def __init__(self, matrix: Matrix, multiplicity: int, residual: float, eigenvalues: List[complex], oscillating: bool) -> None:
        self.matrix = matrix
        self.multiplicity = multiplicity
        self.residual = residual
        self.eigenvalues = eigenvalues
        self.oscillating = oscillating

    @override
    def __repr__(self) -> str:
        return f'<FixedPoint m={self.multiplicity} residual={self.residual:.2e}>'

    @property
    def degenerate(self) -> bool:
        return self.multiplicity > 1

    @property
    def subradius(self) -> float:
        """Returns |lambda_{m+1}|, the largest magnitude strictly inside the unit disk."""
        if self.multiplicity >= len(self.eigenvalues):
            return 0.0
        return float(abs(self.eigenvalues[self.multiplicity]))

def fixed_point(channel: Channel, pairs: Optional[List[Eigenpair]] = None, **kwargs) -> FixedPoint:
    """Returns the trace-normalized, Hermitized eigenvector of lambda_1."""
    pairs = pairs or top_eigenpairs(channel, **kwargs)
    eigenvalues = [value for value, _ in pairs]
    on_circle = [v for v in eigenvalues if abs(v) >= 1 - UNIT_CIRCLE_TOLERANCE]
    multiplicity = len(on_circle)
    oscillating = any(abs(v - 1) > UNIT_CIRCLE_TOLERANCE for v in on_circle)

    # Inside a degenerate cluster only eigenvectors with nonzero trace can be states
    candidates = pairs[:max(multiplicity, 1)]
    w = max((vector for _, vector in candidates), key=lambda m: abs(np.trace(m)))
    w = w / np.trace(w)
    lam = (w + w.conj().T) / 2
    lam = lam / np.trace(lam).real
    residual = float(np.linalg.norm(channel.apply_matrix(lam) - lam, "nuc"))

    if multiplicity > 1:
        logger.warning(f"Degenerate fixed set: {multiplicity} eigenvalues on the unit circle")
    if oscillating:
        logger.warning("Unit-circle eigenvalues other than 1 found: oscillating fixed points")
    return FixedPoint(lam, multiplicity, residual, eigenvalues, oscillating)

def predict(channel: Channel, h: ProblemHamiltonian, fixed: Optional[FixedPoint] = None) -> Tuple[float, float]:
    """Returns (F_inf, gamma) from the fixed point and the spectral subradius."""
    fixed = fixed or fixed_point(channel)
    if fixed.degenerate:
        logger.warning("Prediction from a degenerate fixed set is flagged")
    state = PopulationState(channel.layout, fixed.matrix, validate=False)
    return qga_fidelity(state, h), fixed.subradius

def _has_mutation(channel: Channel) -> bool:
    return any(stage.kind is ChannelKind.MUTATE for stage in channel.stages) or channel.kind is ChannelKind.MUTATE

def analyze(
    channel: Channel,
    h: ProblemHamiltonian,
    variant: str,
    topk: int = 6,
    ham_index: Optional[int] = None,
    **kwargs
) -> SpectralReport:
    """Builds the full SpectralReport for a (Hamiltonian, variant) channel."""
    with_mutation = _has_mutation(channel)
    if with_mutation:
        logger.warning(f"Spectral analysis of {variant} includes mutation; predictions are usually made with mutation off")
    pairs = top_eigenpairs(channel, k=topk, **kwargs)
    fixed = fixed_point(channel, pairs)
    f_inf, gamma = predict(channel, h, fixed)
    state = PopulationState(channel.layout, fixed.matrix, validate=False)
    return SpectralReport(
        h.hash,
        variant,
        fixed.eigenvalues,
        fixed.multiplicity,
        f_inf,
        gamma,
        best_individual_energy(state, h),
        fixed.residual,
        fixed_point=fixed.matrix,
        degenerate=fixed.degenerate,
        oscillating=fixed.oscillating,
        with_mutation=with_mutation,
        ham_index=ham_index
    )

def distance_series(channel: Channel, rho: npt.ArrayLike, fixed: npt.ArrayLike, generations: int) -> List[float]:
    """Returns ||T^g(rho) - Lambda||_1 for g = 0..generations."""
    current = np.asarray(rho, dtype=np.complex128)
    target = np.asarray(fixed, dtype=np.complex128)
    distances = [float(np.linalg.norm(current - target, "nuc"))]
    for _ in range(generations):
        current = channel.apply_matrix(current)
        distances.append(float(np.linalg.norm(current - target, "nuc")))
    return distances

def geometric_ratio(distances: Sequence[float], start: int) -> float:
    """Returns the mean per-generation contraction factor from `start` onwards."""
    steps = len(distances) - 1 - start
    if steps < 1 or distances[start] <= 0:
        return 0.0
    return float((distances[-1] / distances[start]) ** (1.0 / steps))
