"""Dense linear algebra for register populations.

Index convention: for a product space A (x) B the basis index is
`index(k_a, k_b) = k_a * dim(B) + k_b`, i.e. numpy's `kron` ordering, so the first
factor is the most significant block."""
from __future__ import annotations

import functools
import math

from typing import TYPE_CHECKING, Iterable, List, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from typing_extensions import override

from qga.errors import ContractViolationError, RegisterRangeError
from qga.models import Matrix, PopulationLayout, PopulationState, PureState

UNITARITY_TOLERANCE = 1e-10
COMPLETENESS_TOLERANCE = 1e-9

class RngStream:
    """Reproducible, splittable random stream.

    Streams are addressed by `(seed, key)`; `child(*key)` derives an independent
    stream without consuming draws from the parent, so work can be sharded across
    processes and still replay identically."""

    if TYPE_CHECKING:
        seed: int
        key: Tuple[int, ...]

    def __init__(self, seed: int, key: Sequence[int] = ()) -> None:
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        # Philox is counter-based, each stream owns its own counter
        self.generator = np.random.Generator(np.random.Philox(sequence))

    @override
    def __repr__(self) -> str:
        return f'<RngStream seed={self.seed} key={self.key}>'

    def child(self, *key: int) -> RngStream:
        return RngStream(self.seed, self.key + tuple(key))

    def complex_normal(self, shape: Union[int, Tuple[int, ...]]) -> npt.NDArray[np.complex128]:
        """Returns standard complex Gaussian samples (unit variance)."""
        real = self.generator.standard_normal(shape)
        imag = self.generator.standard_normal(shape)
        return (real + 1j * imag) / math.sqrt(2)

def tensor(a: npt.ArrayLike, b: npt.ArrayLike) -> Matrix:
    """Returns the Kronecker product `a (x) b`; `a` is the most significant factor."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))

def tensor_power(a: npt.ArrayLike, count: int) -> Matrix:
    if count < 1:
        return np.ones((1, 1), dtype=np.complex128)
    return functools.reduce(tensor, [a] * count)

def tensor_all(factors: Iterable[npt.ArrayLike]) -> Matrix:
    return functools.reduce(tensor, factors)

def trace_out(matrix: npt.ArrayLike, dims: Sequence[int], keep: Iterable[int]) -> Matrix:
    """Traces out every subsystem not in `keep` (0-based) of an operator on `prod(dims)`."""
    dims = list(dims)
    kept = sorted(set(keep))
    count = len(dims)
    tensor_form = np.asarray(matrix).reshape(dims + dims)
    for index in reversed(range(count)):
        if index in kept:
            continue
        tensor_form = np.trace(tensor_form, axis1=index, axis2=index + count)
        count -= 1
    size = int(np.prod([dims[i] for i in kept])) if kept else 1
    return tensor_form.reshape(size, size)

def trace_and_replace(tensor_form: np.ndarray, axis: int, count: int) -> np.ndarray:
    """Replaces subsystem `axis` of an operator in tensor form by the identity
    after tracing it out, i.e. `X -> tr_axis(X) (x) I` with the identity put back
    in place. `count` is the number of subsystems."""
    dim = tensor_form.shape[axis]
    reduced = np.trace(tensor_form, axis1=axis, axis2=axis + count)
    padded = np.multiply.outer(reduced, np.eye(dim))
    return np.moveaxis(padded, [-2, -1], [axis, axis + count])

def partial_trace(state: PopulationState, keep: Iterable[int]) -> Matrix:
    """Returns the reduced density matrix on the registers in `keep` (1-based)."""
    layout = state.layout
    registers = sorted(set(keep))
    if not registers:
        raise RegisterRangeError("At least one register must be kept")
    for register in registers:
        if not 1 <= register <= layout.n:
            raise RegisterRangeError(f"Register {register} outside 1..{layout.n}")
    return trace_out(state.matrix, [layout.d] * layout.n, [r - 1 for r in registers])

def is_unitary(u: npt.ArrayLike, tolerance: float = UNITARITY_TOLERANCE) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), rtol=0, atol=tolerance))

def apply_unitary(state: PopulationState, u: npt.ArrayLike) -> PopulationState:
    """Returns `u rho u^dagger`."""
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != state.matrix.shape:
        raise RegisterRangeError(f"Unitary of shape {u.shape} does not act on {state.layout}")
    if not is_unitary(u):
        raise ContractViolationError("Operator passed to apply_unitary is not unitary")
    return PopulationState(state.layout, u @ state.matrix @ u.conj().T, validate=False)

def kraus_completeness(kraus: Sequence[npt.ArrayLike]) -> float:
    """Returns the deviation of `sum E^dagger E` from the identity (max abs entry)."""
    operators = [np.asarray(e, dtype=np.complex128) for e in kraus]
    total = sum(e.conj().T @ e for e in operators)
    return float(np.max(np.abs(total - np.eye(operators[0].shape[1]))))

def apply_kraus(state: PopulationState, kraus: Sequence[npt.ArrayLike]) -> PopulationState:
    """Returns `sum_k E_k rho E_k^dagger`."""
    if len(kraus) == 0:
        raise ContractViolationError("Kraus set is empty")
    drift = kraus_completeness(kraus)
    if drift > COMPLETENESS_TOLERANCE:
        raise ContractViolationError(f"Kraus operators are not complete (drift {drift:.3e})")
    rho = state.matrix
    result = np.zeros_like(rho)
    for e in kraus:
        e = np.asarray(e, dtype=np.complex128)
        result += e @ rho @ e.conj().T
    return PopulationState(state.layout, result, validate=False)

def fidelity_pure(rho: npt.ArrayLike, psi: PureState) -> float:
    """Returns `<psi|rho|psi>`."""
    rho = np.asarray(rho)
    if rho.shape != (psi.dim, psi.dim):
        raise RegisterRangeError(f"State of dimension {psi.dim} does not match matrix {rho.shape}")
    return float(np.vdot(psi.vector, rho @ psi.vector).real)

def haar_unitary(dim: int, rng: RngStream) -> Matrix:
    """Samples a Haar-distributed unitary by QR of a Ginibre matrix."""
    if dim < 1:
        raise ContractViolationError(f"Dimension must be positive, got {dim}")
    ginibre = rng.complex_normal((dim, dim))
    q, r = np.linalg.qr(ginibre)
    # Fix the phases of R's diagonal so the distribution is exactly Haar
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases

def haar_pure_state(dim: int, rng: RngStream) -> PureState:
    """Samples a Haar-random pure state as a normalized complex Gaussian vector."""
    if dim < 1:
        raise ContractViolationError(f"Dimension must be positive, got {dim}")
    vector = rng.complex_normal(dim)
    return PureState(vector / np.linalg.norm(vector))

def product_state(states: List[PureState]) -> PureState:
    return PureState(tensor_all([s.vector for s in states]).ravel())

def population_from_pure(layout: PopulationLayout, psi: PureState) -> PopulationState:
    if psi.dim != layout.D:
        raise RegisterRangeError(f"State of dimension {psi.dim} does not fit {layout}")
    return PopulationState(layout, psi.density(), validate=False)
