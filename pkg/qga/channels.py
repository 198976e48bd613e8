"""QGA subroutines as quantum channels.

Every channel acts on density matrices stored in the computational basis. The
generation channel applies reset, cloning, crossover swap, mutation and sorting in
that order; one application is one generation of an already sorted population."""
from __future__ import annotations

import enum
import itertools
import logging

from typing import TYPE_CHECKING, Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from typing_extensions import override

from qga.errors import ConfigurationError, ContractViolationError, RegisterRangeError
from qga.hamiltonian import Ordering, ProblemHamiltonian
from qga.models import (
    Cloner, Matrix, MutationMode, PopulationLayout,
    PopulationState, Variant
)
from qga.states import (
    COMPLETENESS_TOLERANCE, RngStream, kraus_completeness,
    tensor_all, tensor_power, trace_and_replace
)

logger = logging.getLogger("qga")

IDENTITY = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
MUTATION_GATES = (IDENTITY, PAULI_X, PAULI_Y, PAULI_Z)

class ChannelKind(str, enum.Enum):
    SORT = "sort"
    RESET = "reset"
    CLONE = "clone"
    SWAP = "swap"
    MUTATE = "mutate"
    KRAUS = "kraus"
    COMPOSITE = "composite"

class Channel:
    """A CPTP map on the population of `layout`.

    `action` maps a D x D matrix to a D x D matrix and must be linear, so the same
    channel can act on density matrices and on arbitrary (vectorized) operators."""

    if TYPE_CHECKING:
        layout: PopulationLayout
        kind: ChannelKind
        name: str
        stages: List[Channel]
        stochastic: bool

    def __init__(
        self,
        layout: PopulationLayout,
        kind: ChannelKind,
        action: Callable[[Matrix], Matrix],
        name: Optional[str] = None,
        stages: Optional[List[Channel]] = None,
        stochastic: bool = False
    ) -> None:
        self.layout = layout
        self.kind = kind
        self.name = name or kind.value
        self.stages = stages or []
        self.stochastic = stochastic or any(s.stochastic for s in self.stages)
        self._action = action

    @override
    def __repr__(self) -> str:
        if self.stages:
            return f'<Channel kind="{self.kind.value}" stages={[s.name for s in self.stages]}>'
        return f'<Channel kind="{self.kind.value}" name="{self.name}">'

    def apply(self, state: PopulationState) -> PopulationState:
        if state.layout != self.layout:
            raise RegisterRangeError(f"Channel for {self.layout} cannot act on {state.layout}")
        return PopulationState(self.layout, self.apply_matrix(state.matrix), validate=False)

    def apply_matrix(self, matrix: npt.ArrayLike) -> Matrix:
        """Applies the channel to any D x D operator."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (self.layout.D, self.layout.D):
            raise RegisterRangeError(f"Expected a {self.layout.D}x{self.layout.D} operator, got {matrix.shape}")
        return self._action(matrix)

    def then(self, other: Channel) -> Channel:
        """Returns the channel applying `self` first and `other` afterwards."""
        return compose(self.layout, [self, other])

def compose(layout: PopulationLayout, stages: Sequence[Channel], name: str = "composite") -> Channel:
    stages = list(stages)
    for stage in stages:
        if stage.layout != layout:
            raise ConfigurationError(f"Stage {stage.name} is built for {stage.layout}, not {layout}")

    def action(matrix: Matrix) -> Matrix:
        for stage in stages:
            matrix = stage._action(matrix)
        return matrix

    return Channel(layout, ChannelKind.COMPOSITE, action, name, stages)

def kraus_channel(layout: PopulationLayout, kraus: Sequence[npt.ArrayLike], name: str = "kraus") -> Channel:
    """Wraps an explicit Kraus set as a channel."""
    operators = [np.asarray(e, dtype=np.complex128) for e in kraus]
    if not operators or any(e.shape != (layout.D, layout.D) for e in operators):
        raise ContractViolationError(f"Kraus operators must be {layout.D}x{layout.D}")
    drift = kraus_completeness(operators)
    if drift > COMPLETENESS_TOLERANCE:
        raise ContractViolationError(f"Kraus operators are not complete (drift {drift:.3e})")
    daggers = [e.conj().T for e in operators]

    def action(matrix: Matrix) -> Matrix:
        return sum(e @ matrix @ e_dag for e, e_dag in zip(operators, daggers))

    return Channel(layout, ChannelKind.KRAUS, action, name)

def permutation_matrix(perm: npt.ArrayLike) -> Matrix:
    """Returns the unitary mapping |x> to |perm[x]>."""
    perm = np.asarray(perm)
    matrix = np.zeros((perm.size, perm.size), dtype=np.complex128)
    matrix[perm, np.arange(perm.size)] = 1
    return matrix

def _permutation_channel(layout: PopulationLayout, perm: np.ndarray, kind: ChannelKind, name: str) -> Channel:
    inverse = np.argsort(perm)
    index = np.ix_(inverse, inverse)

    def action(matrix: Matrix) -> Matrix:
        return matrix[index]

    return Channel(layout, kind, action, name)

def embed_operator(op: npt.ArrayLike, dims: Sequence[int], targets: Sequence[int]) -> Matrix:
    """Lifts `op`, acting on the subsystems `targets` (0-based, in that order), to
    the full space of `dims`."""
    dims = list(dims)
    targets = list(targets)
    rest = [i for i in range(len(dims)) if i not in targets]
    rest_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(np.asarray(op, dtype=np.complex128), np.eye(rest_dim))
    order = targets + rest
    shape = [dims[i] for i in order]
    inverse = list(np.argsort(order))
    count = len(dims)
    tensor_form = full.reshape(shape + shape).transpose(inverse + [count + i for i in inverse])
    size = int(np.prod(dims))
    return tensor_form.reshape(size, size)

# Sorting

def bubble_sort_schedule(n: int) -> List[Tuple[int, int]]:
    """Returns the comparator pairs (0-based) of the n-layer Bubble Sort network.

    Odd layers compare (1,2),(3,4),...; even layers compare (2,3),(4,5),..."""
    schedule: List[Tuple[int, int]] = []
    for layer in range(n):
        start = 0 if layer % 2 == 0 else 1
        schedule.extend((i, i + 1) for i in range(start, n - 1, 2))
    return schedule

class SortTable:
    """Classical trace of the sorting network for every population index sequence.

    Row `x` describes the basis state with flat index `x`; sequences use 1-based
    eigen indices."""

    if TYPE_CHECKING:
        layout: PopulationLayout
        sequences: npt.NDArray[np.int64]
        sorted_sequences: npt.NDArray[np.int64]
        instructions: npt.NDArray[np.uint8]
        sorted_index: npt.NDArray[np.int64]
        instruction_code: npt.NDArray[np.int64]

    def __init__(
        self,
        layout: PopulationLayout,
        sequences: npt.NDArray[np.int64],
        sorted_sequences: npt.NDArray[np.int64],
        instructions: npt.NDArray[np.uint8]
    ) -> None:
        self.layout = layout
        self.sequences = sequences
        self.sorted_sequences = sorted_sequences
        self.instructions = instructions
        shape = (layout.d,) * layout.n
        self.sorted_index = np.ravel_multi_index(tuple((sorted_sequences - 1).T), shape).astype(np.int64)
        weights = 1 << np.arange(instructions.shape[1] - 1, -1, -1, dtype=np.int64)
        self.instruction_code = (instructions.astype(np.int64) * weights).sum(axis=1)

    @override
    def __repr__(self) -> str:
        return f'<SortTable layout={self.layout} groups={self.group_count}>'

    @property
    def comparisons(self) -> int:
        return int(self.instructions.shape[1])

    @property
    def group_count(self) -> int:
        """Returns how many distinct instruction bitstrings occur."""
        return int(np.unique(self.instruction_code).size)

    def flat_index(self, k: Sequence[int]) -> int:
        if len(k) != self.layout.n or any(not 1 <= v <= self.layout.d for v in k):
            raise RegisterRangeError(f"Index sequence {tuple(k)} does not fit {self.layout}")
        return int(np.ravel_multi_index(tuple(v - 1 for v in k), (self.layout.d,) * self.layout.n))

    def sorted_of(self, k: Sequence[int]) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.sorted_sequences[self.flat_index(k)])

    def instruction_of(self, k: Sequence[int]) -> str:
        return "".join(str(int(b)) for b in self.instructions[self.flat_index(k)])

def build_sort_table(layout: PopulationLayout, h: ProblemHamiltonian) -> SortTable:
    """Runs the Bubble Sort network classically on every index sequence.

    A comparator swaps, and emits instruction bit 1, iff eps_left > eps_right, so
    equal elements never swap and sorted input yields an all-zero bitstring."""
    if h.d != layout.d:
        raise ConfigurationError(f"Hamiltonian with c={h.c} does not fit {layout}")
    schedule = bubble_sort_schedule(layout.n)
    sequences = np.array(list(itertools.product(range(1, layout.d + 1), repeat=layout.n)), dtype=np.int64)
    sorted_sequences = sequences.copy()
    instructions = np.zeros((sequences.shape[0], len(schedule)), dtype=np.uint8)
    for row, sequence in enumerate(sorted_sequences):
        for step, (i, j) in enumerate(schedule):
            if h.index_energy_order(int(sequence[i]), int(sequence[j])) is Ordering.GREATER:
                sequence[i], sequence[j] = sequence[j], sequence[i]
                instructions[row, step] = 1
    return SortTable(layout, sequences, sorted_sequences, instructions)

def sorting_channel(layout: PopulationLayout, h: ProblemHamiltonian, table: Optional[SortTable] = None) -> Channel:
    """Sorting subroutine: rotate to the problem basis, move each block onto its
    sorted sequence keeping coherence only between equal instruction bitstrings,
    rotate back."""
    table = table or build_sort_table(layout, h)
    basis = tensor_power(h.basis_unitary, layout.n)
    basis_dag = basis.conj().T
    same_instructions = table.instruction_code[:, None] == table.instruction_code[None, :]
    sorter = np.zeros((layout.D, layout.D))
    sorter[table.sorted_index, np.arange(layout.D)] = 1.0

    def action(matrix: Matrix) -> Matrix:
        problem_frame = basis_dag @ matrix @ basis
        problem_frame = np.where(same_instructions, problem_frame, 0)
        problem_frame = sorter @ problem_frame @ sorter.T
        return basis @ problem_frame @ basis_dag

    logger.debug(f"Built sorting channel for {layout} with {table.group_count} instruction groups")
    return Channel(layout, ChannelKind.SORT, action, "sort")

def sorting_kraus(layout: PopulationLayout, h: ProblemHamiltonian, table: Optional[SortTable] = None) -> List[Matrix]:
    """Enumerates the sorting Kraus operators A_kappa, one per occurring bitstring."""
    table = table or build_sort_table(layout, h)
    basis = tensor_power(h.basis_unitary, layout.n)
    operators: List[Matrix] = []
    for code in np.unique(table.instruction_code):
        columns = np.flatnonzero(table.instruction_code == code)
        a = np.zeros((layout.D, layout.D), dtype=np.complex128)
        a[table.sorted_index[columns], columns] = 1
        operators.append(basis @ a @ basis.conj().T)
    return operators

# Reset

def reference_state(layout: PopulationLayout, cloner: Cloner) -> Matrix:
    """Returns rho_0: |0...0><0...0| for BCQO, I/d for UQCM."""
    if Cloner(cloner) is Cloner.BCQO:
        rho0 = np.zeros((layout.d, layout.d), dtype=np.complex128)
        rho0[0, 0] = 1
        return rho0
    return np.eye(layout.d, dtype=np.complex128) / layout.d

def _check_reference(layout: PopulationLayout, rho0: npt.ArrayLike) -> Matrix:
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (layout.d, layout.d):
        raise ContractViolationError(f"Reference state must be {layout.d}x{layout.d}")
    # Reuses the population checks on a single register
    PopulationState(PopulationLayout(1, layout.c), rho0)
    return rho0

def reset_channel(layout: PopulationLayout, rho0: npt.ArrayLike) -> Channel:
    """rho -> tr_low(rho) (x) rho_0^(n/2)."""
    layout.require_qga()
    rho0 = _check_reference(layout, rho0)
    half = layout.d ** (layout.n // 2)
    lower_reference = tensor_power(rho0, layout.n // 2)

    def action(matrix: Matrix) -> Matrix:
        upper = np.einsum("ajbj->ab", matrix.reshape(half, half, half, half))
        return np.kron(upper, lower_reference)

    return Channel(layout, ChannelKind.RESET, action, "reset")

def reset_kraus(layout: PopulationLayout, rho0: npt.ArrayLike) -> List[Matrix]:
    """Enumerates the reset Kraus operators B_{j,r}."""
    layout.require_qga()
    rho0 = _check_reference(layout, rho0)
    half = layout.d ** (layout.n // 2)
    weights, vectors = np.linalg.eigh(tensor_power(rho0, layout.n // 2))
    identity = np.eye(half)
    operators: List[Matrix] = []
    for weight, vector in zip(weights, vectors.T):
        if weight <= COMPLETENESS_TOLERANCE:
            continue
        for j in range(half):
            ket_bra = np.outer(vector, identity[j])
            operators.append(np.sqrt(weight) * np.kron(identity, ket_bra))
    return operators

# Cloning

def _register_digits(layout: PopulationLayout) -> npt.NDArray[np.int64]:
    """Returns an (n, D) array with the register values of every basis index."""
    return np.array(np.unravel_index(np.arange(layout.D), (layout.d,) * layout.n), dtype=np.int64)

def bcqo_permutation(layout: PopulationLayout) -> npt.NDArray[np.int64]:
    """Basis permutation |j>_i|k>_{i+n/2} -> |j>_i|k xor j>_{i+n/2} on every pair."""
    layout.require_qga()
    digits = _register_digits(layout)
    cloned = digits.copy()
    half = layout.n // 2
    for i in range(half):
        cloned[half + i] ^= digits[i]
    return np.ravel_multi_index(tuple(cloned), (layout.d,) * layout.n).astype(np.int64)

def bcqo_clone_channel(layout: PopulationLayout) -> Channel:
    """Biomimetic cloning of the computational-basis observable: a transversal
    CNOT ladder from each upper register into its zeroed lower partner."""
    return _permutation_channel(layout, bcqo_permutation(layout), ChannelKind.CLONE, "bcqo")

def swap_operator(d: int) -> Matrix:
    """Returns S with S|a>|b> = |b>|a> on C^d (x) C^d."""
    swap = np.zeros((d * d, d * d), dtype=np.complex128)
    for a in range(d):
        for b in range(d):
            swap[b * d + a, a * d + b] = 1
    return swap

def symmetric_projector(d: int) -> Matrix:
    return (np.eye(d * d) + swap_operator(d)) / 2

def uqcm_clone_channel(layout: PopulationLayout) -> Channel:
    """Universal symmetric cloner on every pair (i, i + n/2):
    rho -> 2d/(d+1) S+ (tr_B rho (x) I/d) S+."""
    layout.require_qga()
    n = layout.n
    d = layout.d
    shape = [d] * (2 * n)
    # 2d/(d+1) * (1/d) * (1/2)^2 from the normalization and the two projectors
    scale = 2.0 / (d + 1) / 4.0

    def action(matrix: Matrix) -> Matrix:
        t = matrix.reshape(shape)
        for i in range(n // 2):
            a, b = i, n // 2 + i
            x = trace_and_replace(t, b, n)
            rows = np.swapaxes(x, a, b)
            t = scale * (x + rows + np.swapaxes(x, n + a, n + b) + np.swapaxes(rows, n + a, n + b))
        return t.reshape(layout.D, layout.D)

    return Channel(layout, ChannelKind.CLONE, action, "uqcm")

def uqcm_pair_kraus(c: int) -> List[Matrix]:
    """Kraus operators c_{r,k} = sqrt(2/(d+1)) S+ (I (x) |r><k|) of a single pair."""
    d = 2 ** c
    projector = symmetric_projector(d)
    identity = np.eye(d)
    factor = np.sqrt(2.0 / (d + 1))
    return [
        factor * projector @ np.kron(identity, np.outer(identity[r], identity[k]))
        for r in range(d) for k in range(d)
    ]

def uqcm_kraus(layout: PopulationLayout) -> List[Matrix]:
    """Population-level UQCM Kraus operators, products over all pairs."""
    layout.require_qga()
    dims = [layout.d] * layout.n
    half = layout.n // 2
    pair_ops = uqcm_pair_kraus(layout.c)
    embedded = [[embed_operator(op, dims, [i, half + i]) for op in pair_ops] for i in range(half)]
    operators: List[Matrix] = []
    for combination in itertools.product(*embedded):
        product = np.eye(layout.D, dtype=np.complex128)
        for op in combination:
            product = op @ product
        operators.append(product)
    return operators

# Crossover

def crossover_permutation(layout: PopulationLayout) -> npt.NDArray[np.int64]:
    """Basis permutation swapping the last c/2 qubits of lower registers
    n/2+2i+1 and n/2+2i+2 for i = 0..n/4-1."""
    layout.require_qga()
    c = layout.c
    total = layout.num_qubits
    positions = list(range(total))
    for i in range(layout.n // 4):
        left = layout.n // 2 + 2 * i
        right = left + 1
        for q in range(c - c // 2, c):
            a, b = left * c + q, right * c + q
            positions[a], positions[b] = positions[b], positions[a]
    index = np.arange(layout.D, dtype=np.int64)
    bits = (index[:, None] >> (total - 1 - np.arange(total))) & 1
    swapped = bits[:, positions]
    return (swapped << (total - 1 - np.arange(total))).sum(axis=1)

def crossover_unitary(layout: PopulationLayout) -> Matrix:
    return permutation_matrix(crossover_permutation(layout))

def crossover_swap(layout: PopulationLayout) -> Channel:
    return _permutation_channel(layout, crossover_permutation(layout), ChannelKind.SWAP, "crossover")

# Mutation

def _check_probability(p_m: float) -> None:
    if not 0.0 <= p_m <= 1.0:
        raise ConfigurationError(f"Mutation probability must lie in [0, 1], got {p_m}")

def mutation_channel_exact(layout: PopulationLayout, p_m: float) -> Channel:
    """rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z) on every qubit.

    Uses X.X + Y.Y + Z.Z = 2 tr_q(.) (x) I - (.) on each qubit."""
    _check_probability(p_m)
    qubits = layout.num_qubits
    shape = [2] * (2 * qubits)
    keep = 1 - 4 * p_m / 3
    spread = 2 * p_m / 3

    def action(matrix: Matrix) -> Matrix:
        if p_m == 0:
            return matrix.copy()
        t = matrix.reshape(shape)
        for q in range(qubits):
            t = keep * t + spread * trace_and_replace(t, q, qubits)
        return t.reshape(layout.D, layout.D)

    return Channel(layout, ChannelKind.MUTATE, action, "mutation-exact")

def mutation_probabilities(p_m: float) -> npt.NDArray[np.float64]:
    """Returns the per-qubit probabilities of (I, X, Y, Z)."""
    _check_probability(p_m)
    return np.array([1 - p_m, p_m / 3, p_m / 3, p_m / 3])

def sample_mutation_pattern(layout: PopulationLayout, p_m: float, rng: RngStream) -> npt.NDArray[np.int64]:
    """Draws one gate index per qubit: 0 = I, 1 = X, 2 = Y, 3 = Z."""
    return rng.generator.choice(4, size=layout.num_qubits, p=mutation_probabilities(p_m))

def sample_mutation_unitary(layout: PopulationLayout, p_m: float, rng: RngStream) -> Matrix:
    pattern = sample_mutation_pattern(layout, p_m, rng)
    return tensor_all([MUTATION_GATES[g] for g in pattern])

def sampled_mutation_channel(layout: PopulationLayout, p_m: float, rng: RngStream) -> Channel:
    """Mutation as a freshly drawn Pauli pattern on every application."""
    _check_probability(p_m)

    def action(matrix: Matrix) -> Matrix:
        u = sample_mutation_unitary(layout, p_m, rng)
        return u @ matrix @ u.conj().T

    return Channel(layout, ChannelKind.MUTATE, action, "mutation-sampled", stochastic=True)

def mutation_kraus(layout: PopulationLayout, p_m: float) -> Iterator[Matrix]:
    """Yields the mutation Kraus operators D_mu for every Pauli pattern."""
    probabilities = mutation_probabilities(p_m)
    for pattern in itertools.product(range(4), repeat=layout.num_qubits):
        weight = float(np.prod(probabilities[list(pattern)]))
        if weight == 0:
            continue
        yield np.sqrt(weight) * tensor_all([MUTATION_GATES[g] for g in pattern])

# Composition

def clone_channel(layout: PopulationLayout, cloner: Cloner) -> Channel:
    if Cloner(cloner) is Cloner.BCQO:
        return bcqo_clone_channel(layout)
    return uqcm_clone_channel(layout)

def mutation_stage(layout: PopulationLayout, variant: Variant, rng: Optional[RngStream] = None) -> Optional[Channel]:
    if not variant.mutates:
        return None
    if variant.mutation is MutationMode.EXACT:
        return mutation_channel_exact(layout, variant.p_m)
    if rng is None:
        raise ConfigurationError("Sampled mutation needs an RngStream")
    return sampled_mutation_channel(layout, variant.p_m, rng)

def generation_channel(
    layout: PopulationLayout,
    h: ProblemHamiltonian,
    variant: Variant,
    rng: Optional[RngStream] = None,
    reference: Optional[npt.ArrayLike] = None,
    sorting: Optional[Channel] = None
) -> Channel:
    """Returns T = T_S T_M U_swap T_C T_R for the given variant."""
    layout.require_qga()
    expected = reference_state(layout, variant.cloner)
    if reference is not None:
        reference = np.asarray(reference, dtype=np.complex128)
        if reference.shape != expected.shape or not np.allclose(reference, expected, atol=1e-12):
            raise ConfigurationError(f"Reference state does not match the {variant.cloner.value} cloner")
    if sorting is not None and sorting.kind is not ChannelKind.SORT:
        raise ConfigurationError("The sorting stage must be a sorting channel")
    stages = [
        reset_channel(layout, expected),
        clone_channel(layout, variant.cloner),
        crossover_swap(layout)
    ]
    mutation = mutation_stage(layout, variant, rng)
    if mutation is not None:
        stages.append(mutation)
    stages.append(sorting or sorting_channel(layout, h))
    logger.debug(f"Built generation channel {variant.label} for {layout}")
    return compose(layout, stages, f"generation-{variant.label}")
