import itertools

import numpy as np
import pytest

from qga.channels import (
    bcqo_clone_channel, bubble_sort_schedule, build_sort_table, crossover_permutation,
    crossover_unitary, generation_channel, kraus_channel, mutation_channel_exact,
    mutation_kraus, reference_state, reset_channel, reset_kraus, sample_mutation_pattern,
    sample_mutation_unitary, sampled_mutation_channel, sorting_channel, sorting_kraus,
    uqcm_clone_channel, uqcm_kraus, uqcm_pair_kraus
)
from qga.errors import ConfigurationError
from qga.hamiltonian import ProblemHamiltonian, computational_hamiltonian, random_problem_hamiltonian
from qga.models import Cloner, MutationMode, PopulationLayout, PopulationState, PureState, Variant
from qga.states import (
    RngStream, fidelity_pure, haar_pure_state, haar_unitary, kraus_completeness,
    partial_trace, population_from_pure, product_state, tensor_power
)

LAYOUT = PopulationLayout(4, 1)

def random_state(layout, seed, rank=3):
    rng = RngStream(seed)
    weights = rng.generator.dirichlet(np.ones(rank))
    matrix = sum(w * haar_pure_state(layout.D, rng.child(i)).density() for i, w in enumerate(weights))
    return PopulationState(layout, matrix)

def basis_state(layout, digits):
    index = int(np.ravel_multi_index(tuple(digits), (layout.d,) * layout.n))
    matrix = np.zeros((layout.D, layout.D))
    matrix[index, index] = 1
    return matrix

def test_bubble_sort_schedule():
    schedule = bubble_sort_schedule(4)
    assert schedule == [(0, 1), (2, 3), (1, 2), (0, 1), (2, 3), (1, 2)]
    assert len(bubble_sort_schedule(6)) == 6 * 5 // 2

def test_sort_table_example():
    table = build_sort_table(LAYOUT, computational_hamiltonian(1))
    assert table.sorted_of((2, 1, 1, 2)) == (1, 1, 2, 2)
    assert table.instruction_of((2, 1, 1, 2)) == "101000"

def test_sorted_sequences_emit_no_swaps():
    table = build_sort_table(LAYOUT, computational_hamiltonian(1))
    assert table.instruction_of((1, 1, 2, 2)) == "000000"
    assert table.comparisons == 6

def test_sorting_equals_classical_bubble_sort():
    layout = PopulationLayout(4, 2)
    channel = sorting_channel(layout, computational_hamiltonian(2))
    for digits in itertools.product(range(4), repeat=4):
        expected = basis_state(layout, sorted(digits))
        np.testing.assert_allclose(channel.apply_matrix(basis_state(layout, digits)), expected, atol=1e-12)

def test_sorting_in_random_problem_basis():
    h = random_problem_hamiltonian(1, RngStream(21))
    channel = sorting_channel(LAYOUT, h)
    basis = tensor_power(h.basis_unitary, 4)
    rotated = basis @ basis_state(LAYOUT, (1, 0, 1, 0)) @ basis.conj().T
    expected = basis @ basis_state(LAYOUT, (0, 0, 1, 1)) @ basis.conj().T
    np.testing.assert_allclose(channel.apply_matrix(rotated), expected, atol=1e-10)

def test_sorting_kraus_matches_channel():
    h = random_problem_hamiltonian(1, RngStream(22))
    kraus = sorting_kraus(LAYOUT, h)
    assert kraus_completeness(kraus) <= 1e-9
    state = random_state(LAYOUT, 23)
    np.testing.assert_allclose(
        kraus_channel(LAYOUT, kraus).apply(state).matrix,
        sorting_channel(LAYOUT, h).apply(state).matrix,
        atol=1e-10
    )

@pytest.mark.parametrize("cloner", list(Cloner))
def test_reset_kraus_matches_channel(cloner):
    rho0 = reference_state(LAYOUT, cloner)
    kraus = reset_kraus(LAYOUT, rho0)
    assert kraus_completeness(kraus) <= 1e-9
    state = random_state(LAYOUT, 24)
    np.testing.assert_allclose(
        kraus_channel(LAYOUT, kraus).apply(state).matrix,
        reset_channel(LAYOUT, rho0).apply(state).matrix,
        atol=1e-10
    )

def test_reset_replaces_lower_half():
    rho0 = reference_state(LAYOUT, Cloner.UQCM)
    state = random_state(LAYOUT, 25)
    result = reset_channel(LAYOUT, rho0).apply(state)
    np.testing.assert_allclose(partial_trace(result, [3, 4]), np.kron(rho0, rho0), atol=1e-12)
    np.testing.assert_allclose(partial_trace(result, [1, 2]), partial_trace(state, [1, 2]), atol=1e-12)

def test_bcqo_copies_computational_basis():
    for digits in itertools.product(range(2), repeat=2):
        population = basis_state(LAYOUT, list(digits) + [0, 0])
        cloned = bcqo_clone_channel(LAYOUT).apply_matrix(population)
        np.testing.assert_allclose(cloned, basis_state(LAYOUT, list(digits) * 2))

def test_bcqo_biomimetic_statistics():
    layout = PopulationLayout(4, 2)
    rho0 = reference_state(layout, Cloner.BCQO)
    state = reset_channel(layout, rho0).apply(random_state(layout, 26))
    cloned = bcqo_clone_channel(layout).apply(state)
    for upper, lower in ((1, 3), (2, 4)):
        np.testing.assert_allclose(
            np.diag(partial_trace(cloned, [upper])),
            np.diag(partial_trace(cloned, [lower])),
            atol=1e-10
        )

@pytest.mark.parametrize("c, fidelity", [(1, 5 / 6), (2, 0.7)])
def test_uqcm_single_copy_fidelity(c, fidelity):
    layout = PopulationLayout(4, c)
    rng = RngStream(27 + c)
    channel = reset_channel(layout, reference_state(layout, Cloner.UQCM)).then(uqcm_clone_channel(layout))
    for trial in range(5):
        registers = [haar_pure_state(layout.d, rng.child(trial, i)) for i in range(4)]
        cloned = channel.apply(population_from_pure(layout, product_state(registers)))
        for register, source in ((1, 0), (3, 0), (2, 1), (4, 1)):
            psi = registers[source].vector
            reduced = partial_trace(cloned, [register])
            assert np.vdot(psi, reduced @ psi).real == pytest.approx(fidelity, abs=1e-9)

def test_uqcm_kraus_matches_channel():
    assert kraus_completeness(uqcm_pair_kraus(1)) <= 1e-9
    kraus = uqcm_kraus(LAYOUT)
    assert kraus_completeness(kraus) <= 1e-9
    state = random_state(LAYOUT, 30)
    np.testing.assert_allclose(
        kraus_channel(LAYOUT, kraus).apply(state).matrix,
        uqcm_clone_channel(LAYOUT).apply(state).matrix,
        atol=1e-10
    )

def test_crossover_swaps_last_qubits_of_lower_pairs():
    layout = PopulationLayout(4, 2)
    perm = crossover_permutation(layout)
    source = int(np.ravel_multi_index((0, 0, 1, 2), (4,) * 4))
    target = int(np.ravel_multi_index((0, 0, 0, 3), (4,) * 4))
    assert perm[source] == target
    upper_only = int(np.ravel_multi_index((3, 1, 0, 0), (4,) * 4))
    assert perm[upper_only] == upper_only

def test_crossover_is_involution():
    u = crossover_unitary(PopulationLayout(4, 2))
    np.testing.assert_allclose(u @ u, np.eye(256))

def test_crossover_is_identity_for_single_qubit_registers():
    np.testing.assert_array_equal(crossover_permutation(LAYOUT), np.arange(16))

def test_mutation_exact_single_qubit():
    layout = PopulationLayout(1, 1)
    result = mutation_channel_exact(layout, 1 / 24).apply_matrix(np.diag([1, 0]))
    np.testing.assert_allclose(result, np.diag([35 / 36, 1 / 36]), atol=1e-12)

def test_mutation_kraus_matches_exact_channel():
    layout = PopulationLayout(1, 2)
    kraus = list(mutation_kraus(layout, 0.1))
    assert len(kraus) == 16
    assert kraus_completeness(kraus) <= 1e-9
    state = random_state(layout, 31)
    np.testing.assert_allclose(
        kraus_channel(layout, kraus).apply(state).matrix,
        mutation_channel_exact(layout, 0.1).apply(state).matrix,
        atol=1e-12
    )

def test_sampled_mutation_is_reproducible():
    state = random_state(LAYOUT, 32)
    a = sampled_mutation_channel(LAYOUT, 0.3, RngStream(33))
    b = sampled_mutation_channel(LAYOUT, 0.3, RngStream(33))
    assert a.stochastic
    for _ in range(3):
        np.testing.assert_array_equal(a.apply(state).matrix, b.apply(state).matrix)

def test_sampled_mutation_without_probability_is_identity():
    state = random_state(LAYOUT, 34)
    channel = sampled_mutation_channel(LAYOUT, 0.0, RngStream(35))
    np.testing.assert_array_equal(channel.apply(state).matrix, state.matrix)

@pytest.mark.parametrize("variant", [
    Variant(Cloner.BCQO),
    Variant(Cloner.UQCM),
    Variant(Cloner.BCQO, MutationMode.SAMPLED, 1 / 24),
    Variant(Cloner.UQCM, MutationMode.EXACT, 1 / 24)
])
@pytest.mark.parametrize("c", [1, 2])
def test_generation_channel_preserves_density_matrices(variant, c):
    layout = PopulationLayout(4, c)
    h = random_problem_hamiltonian(c, RngStream(36))
    channel = generation_channel(layout, h, variant, rng=RngStream(37))
    for seed in range(100):
        result = channel.apply(random_state(layout, 40 + seed))
        assert abs(result.trace - 1) <= 1e-10
        assert result.hermiticity_drift <= 1e-10
        assert result.min_eigenvalue >= -1e-9

def test_generation_channel_errors():
    h = computational_hamiltonian(1)
    with pytest.raises(ConfigurationError):
        generation_channel(PopulationLayout(2, 1), h, Variant(Cloner.BCQO))
    with pytest.raises(ConfigurationError):
        generation_channel(LAYOUT, h, Variant(Cloner.BCQO), reference=np.eye(2) / 2)
    with pytest.raises(ConfigurationError):
        generation_channel(LAYOUT, h, Variant(Cloner.UQCM, MutationMode.SAMPLED, 0.1))

def swap_registers(matrix, layout, order):
    shape = (layout.d,) * (2 * layout.n)
    axes = list(order) + [layout.n + i for i in order]
    return np.asarray(matrix).reshape(shape).transpose(axes).reshape(layout.D, layout.D)

def test_sorting_kraus_is_covariant_under_basis_change():
    h = random_problem_hamiltonian(1, RngStream(90))
    v = haar_unitary(2, RngStream(91))
    rotated = ProblemHamiltonian(1, v @ h.basis_unitary, h.eigenvalues)
    lifted = tensor_power(v, 4)
    expected = [lifted @ a @ lifted.conj().T for a in sorting_kraus(LAYOUT, h)]
    actual = sorting_kraus(LAYOUT, rotated)
    assert len(actual) == len(expected)
    for a, b in zip(actual, expected):
        np.testing.assert_allclose(a, b, atol=1e-10)

@pytest.mark.parametrize("c, eigenvalues", [(1, [-3.0, 0.5]), (2, [-1.0, 0.0, 2.5, 10.0])])
@pytest.mark.parametrize("cloner", list(Cloner))
def test_channels_only_see_eigenvalue_order(c, eigenvalues, cloner):
    layout = PopulationLayout(4, c)
    h = random_problem_hamiltonian(c, RngStream(92))
    relabelled = h.with_eigenvalues(eigenvalues)
    state = random_state(layout, 93)
    np.testing.assert_array_equal(
        sorting_channel(layout, relabelled).apply(state).matrix,
        sorting_channel(layout, h).apply(state).matrix
    )
    np.testing.assert_array_equal(
        generation_channel(layout, relabelled, Variant(cloner)).apply(state).matrix,
        generation_channel(layout, h, Variant(cloner)).apply(state).matrix
    )

def test_sorting_drops_coherence_between_instruction_blocks():
    channel = sorting_channel(LAYOUT, computational_hamiltonian(1))
    unsorted = basis_state(LAYOUT, (1, 0, 0, 0))
    already_sorted = basis_state(LAYOUT, (0, 0, 1, 1))
    a = int(np.argmax(np.diag(unsorted)))
    b = int(np.argmax(np.diag(already_sorted)))
    psi = np.zeros(16)
    psi[[a, b]] = 1 / np.sqrt(2)
    result = channel.apply_matrix(np.outer(psi, psi))
    expected = 0.5 * basis_state(LAYOUT, (0, 0, 0, 1)) + 0.5 * already_sorted
    np.testing.assert_allclose(result, expected, atol=1e-12)

def test_sorting_keeps_coherence_inside_an_instruction_block():
    channel = sorting_channel(LAYOUT, computational_hamiltonian(1))
    a = int(np.ravel_multi_index((0, 0, 0, 1), (2,) * 4))
    b = int(np.ravel_multi_index((0, 0, 1, 1), (2,) * 4))
    psi = np.zeros(16)
    psi[[a, b]] = 1 / np.sqrt(2)
    rho = np.outer(psi, psi)
    np.testing.assert_allclose(channel.apply_matrix(rho), rho, atol=1e-12)

def test_bcqo_entangles_superposed_register():
    plus = PureState(np.array([1, 1]) / np.sqrt(2))
    zero = PureState(np.array([1, 0]))
    state = population_from_pure(LAYOUT, product_state([plus, zero, zero, zero]))
    cloned = bcqo_clone_channel(LAYOUT).apply(state)
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    np.testing.assert_allclose(partial_trace(cloned, [1, 3]), bell, atol=1e-12)
    for register in (1, 3):
        reduced = partial_trace(cloned, [register])
        np.testing.assert_allclose(reduced, np.eye(2) / 2, atol=1e-12)
        assert fidelity_pure(reduced, plus) == pytest.approx(0.5, abs=1e-12)

@pytest.mark.parametrize("order", [(2, 1, 0, 3), (0, 3, 2, 1)])
def test_uqcm_output_is_symmetric_in_clone_pairs(order):
    reset = reset_channel(LAYOUT, reference_state(LAYOUT, Cloner.UQCM))
    state = reset.apply(random_state(LAYOUT, 94))
    cloned = uqcm_clone_channel(LAYOUT).apply(state).matrix
    np.testing.assert_allclose(swap_registers(cloned, LAYOUT, order), cloned, atol=1e-12)

def test_crossover_commutes_with_upper_register_operators():
    layout = PopulationLayout(4, 2)
    u = crossover_unitary(layout)
    rng = RngStream(95)
    upper = np.kron(rng.complex_normal((16, 16)), np.eye(16))
    np.testing.assert_allclose(u @ upper, upper @ u, atol=1e-12)

def test_crossover_with_odd_register_size():
    layout = PopulationLayout(4, 3)
    layout.require_qga()
    perm = crossover_permutation(layout)
    source = int(np.ravel_multi_index((0, 0, 0b100, 0b011), (8,) * 4))
    target = int(np.ravel_multi_index((0, 0, 0b101, 0b010), (8,) * 4))
    assert perm[source] == target

def test_mutation_unitary_without_probability_is_identity():
    layout = PopulationLayout(4, 2)
    u = sample_mutation_unitary(layout, 0.0, RngStream(96))
    np.testing.assert_array_equal(u, np.eye(256))

def test_mutation_unitary_follows_pattern():
    pattern = sample_mutation_pattern(LAYOUT, 0.5, RngStream(97))
    u = sample_mutation_unitary(LAYOUT, 0.5, RngStream(97))
    gates = [np.eye(2), [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]]
    expected = np.array([[1]])
    for g in pattern:
        expected = np.kron(expected, gates[g])
    np.testing.assert_allclose(u, expected)

def test_mutation_rate_per_generation():
    layout = PopulationLayout(4, 2)
    rng = RngStream(98)
    counts = [np.count_nonzero(sample_mutation_pattern(layout, 1 / 24, rng)) for _ in range(20000)]
    assert np.mean(counts) == pytest.approx(1 / 3, abs=0.02)
