import numpy as np
import pytest

from qga.engine import (
    InitMode, best_individual_energy, individual_statistics,
    initial_state, qga_fidelity, run
)
from qga.errors import ConfigurationError
from qga.fitting import fit_convergence
from qga.hamiltonian import computational_hamiltonian, random_problem_hamiltonian
from qga.models import Cloner, MutationMode, PopulationLayout, PopulationState, Variant
from qga.states import RngStream, partial_trace

LAYOUT = PopulationLayout(4, 1)

def test_haar_full_initial_state_is_pure():
    rho = initial_state(LAYOUT, RngStream(50), InitMode.HAAR_FULL)
    assert rho.trace == pytest.approx(1.0, abs=1e-12)
    assert np.trace(rho.matrix @ rho.matrix).real == pytest.approx(1.0, abs=1e-10)

def test_haar_product_registers_are_pure():
    rho = initial_state(LAYOUT, RngStream(51), "haar-product")
    for register in range(1, 5):
        reduced = partial_trace(rho, [register])
        assert np.trace(reduced @ reduced).real == pytest.approx(1.0, abs=1e-10)

def test_sorted_ground_population_figures_of_merit():
    h = computational_hamiltonian(1)
    matrix = np.zeros((16, 16))
    matrix[3, 3] = 1
    rho = PopulationState(LAYOUT, matrix)
    assert qga_fidelity(rho, h) == pytest.approx(1.0)
    assert best_individual_energy(rho, h) == pytest.approx(1.0)
    np.testing.assert_allclose(individual_statistics(rho, h), [[1, 0], [1, 0], [0, 1], [0, 1]])

def test_run_series_shape():
    h = random_problem_hamiltonian(1, RngStream(52))
    rho = initial_state(LAYOUT, RngStream(53))
    trajectory = run(rho, h, Variant(Cloner.UQCM), 5)
    assert trajectory.generations == 5
    assert len(trajectory.fidelity_series) == 6
    assert len(trajectory.energy_series) == 6
    assert trajectory.states is None
    assert all(0.0 <= f <= 1.0 for f in trajectory.fidelity_series)
    assert all(1.0 - 1e-9 <= e <= 2.0 + 1e-9 for e in trajectory.energy_series)

def test_run_statistics_are_distributions():
    h = random_problem_hamiltonian(1, RngStream(54))
    trajectory = run(initial_state(LAYOUT, RngStream(55)), h, Variant(Cloner.BCQO), 3)
    assert len(trajectory.final_statistics) == 4
    for row in trajectory.final_statistics:
        assert sum(row) == pytest.approx(1.0, abs=1e-10)

def test_run_keeps_states():
    h = random_problem_hamiltonian(1, RngStream(56))
    trajectory = run(initial_state(LAYOUT, RngStream(57)), h, Variant(Cloner.BCQO), 2, keep_states=True)
    assert len(trajectory.states) == 3
    assert np.trace(trajectory.states[-1]).real == pytest.approx(1.0, abs=1e-10)

def test_run_sampled_mutation_is_reproducible():
    h = random_problem_hamiltonian(1, RngStream(58))
    rho = initial_state(LAYOUT, RngStream(59))
    variant = Variant(Cloner.BCQO, MutationMode.SAMPLED, 0.2)
    a = run(rho, h, variant, 4, rng=RngStream(60))
    b = run(rho, h, variant, 4, rng=RngStream(60))
    assert a.fidelity_series == b.fidelity_series
    assert a.seed == 60

def test_run_without_mutation_ignores_stream():
    h = random_problem_hamiltonian(1, RngStream(61))
    rho = initial_state(LAYOUT, RngStream(62))
    a = run(rho, h, Variant(Cloner.UQCM), 3, rng=RngStream(1))
    b = run(rho, h, Variant(Cloner.UQCM), 3, rng=RngStream(2))
    assert a.fidelity_series == b.fidelity_series

def test_run_requires_generations():
    h = computational_hamiltonian(1)
    with pytest.raises(ConfigurationError):
        run(initial_state(LAYOUT, RngStream(63)), h, Variant(Cloner.UQCM), 0)

def test_trajectory_dict():
    h = random_problem_hamiltonian(1, RngStream(64))
    data = run(initial_state(LAYOUT, RngStream(65)), h, Variant(Cloner.UQCM), 1).to_dict()
    assert data["variant"] == "uqcm/off"
    assert data["ham_hash"] == h.hash
    assert data["init_mode"] == "haar-full"

def test_bcqo_from_ground_population_stays_optimal():
    h = computational_hamiltonian(1)
    matrix = np.zeros((16, 16))
    matrix[0, 0] = 1
    trajectory = run(PopulationState(LAYOUT, matrix), h, Variant(Cloner.BCQO), 10)
    np.testing.assert_allclose(trajectory.fidelity_series, [1.0] * 11, atol=1e-12)

@pytest.mark.parametrize("cloner", list(Cloner))
@pytest.mark.parametrize("seed", [66, 67])
def test_mutation_free_series_follows_geometric_law(cloner, seed):
    h = random_problem_hamiltonian(1, RngStream(seed))
    trajectory = run(initial_state(LAYOUT, RngStream(seed + 100)), h, Variant(cloner), 10)
    fit = fit_convergence(trajectory.fidelity_series, burn_in=4)
    assert fit.rms < 1e-3
