from __future__ import annotations

import enum
import logging

from typing import List, Optional

import numpy as np

from qga.channels import Channel, generation_channel, sorting_channel
from qga.errors import ConfigurationError
from qga.hamiltonian import ProblemHamiltonian, ground_state
from qga.models import Matrix, PopulationLayout, PopulationState, Trajectory, Variant
from qga.states import (
    RngStream, fidelity_pure, haar_pure_state,
    partial_trace, population_from_pure, product_state
)

logger = logging.getLogger("qga")

class InitMode(str, enum.Enum):
    HAAR_FULL = "haar-full"
    HAAR_PRODUCT = "haar-product"

def initial_state(layout: PopulationLayout, rng: RngStream, mode: InitMode = InitMode.HAAR_FULL) -> PopulationState:
    """Samples a random initial population.

    `haar-full` draws one Haar pure state on all n*c qubits, `haar-product` draws an
    independent Haar state per register."""
    mode = InitMode(mode)
    if mode is InitMode.HAAR_FULL:
        return population_from_pure(layout, haar_pure_state(layout.D, rng))
    registers = [haar_pure_state(layout.d, rng) for _ in range(layout.n)]
    return population_from_pure(layout, product_state(registers))

def best_individual(rho: PopulationState) -> Matrix:
    """Returns the reduced state of register 1, where sorting puts the best individual."""
    return partial_trace(rho, [1])

def qga_fidelity(rho: PopulationState, h: ProblemHamiltonian) -> float:
    """Returns F_QGA = <u_1| tr_{1perp}(rho) |u_1>."""
    return fidelity_pure(best_individual(rho), ground_state(h))

def best_individual_energy(rho: PopulationState, h: ProblemHamiltonian) -> float:
    """Returns tr[H_P tr_{1perp}(rho)]."""
    return float(np.trace(h.matrix @ best_individual(rho)).real)

def individual_statistics(rho: PopulationState, h: ProblemHamiltonian) -> List[List[float]]:
    """Returns, per register, the populations <u_k|rho_r|u_k> in the problem basis."""
    u = h.basis_unitary
    statistics: List[List[float]] = []
    for register in range(1, rho.layout.n + 1):
        reduced = partial_trace(rho, [register])
        diagonal = np.einsum("ki,kl,li->i", u.conj(), reduced, u).real
        statistics.append([float(v) for v in diagonal])
    return statistics

def run(
    rho_in: PopulationState,
    h: ProblemHamiltonian,
    variant: Variant,
    generations: int,
    rng: Optional[RngStream] = None,
    keep_states: bool = False,
    init_mode: str = InitMode.HAAR_FULL.value,
    sorting: Optional[Channel] = None
) -> Trajectory:
    """Runs the QGA for `generations` generations.

    The initial population is sorted once so that generation 0 is measured after
    sorting; every generation channel application ends with sorting as well."""
    if generations < 1:
        raise ConfigurationError(f"At least one generation is required, got {generations}")
    layout = rho_in.layout
    sorting = sorting or sorting_channel(layout, h)
    generation = generation_channel(layout, h, variant, rng=rng, sorting=sorting)

    rho = sorting.apply(rho_in)
    fidelities = [qga_fidelity(rho, h)]
    energies = [best_individual_energy(rho, h)]
    states: Optional[List[Matrix]] = [rho.matrix] if keep_states else None
    for _ in range(generations):
        rho = generation.apply(rho)
        fidelities.append(qga_fidelity(rho, h))
        energies.append(best_individual_energy(rho, h))
        if states is not None:
            states.append(rho.matrix)

    logger.debug(f"Trajectory {variant.label} on {h.hash[:12]}: F_QGA {fidelities[0]:.4f} -> {fidelities[-1]:.4f}")
    return Trajectory(
        h.hash,
        variant,
        rng.seed if rng is not None else None,
        InitMode(init_mode).value,
        fidelities,
        energies,
        individual_statistics(rho, h),
        states
    )
