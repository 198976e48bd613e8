from __future__ import annotations

import enum
import logging

from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np
import numpy.typing as npt

from typing_extensions import TypeAlias, override

from qga.errors import ConfigurationError, ContractViolationError

Matrix: TypeAlias = npt.NDArray[np.complex128]
Vector: TypeAlias = npt.NDArray[np.complex128]

TRACE_TOLERANCE = 1e-10
HERMITICITY_TOLERANCE = 1e-10
POSITIVITY_TOLERANCE = 1e-9
NORM_TOLERANCE = 1e-12

logger = logging.getLogger("qga")


def _frozen(matrix: npt.ArrayLike) -> Matrix:
    array = np.array(matrix, dtype=np.complex128, copy=True)
    array.flags.writeable = False
    return array

class PopulationLayout:
    """Shape of a population: `n` registers of `c` qubits each.

    Register 1 occupies the most significant qubits of the population index and,
    inside a register, qubit 1 is the most significant one. Every channel relies on
    this ordering.

    Any c >= 1 is accepted. Crossover swaps the last c // 2 qubits of each
    register pair, so an odd c leaves one middle qubit in place and c = 1 has
    no crossover at all."""

    if TYPE_CHECKING:
        n: int
        c: int

    def __init__(self, n: int, c: int) -> None:
        if n < 1 or c < 1:
            raise ContractViolationError(f"Layout needs n >= 1 and c >= 1, got n={n}, c={c}")
        self.n = n
        self.c = c

    @override
    def __repr__(self) -> str:
        return f'<PopulationLayout n={self.n} c={self.c} D={self.D}>'

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PopulationLayout):
            return NotImplemented
        return self.n == other.n and self.c == other.c

    @override
    def __hash__(self) -> int:
        return hash((self.n, self.c))

    @property
    def d(self) -> int:
        """Returns the dimension of a single individual."""
        return 2 ** self.c

    @property
    def D(self) -> int:
        """Returns the dimension of the whole population."""
        return self.d ** self.n

    @property
    def num_qubits(self) -> int:
        return self.n * self.c

    def require_qga(self) -> None:
        """Raises unless the layout can host the selection/crossover structure."""
        if self.n % 4 != 0:
            raise ConfigurationError(f"QGA populations need n divisible by 4, got n={self.n}")
        if self.c % 2 != 0:
            logger.debug(f"Odd register size c={self.c}: crossover swaps {self.c // 2} qubits")

class PopulationState:
    """Density matrix of a population, stored in the computational basis."""

    if TYPE_CHECKING:
        layout: PopulationLayout
        matrix: Matrix

    def __init__(self, layout: PopulationLayout, matrix: npt.ArrayLike, validate: bool = True) -> None:
        self.layout = layout
        self.matrix = _frozen(matrix)
        if self.matrix.shape != (layout.D, layout.D):
            raise ContractViolationError(
                f"Expected a {layout.D}x{layout.D} matrix for {layout}, got {self.matrix.shape}"
            )
        if validate:
            self.check()

    @override
    def __repr__(self) -> str:
        return f'<PopulationState layout={self.layout} trace={self.trace:.6f}>'

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def min_eigenvalue(self) -> float:
        hermitian = (self.matrix + self.matrix.conj().T) / 2
        return float(np.linalg.eigvalsh(hermitian)[0])

    @property
    def hermiticity_drift(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def check(self) -> None:
        """Raises a ContractViolationError unless the matrix is a valid density matrix."""
        trace = np.trace(self.matrix)
        if abs(trace - 1) > TRACE_TOLERANCE:
            raise ContractViolationError(f"Density matrix trace is {trace}, expected 1")
        if self.hermiticity_drift > HERMITICITY_TOLERANCE:
            raise ContractViolationError(f"Density matrix is not Hermitian (drift {self.hermiticity_drift:.3e})")
        if self.min_eigenvalue < -POSITIVITY_TOLERANCE:
            raise ContractViolationError(f"Density matrix is not positive (min eigenvalue {self.min_eigenvalue:.3e})")

class PureState:

    if TYPE_CHECKING:
        vector: Vector

    def __init__(self, vector: npt.ArrayLike) -> None:
        self.vector = _frozen(np.ravel(vector))
        norm = np.linalg.norm(self.vector)
        if abs(norm - 1) > NORM_TOLERANCE:
            raise ContractViolationError(f"Pure state norm is {norm}, expected 1")

    @override
    def __repr__(self) -> str:
        return f'<PureState dim={self.dim}>'

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def density(self) -> Matrix:
        """Returns the projector onto the state."""
        return np.outer(self.vector, self.vector.conj())

class Cloner(str, enum.Enum):
    BCQO = "bcqo"
    UQCM = "uqcm"

class MutationMode(str, enum.Enum):
    OFF = "off"
    SAMPLED = "sampled"
    EXACT = "exact"

class Variant:
    """A QGA variant: cloning machine plus mutation mode."""

    if TYPE_CHECKING:
        cloner: Cloner
        mutation: MutationMode
        p_m: float

    def __init__(self, cloner: Cloner, mutation: MutationMode = MutationMode.OFF, p_m: float = 0.0) -> None:
        if not 0.0 <= p_m <= 1.0:
            raise ConfigurationError(f"Mutation probability must lie in [0, 1], got {p_m}")
        self.cloner = Cloner(cloner)
        self.mutation = MutationMode(mutation)
        self.p_m = p_m

    @override
    def __repr__(self) -> str:
        return f'<Variant label="{self.label}" p_m={self.p_m}>'

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Variant):
            return NotImplemented
        return (self.cloner, self.mutation, self.p_m) == (other.cloner, other.mutation, other.p_m)

    @override
    def __hash__(self) -> int:
        return hash((self.cloner, self.mutation, self.p_m))

    @property
    def label(self) -> str:
        return f"{self.cloner.value}/{self.mutation.value}"

    @property
    def mutates(self) -> bool:
        return self.mutation is not MutationMode.OFF and self.p_m > 0

    def without_mutation(self) -> Variant:
        return Variant(self.cloner, MutationMode.OFF)

    @classmethod
    def parse(cls, label: str, p_m: float = 0.0) -> Variant:
        """Builds a variant from a `cloner/mutation` label such as `uqcm/sampled`."""
        parts = label.strip().lower().split("/")
        if len(parts) == 1:
            parts.append(MutationMode.OFF.value)
        try:
            cloner = Cloner(parts[0])
            mutation = MutationMode(parts[1])
        except ValueError:
            raise ConfigurationError(f"Unknown variant label '{label}'") from None
        if len(parts) != 2:
            raise ConfigurationError(f"Unknown variant label '{label}'")
        return cls(cloner, mutation, p_m if mutation is not MutationMode.OFF else 0.0)

class Trajectory:
    """One QGA run: figures of merit after every generation."""

    def __init__(
        self,
        ham_hash: str,
        variant: Variant,
        seed: Optional[int],
        init_mode: str,
        fidelity_series: List[float],
        energy_series: List[float],
        final_statistics: List[List[float]],
        states: Optional[List[Matrix]] = None
    ) -> None:
        self.ham_hash = ham_hash
        self.variant = variant
        self.seed = seed
        self.init_mode = init_mode
        self.fidelity_series = fidelity_series
        self.energy_series = energy_series
        self.final_statistics = final_statistics
        self.states = states

    @override
    def __repr__(self) -> str:
        return f'<Trajectory variant="{self.variant.label}" generations={self.generations}>'

    @property
    def generations(self) -> int:
        return len(self.fidelity_series) - 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ham_hash": self.ham_hash,
            "variant": self.variant.label,
            "p_m": self.variant.p_m,
            "seed": self.seed,
            "init_mode": self.init_mode,
            "fidelity_series": self.fidelity_series,
            "energy_series": self.energy_series,
            "final_statistics": self.final_statistics
        }

class FitResult:
    """Parameters of F(G) = F_inf + beta * gamma^G."""

    def __init__(self, f_inf: float, beta: float, gamma: float, rms: float) -> None:
        self.f_inf = f_inf
        self.beta = beta
        self.gamma = gamma
        self.rms = rms

    @override
    def __repr__(self) -> str:
        return f'<FitResult F_inf={self.f_inf:.4f} beta={self.beta:.4f} gamma={self.gamma:.4f}>'

    def to_dict(self) -> Dict[str, float]:
        return {"F_inf": self.f_inf, "beta": self.beta, "gamma": self.gamma, "rms": self.rms}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> FitResult:
        return cls(data["F_inf"], data["beta"], data["gamma"], data["rms"])

class BenchRecord:
    """One (Hamiltonian, variant, initial state) trajectory of a benchmark."""

    def __init__(
        self,
        ham_index: int,
        ham_hash: str,
        variant: str,
        init_index: int,
        seed: int,
        init_mode: str,
        fidelity_series: List[float],
        energy_series: List[float],
        fit: Optional[FitResult],
        final_statistics: Optional[List[List[float]]] = None,
        status: str = "ok",
        error: Optional[str] = None
    ) -> None:
        self.ham_index = ham_index
        self.ham_hash = ham_hash
        self.variant = variant
        self.init_index = init_index
        self.seed = seed
        self.init_mode = init_mode
        self.fidelity_series = fidelity_series
        self.energy_series = energy_series
        self.fit = fit
        self.final_statistics = final_statistics or []
        self.status = status
        self.error = error

    @override
    def __repr__(self) -> str:
        return f'<BenchRecord ham={self.ham_index} variant="{self.variant}" init={self.init_index} status="{self.status}">'

    @property
    def ok(self) -> bool:
        return self.status == "ok" and self.fit is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ham_index": self.ham_index,
            "ham_hash": self.ham_hash,
            "variant": self.variant,
            "init_index": self.init_index,
            "seed": self.seed,
            "init_mode": self.init_mode,
            "status": self.status,
            "error": self.error,
            "fidelity_series": self.fidelity_series,
            "energy_series": self.energy_series,
            "fit": self.fit.to_dict() if self.fit is not None else None,
            "final_statistics": self.final_statistics
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> BenchRecord:
        fit = data.get("fit")
        return cls(
            data["ham_index"],
            data["ham_hash"],
            data["variant"],
            data["init_index"],
            data["seed"],
            data["init_mode"],
            data["fidelity_series"],
            data["energy_series"],
            FitResult.from_dict(fit) if fit is not None else None,
            data.get("final_statistics"),
            data.get("status", "ok"),
            data.get("error")
        )

class SpectralReport:
    """Dominant spectrum and fixed point of a generation channel."""

    def __init__(
        self,
        ham_hash: str,
        variant: str,
        eigenvalues: List[complex],
        multiplicity: int,
        f_inf: float,
        gamma: float,
        predicted_energy: float,
        residual: float,
        fixed_point: Optional[Matrix] = None,
        degenerate: bool = False,
        oscillating: bool = False,
        with_mutation: bool = False,
        ham_index: Optional[int] = None
    ) -> None:
        self.ham_hash = ham_hash
        self.variant = variant
        self.eigenvalues = eigenvalues
        self.multiplicity = multiplicity
        self.f_inf = f_inf
        self.gamma = gamma
        self.predicted_energy = predicted_energy
        self.residual = residual
        self.fixed_point = fixed_point
        self.degenerate = degenerate
        self.oscillating = oscillating
        self.with_mutation = with_mutation
        self.ham_index = ham_index

    @override
    def __repr__(self) -> str:
        return f'<SpectralReport variant="{self.variant}" m={self.multiplicity} F_inf={self.f_inf:.4f} gamma={self.gamma:.4f}>'

    @property
    def flagged(self) -> bool:
        return self.degenerate or self.oscillating

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ham_index": self.ham_index,
            "ham_hash": self.ham_hash,
            "variant": self.variant,
            "eigenvalues": [{"re": float(v.real), "im": float(v.imag)} for v in self.eigenvalues],
            "m": self.multiplicity,
            "F_inf": self.f_inf,
            "gamma": self.gamma,
            "energy_inf": self.predicted_energy,
            "residual": self.residual,
            "degenerate": self.degenerate,
            "oscillating": self.oscillating,
            "with_mutation": self.with_mutation
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> SpectralReport:
        return cls(
            data["ham_hash"],
            data["variant"],
            [complex(v["re"], v["im"]) for v in data["eigenvalues"]],
            data["m"],
            data["F_inf"],
            data["gamma"],
            data.get("energy_inf", float("nan")),
            data["residual"],
            degenerate=data.get("degenerate", False),
            oscillating=data.get("oscillating", False),
            with_mutation=data.get("with_mutation", False),
            ham_index=data.get("ham_index")
        )
