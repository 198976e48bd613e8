from __future__ import annotations

import base64
import binascii
import enum
import hashlib
import json
import logging
import struct

from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence

import numpy as np
import numpy.typing as npt

from typing_extensions import override

from qga.errors import ContractViolationError, ParsingError, RegisterRangeError
from qga.models import Matrix, PureState
from qga.states import RngStream, haar_unitary, is_unitary

logger = logging.getLogger("qga")

class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1

class ProblemHamiltonian:
    """A problem Hamiltonian described by its sorted eigenbasis.

    Column k of `basis_unitary` is the eigenvector |u_{k+1}> and `eigenvalues` is
    ascending. Only the ordering of the eigenvalues matters to the algorithm."""

    if TYPE_CHECKING:
        c: int
        basis_unitary: Matrix
        eigenvalues: npt.NDArray[np.float64]
        seed: Optional[int]

    def __init__(
        self,
        c: int,
        basis_unitary: npt.ArrayLike,
        eigenvalues: Sequence[float],
        seed: Optional[int] = None
    ) -> None:
        d = 2 ** c
        u = np.array(basis_unitary, dtype=np.complex128)
        if u.shape != (d, d):
            raise ContractViolationError(f"Basis unitary must be {d}x{d} for c={c}, got {u.shape}")
        if not is_unitary(u):
            raise ContractViolationError("Basis unitary is not unitary")
        eps = np.array(eigenvalues, dtype=np.float64)
        if eps.shape != (d,):
            raise ContractViolationError(f"Expected {d} eigenvalues, got {eps.shape}")
        if np.any(np.diff(eps) < 0):
            raise ContractViolationError("Eigenvalues must be sorted in ascending order")
        u.flags.writeable = False
        eps.flags.writeable = False
        self.c = c
        self.basis_unitary = u
        self.eigenvalues = eps
        self.seed = seed

    @override
    def __repr__(self) -> str:
        return f'<ProblemHamiltonian c={self.c} hash="{self.hash[:12]}">'

    @property
    def d(self) -> int:
        return 2 ** self.c

    @property
    def matrix(self) -> Matrix:
        """Returns H_P = U diag(eps) U^dagger."""
        u = self.basis_unitary
        return (u * self.eigenvalues) @ u.conj().T

    @property
    def payload(self) -> bytes:
        """Returns U as row-major little-endian complex128 bytes."""
        return self.basis_unitary.astype("<c16").tobytes(order="C")

    @property
    def hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(struct.pack("<q", self.c))
        digest.update(self.payload)
        return digest.hexdigest()

    def with_eigenvalues(self, eigenvalues: Sequence[float]) -> ProblemHamiltonian:
        """Returns the same eigenbasis with a different ascending spectrum."""
        return ProblemHamiltonian(self.c, self.basis_unitary, eigenvalues, self.seed)

    def index_energy_order(self, k: int, k_other: int) -> Ordering:
        """Compares eps_k with eps_k' for 1-based indices."""
        for index in (k, k_other):
            if not 1 <= index <= self.d:
                raise RegisterRangeError(f"Eigen index {index} outside 1..{self.d}")
        left = self.eigenvalues[k - 1]
        right = self.eigenvalues[k_other - 1]
        if left < right:
            return Ordering.LESS
        if left > right:
            return Ordering.GREATER
        return Ordering.EQUAL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c": self.c,
            "seed": self.seed,
            "hash": self.hash,
            "payload": base64.b64encode(self.payload).decode("ascii")
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ProblemHamiltonian:
        try:
            c = int(data["c"])
            raw = base64.b64decode(data["payload"], validate=True)
            expected_hash = data["hash"]
        except (KeyError, TypeError, ValueError, binascii.Error) as e:
            raise ParsingError(f"Malformed Hamiltonian record: {e}") from None
        d = 2 ** c
        if len(raw) != d * d * 16:
            raise ParsingError(f"Hamiltonian payload has {len(raw)} bytes, expected {d * d * 16}")
        u = np.frombuffer(raw, dtype="<c16").reshape(d, d)
        try:
            h = cls(c, u, computational_eigenvalues(c), data.get("seed"))
        except ContractViolationError as e:
            raise ParsingError(f"Invalid Hamiltonian payload: {e}") from None
        if h.hash != expected_hash:
            raise ParsingError("Hamiltonian hash does not match its payload")
        return h

    def save(self, file_path: str) -> None:
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)
            _ = f.write("\n")

    @classmethod
    def load(cls, file_path: str) -> ProblemHamiltonian:
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ParsingError(f"Could not read Hamiltonian file '{file_path}': {e}") from None
        if not isinstance(data, dict):
            raise ParsingError(f"Hamiltonian file '{file_path}' does not hold a JSON object")
        return cls.from_dict(data)

def computational_eigenvalues(c: int) -> npt.NDArray[np.float64]:
    return np.arange(1, 2 ** c + 1, dtype=np.float64)

def computational_hamiltonian(c: int) -> ProblemHamiltonian:
    """Returns H_C: identity eigenbasis with eps_k = k."""
    if c < 1:
        raise ContractViolationError(f"Register size must be positive, got c={c}")
    return ProblemHamiltonian(c, np.eye(2 ** c), computational_eigenvalues(c))

def random_problem_hamiltonian(c: int, rng: RngStream) -> ProblemHamiltonian:
    """Returns U H_C U^dagger for a Haar-random U."""
    if c < 1:
        raise ContractViolationError(f"Register size must be positive, got c={c}")
    u = haar_unitary(2 ** c, rng)
    h = ProblemHamiltonian(c, u, computational_eigenvalues(c), rng.seed)
    logger.debug(f"Sampled problem Hamiltonian {h.hash[:12]} (stream key {rng.key})")
    return h

def ground_state(h: ProblemHamiltonian) -> PureState:
    """Returns |u_1>, the first column of the basis unitary."""
    column = h.basis_unitary[:, 0]
    return PureState(column / np.linalg.norm(column))
