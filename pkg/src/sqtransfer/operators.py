"""Truncated Fock-space operators and embedding into the atom-cavity-mechanics space.

The composite space is always ordered ``Atom (x) Cavity (x) Mech``. Within each
factor the basis index is the level / photon / phonon number, so the composite
index of ``|i, n, m>`` is ``(i * cavity_dim + n) * mech_dim + m``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Subsystem",
    "HilbertSpec",
    "InvalidDimensionError",
    "InvalidLevelError",
    "EmbeddingError",
    "annihilation",
    "creation",
    "number",
    "identity",
    "atomic_ladder",
    "dagger",
    "embed",
    "embed_sparse",
    "basis_index",
]

ATOM_DIM = 3


class InvalidDimensionError(ValueError):
    pass


class InvalidLevelError(ValueError):
    pass


class EmbeddingError(ValueError):
    pass


class Subsystem(enum.IntEnum):
    """Tensor factors, valued by their position in the product."""

    ATOM = 0
    CAVITY = 1
    MECH = 2


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation of the composite space.

    ``cavity_dim`` and ``mech_dim`` are Fock cutoffs: the largest retained
    photon (phonon) number is ``cavity_dim - 1`` (``mech_dim - 1``).
    """

    cavity_dim: int = 12
    mech_dim: int = 12
    atom_dim: int = ATOM_DIM

    def __post_init__(self):
        if self.atom_dim != ATOM_DIM:
            raise InvalidDimensionError(f"atom_dim must be {ATOM_DIM}, got {self.atom_dim}")
        for name in ("cavity_dim", "mech_dim"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise InvalidDimensionError(f"{name} must be an integer >= 2, got {value}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.atom_dim, self.cavity_dim, self.mech_dim)

    @property
    def total_dim(self) -> int:
        return self.atom_dim * self.cavity_dim * self.mech_dim

    def dim_of(self, sub: Subsystem) -> int:
        return self.dims[Subsystem(sub)]

    def grow(self, step: int = 2) -> "HilbertSpec":
        return HilbertSpec(self.cavity_dim + step, self.mech_dim + step)

    def excitation(self) -> np.ndarray:
        """Total boson number ``n_cavity + n_mech`` of every composite basis state."""
        _, n, m = np.unravel_index(np.arange(self.total_dim), self.dims)
        return n + m


def _check_dim(dim: int) -> None:
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim}")


def annihilation(dim: int) -> np.ndarray:
    """Dense truncated annihilation operator, ``a[n-1, n] = sqrt(n)``."""
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def creation(dim: int) -> np.ndarray:
    return dagger(annihilation(dim))


def number(dim: int) -> np.ndarray:
    _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def atomic_ladder(i: int, j: int) -> np.ndarray:
    """Atomic transition operator ``|i><j|``.

    With ``i > j`` this is the raising operator sigma_ij^+; its adjoint
    ``atomic_ladder(j, i)`` is sigma_ij^-. ``i == j`` gives the level projector.
    """
    for level in (i, j):
        if level not in range(ATOM_DIM):
            raise InvalidLevelError(f"atomic level must be 0, 1 or 2, got {level}")
    op = np.zeros((ATOM_DIM, ATOM_DIM), dtype=complex)
    op[i, j] = 1.0
    return op


def dagger(op):
    return op.conj().T


def embed_sparse(op, sub: Subsystem, spec: HilbertSpec) -> sp.csr_matrix:
    """Sparse ``I (x) ... (x) op (x) ... (x) I`` on the composite space."""
    sub = Subsystem(sub)
    expected = spec.dim_of(sub)
    if op.shape != (expected, expected):
        raise EmbeddingError(
            f"{sub.name} operator must be {expected}x{expected}, got {op.shape[0]}x{op.shape[1]}"
        )
    factors = [sp.identity(d, dtype=complex, format="csr") for d in spec.dims]
    factors[sub] = sp.csr_matrix(op, dtype=complex)
    out = sp.kron(factors[0], factors[1], format="csr")
    out = sp.kron(out, factors[2], format="csr")
    out.eliminate_zeros()
    return out


def embed(op, sub: Subsystem, spec: HilbertSpec) -> np.ndarray:
    """Dense embedding, same convention as :func:`embed_sparse`."""
    sub = Subsystem(sub)
    expected = spec.dim_of(sub)
    if op.shape != (expected, expected):
        raise EmbeddingError(
            f"{sub.name} operator must be {expected}x{expected}, got {op.shape[0]}x{op.shape[1]}"
        )
    dense = op.toarray() if sp.issparse(op) else np.asarray(op, dtype=complex)
    factors = [identity(d) for d in spec.dims]
    factors[sub] = dense
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


def basis_index(spec: HilbertSpec, level: int, photons: int, phonons: int) -> int:
    return int(np.ravel_multi_index((level, photons, phonons), spec.dims))
