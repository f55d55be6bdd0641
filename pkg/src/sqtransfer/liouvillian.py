"""Vectorized Lindblad generators.

Density matrices are vectorized by stacking columns, ``vec(rho)[i + d*j] =
rho[i, j]``, so that ``vec(A rho B) = (B^T kron A) vec(rho)``. With that
convention ``dissipator_super`` and ``build_liouvillian`` reproduce

    d rho/dt = -i[H, rho] + sum_k (rate_k / 2) L[O_k] rho,
    L[O] rho = 2 O rho O^+ - O^+O rho - rho O^+O,

and for a squeezed-vacuum channel the four-term generator

    (N+1) L[b] + N L[b^+] + M (2 b^+ rho b^+ - b^+b^+ rho - rho b^+b^+)
                          + M* (2 b rho b - b b rho - rho b b).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import (
    ChannelKind,
    DissipationChannel,
    SqueezedBathParams,
    SystemParams,
    build_H2,
    build_H3,
    build_HE,
    squeezed_channels,
    standard_channels,
)
from .operators import HilbertSpec

__all__ = [
    "Liouvillian",
    "vec",
    "unvec",
    "spre",
    "spost",
    "sprepost",
    "dissipator_super",
    "build_liouvillian",
    "coherent_pump_liouvillian",
    "squeezed_bath_liouvillian",
]


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Sparse ``d^2 x d^2`` generator acting on column-stacked density matrices.

    ``excitation`` optionally labels every Hilbert-space basis state with its
    total boson number. The steady-state and time-evolution solvers use it to
    build their excitation-block preconditioner; without it they fall back to
    treating the whole space as one block.
    """

    matrix: sp.csr_matrix
    dim: int
    excitation: np.ndarray | None = None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def _sparse(op) -> sp.csr_matrix:
    return sp.csr_matrix(op, dtype=complex)


def spre(A) -> sp.csr_matrix:
    """Superoperator of ``rho -> A rho``."""
    A = _sparse(A)
    return sp.kron(sp.identity(A.shape[0], dtype=complex, format="csr"), A, format="csr")


def spost(B) -> sp.csr_matrix:
    """Superoperator of ``rho -> rho B``."""
    B = _sparse(B)
    return sp.kron(B.T, sp.identity(B.shape[0], dtype=complex, format="csr"), format="csr")


def sprepost(A, B) -> sp.csr_matrix:
    """Superoperator of ``rho -> A rho B``."""
    return sp.kron(_sparse(B).T, _sparse(A), format="csr")


def _lindblad_term(A, B) -> sp.csr_matrix:
    # 2 A rho B - B A rho - rho B A
    BA = _sparse(B) @ _sparse(A)
    return 2 * sprepost(A, B) - spre(BA) - spost(BA)


def dissipator_super(channel: DissipationChannel, dim: int | None = None) -> sp.csr_matrix:
    O = _sparse(channel.operator)
    if O.shape[0] != O.shape[1] or (dim is not None and O.shape[0] != dim):
        raise ValueError(f"channel operator of shape {O.shape} does not act on dimension {dim}")
    n = O.shape[0]
    if channel.rate == 0:
        return sp.csr_matrix((n * n, n * n), dtype=complex)
    Od = O.conj().T
    if channel.kind is ChannelKind.STANDARD:
        D = _lindblad_term(O, Od)
    else:
        N, M = channel.bath.N, channel.bath.M
        D = (N + 1) * _lindblad_term(O, Od) + N * _lindblad_term(Od, O)
        if M != 0:
            D = D + M * _lindblad_term(Od, Od) + np.conj(M) * _lindblad_term(O, O)
    D = (0.5 * channel.rate) * D
    D.sum_duplicates()
    D.eliminate_zeros()
    return D.tocsr()


def build_liouvillian(H, channels=(), excitation=None) -> Liouvillian:
    """Assemble ``-i(I (x) H - H^T (x) I)`` plus every channel's dissipator."""
    H = _sparse(H)
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError(f"Hamiltonian must be square, got {H.shape}")
    L = -1j * (spre(H) - spost(H))
    for channel in channels:
        L = L + dissipator_super(channel, d)
    L = L.tocsr()
    L.sum_duplicates()
    L.eliminate_zeros()
    if excitation is not None:
        excitation = np.asarray(excitation, dtype=int)
        if excitation.shape != (d,):
            raise ValueError(f"excitation labels must have length {d}")
    return Liouvillian(L, d, excitation)


def coherent_pump_liouvillian(params: SystemParams, spec: HilbertSpec) -> Liouvillian:
    """Full generator with H2 + HE and the four zero-temperature channels."""
    H = build_H2(params, spec) + build_HE(params, spec)
    return build_liouvillian(H, standard_channels(params, spec), spec.excitation())


def squeezed_bath_liouvillian(
    params: SystemParams, bath: SqueezedBathParams, spec: HilbertSpec
) -> Liouvillian:
    """Full generator with H3 + HE, the phonon channel coupled to a squeezed vacuum."""
    H = build_H3(params, spec) + build_HE(params, spec)
    return build_liouvillian(H, squeezed_channels(params, bath, spec), spec.excitation())
