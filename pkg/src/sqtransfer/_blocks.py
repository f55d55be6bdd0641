"""Excitation-block preconditioner for Liouville-space linear systems.

Label every vectorized element ``rho[i, j]`` by the boson numbers of its ket
(``K``) and bra (``K'``). The tripartite exchange, the atomic drive and the
anti-commutator halves of every loss channel keep ``(K, K')`` fixed, and the
quantum jumps ``O rho O^+`` of the zero-temperature channels lower the level
``S = K + K'``. Dropping every entry that raises ``S`` (the coherent pump and
the heating half of a squeezed bath) or that mixes different blocks inside one
level leaves a block upper-triangular matrix in level order. Its diagonal
blocks are small, so it factorizes level by level and is applied by
back-substitution from the highest level down.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla


class ExcitationBlockSolver:
    def __init__(self, A: sp.spmatrix, excitation: np.ndarray | None, dim: int):
        n = A.shape[0]
        if excitation is None:
            excitation = np.zeros(dim, dtype=int)
        idx = np.arange(n)
        ket = excitation[idx % dim]
        bra = excitation[idx // dim]
        level = ket + bra
        block = ket * (int(excitation.max()) + 1) + bra

        order = np.lexsort((idx, block, -level))
        position = np.empty(n, dtype=np.int64)
        position[order] = idx
        self._order = order

        C = A.tocoo()
        keep = (level[C.row] < level[C.col]) | (block[C.row] == block[C.col])
        P = sp.csr_matrix(
            (C.data[keep], (position[C.row[keep]], position[C.col[keep]])), shape=A.shape
        )

        sorted_level = level[order]
        starts = np.flatnonzero(np.r_[True, sorted_level[1:] != sorted_level[:-1]])
        stops = np.r_[starts[1:], n]
        self._levels = []
        for s0, s1 in zip(starts, stops):
            diag = P[s0:s1, s0:s1].tocsc()
            upper = P[s0:s1, :s0].tocsr() if s0 else None
            self._levels.append((s0, s1, _factorize(diag), upper))

    def solve(self, v: np.ndarray) -> np.ndarray:
        vp = v[self._order]
        x = np.zeros_like(vp, dtype=complex)
        for s0, s1, lu, upper in self._levels:
            r = vp[s0:s1]
            if upper is not None:
                r = r - upper @ x[:s0]
            x[s0:s1] = lu.solve(r)
        out = np.empty_like(x)
        out[self._order] = x
        return out

    def as_operator(self) -> sla.LinearOperator:
        n = self._order.size
        return sla.LinearOperator((n, n), matvec=self.solve, dtype=complex)


def _factorize(block: sp.csc_matrix):
    try:
        return sla.splu(block)
    except RuntimeError:
        # Exactly singular diagonal block (e.g. a loss-free sector). The
        # preconditioner only has to be close, so regularize it.
        scale = max(abs(block).max(), 1.0)
        shift = 1e-8 * scale * sp.identity(block.shape[0], dtype=complex, format="csc")
        return sla.splu((block + shift).tocsc())
