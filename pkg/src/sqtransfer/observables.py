"""Reduced states, quadrature variances, Uhlmann fidelity and Wigner functions.

Quadratures of a mode ``o`` are ``X = (o + o^+)/2`` and ``Y = (o - o^+)/(2i)``,
so the vacuum has variance 1/4 in both. The coherent pump ``i q (b^+^2 - b^2)``
squeezes ``Y``; a squeezed-vacuum bath with ``theta = pi`` squeezes ``X``.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .dynamics import InvalidStateError
from .operators import HilbertSpec, Subsystem

__all__ = [
    "Quadrature",
    "partial_trace",
    "expect",
    "mode_moments",
    "quadrature_variance",
    "fidelity",
    "trace_distance",
    "wigner",
]


class Quadrature(enum.Enum):
    X = "x"
    Y = "y"


def partial_trace(rho: np.ndarray, keep: Subsystem, spec: HilbertSpec) -> np.ndarray:
    """Reduced density matrix of one factor of the composite space."""
    keep = Subsystem(keep)
    dims = spec.dims
    t = np.asarray(rho).reshape(dims + dims)
    letters = "abc"
    ket = list(letters)
    bra = [c if i != keep else c.upper() for i, c in enumerate(letters)]
    out = letters[keep] + letters[keep].upper()
    return np.einsum("".join(ket) + "".join(bra) + "->" + out, t)


def expect(rho: np.ndarray, op: np.ndarray) -> complex:
    return complex(np.trace(rho @ op))


def mode_moments(rho_mode: np.ndarray) -> tuple[complex, complex, float]:
    """``(<o>, <o^2>, <o^+ o>)`` of a single-mode state in the Fock basis."""
    rho_mode = np.asarray(rho_mode)
    n = np.arange(rho_mode.shape[0])
    # <o> = sum_n sqrt(n) rho[n, n-1]; <o^2> = sum_n sqrt(n(n-1)) rho[n, n-2]
    o1 = np.sum(np.sqrt(n[1:]) * np.diagonal(rho_mode, -1))
    o2 = np.sum(np.sqrt(n[2:] * (n[2:] - 1)) * np.diagonal(rho_mode, -2))
    nbar = float(np.real(np.sum(n * np.diagonal(rho_mode))))
    return complex(o1), complex(o2), nbar


def quadrature_variance(rho_mode: np.ndarray, quad: Quadrature) -> float:
    o1, o2, nbar = mode_moments(rho_mode)
    sign = 1.0 if Quadrature(quad) is Quadrature.X else -1.0
    # <Q^2> = (2<o^+o> + 1 + sign*2 Re<o^2>)/4, <Q> = Re<o> or Im<o>
    second = (2 * nbar + 1 + sign * 2 * o2.real) / 4
    mean = o1.real if sign > 0 else o1.imag
    return float(second - mean**2)


def _clamped(rho: np.ndarray, herm_tol: float) -> tuple[np.ndarray, np.ndarray]:
    rho = np.asarray(rho, dtype=complex)
    scale = max(1.0, float(np.abs(rho).max()))
    if np.abs(rho - rho.conj().T).max() > herm_tol * scale:
        raise InvalidStateError("density matrix is not Hermitian")
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    # negative and roundoff-sized eigenvalues carry no weight
    w[w < w.size * np.finfo(float).eps * max(w.max(), 0.0)] = 0.0
    total = w.sum()
    if total <= 0:
        raise InvalidStateError("density matrix has no positive weight")
    return w / total, v


def fidelity(rho1: np.ndarray, rho2: np.ndarray, herm_tol: float = 1e-8) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))``.

    Both inputs are Hermitized, negative eigenvalues clamped to zero and the
    result renormalized before the square roots are taken. The trace is
    evaluated as the sum of singular values of ``sqrt(rho1) sqrt(rho2)``.
    """
    if np.shape(rho1) != np.shape(rho2):
        raise ValueError(f"shape mismatch {np.shape(rho1)} vs {np.shape(rho2)}")
    w1, v1 = _clamped(rho1, herm_tol)
    w2, v2 = _clamped(rho2, herm_tol)
    sqrt1 = (v1 * np.sqrt(w1)) @ v1.conj().T
    sqrt2 = (v2 * np.sqrt(w2)) @ v2.conj().T
    return float(min(1.0, np.linalg.svd(sqrt1 @ sqrt2, compute_uv=False).sum()))


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    diff = np.asarray(rho1) - np.asarray(rho2)
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def wigner(rho_mode: np.ndarray, grid) -> np.ndarray:
    """Wigner function at the complex phase-space points ``grid``.

    ``alpha = x + i y`` with ``x, y`` the quadrature eigenvalues, normalized so
    that ``integral W dx dy = 1`` and the vacuum peaks at ``2/pi``. Uses the
    Laguerre form of the Wigner function of the Fock-basis elements.
    """
    w, v = _clamped(rho_mode, 1e-8)
    rho = (v * w) @ v.conj().T
    alpha = np.asarray(grid, dtype=complex)
    r2 = 4 * np.abs(alpha) ** 2
    gauss = (2 / np.pi) * np.exp(-r2 / 2)
    W = np.zeros(alpha.shape, dtype=complex)
    dim = rho.shape[0]
    for n in range(dim):
        for m in range(n, dim):
            k = m - n
            # weight of rho[m, n], m >= n:
            # (2/pi)(-1)^n sqrt(n!/m!) (2 alpha*)^k e^{-2|alpha|^2} L_n^k(4|alpha|^2)
            coeff = (-1) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            term = coeff * (2 * np.conj(alpha)) ** k * eval_genlaguerre(n, k, r2) * gauss
            if k == 0:
                W += rho[m, n] * term
            else:
                W += rho[m, n] * term + rho[n, m] * np.conj(term)
    return W.real
