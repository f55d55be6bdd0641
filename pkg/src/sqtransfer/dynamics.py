"""Steady states and time evolution of the vectorized master equation."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from collections import OrderedDict
from typing import Iterator

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from ._blocks import ExcitationBlockSolver
from .liouvillian import Liouvillian, unvec, vec
from .operators import HilbertSpec

__all__ = [
    "SolverMethod",
    "SteadyStateOptions",
    "EvolveOptions",
    "NoUniqueSteadyStateError",
    "ConvergenceError",
    "StiffnessError",
    "InvalidStateError",
    "ground_state",
    "check_density_matrix",
    "residual",
    "steady_state",
    "iter_evolve",
    "evolve",
]

log = logging.getLogger(__name__)


class NoUniqueSteadyStateError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class StiffnessError(RuntimeError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow (h={h:.3e}) at t={t:.6g}")
        self.t = t
        self.h = h


class InvalidStateError(ValueError):
    pass


class SolverMethod(enum.Enum):
    DIRECT_LU = "direct"
    ITERATIVE_KRYLOV = "krylov"


@dataclass(frozen=True)
class SteadyStateOptions:
    method: SolverMethod = SolverMethod.ITERATIVE_KRYLOV
    residual_tol: float = 1e-10
    max_iterations: int = 2000
    krylov_rtol: float = 1e-13
    restart: int = 60

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")


@dataclass(frozen=True)
class EvolveOptions:
    initial_state: np.ndarray
    t_final: float
    n_samples: int = 101
    rtol: float = 1e-6
    atol: float = 1e-8
    first_step: float | None = None

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")


def ground_state(spec: HilbertSpec) -> np.ndarray:
    """``|0>_atom (x) |0>_cavity (x) |0>_mech`` as a density matrix."""
    rho = np.zeros((spec.total_dim, spec.total_dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def check_density_matrix(
    rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-10, min_eig: float = -1e-8
) -> dict:
    """Report Hermiticity, trace and positivity of ``rho``; raise if any fails."""
    rho = np.asarray(rho)
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = complex(np.trace(rho))
    lowest = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    report = {"hermiticity": herm, "trace_error": abs(tr - 1), "min_eigenvalue": lowest}
    if herm > herm_tol or abs(tr - 1) > trace_tol or lowest < min_eig:
        raise InvalidStateError(f"not a density matrix: {report}")
    return report


def residual(L: Liouvillian, rho: np.ndarray) -> float:
    """``max |L vec(rho)|``."""
    return float(np.abs(L.matrix @ vec(rho)).max())


def _trace_constrained(L: Liouvillian):
    """Replace the (redundant) equation for ``rho[0, 0]`` by a scaled trace condition."""
    d = L.dim
    n = d * d
    weight = float(np.abs(L.matrix.data).mean()) if L.matrix.nnz else 1.0
    mask = np.ones(n)
    mask[0] = 0.0
    diag_positions = np.arange(d) * (d + 1)
    trace_row = sp.csr_matrix(
        (np.full(d, weight, dtype=complex), (np.zeros(d, dtype=int), diag_positions)),
        shape=(n, n),
    )
    A = (sp.diags(mask) @ L.matrix + trace_row).tocsr()
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = weight
    return A, rhs


def steady_state(L: Liouvillian, opts: SteadyStateOptions | None = None) -> np.ndarray:
    """Solve ``L vec(rho) = 0`` with ``tr rho = 1``.

    ``DIRECT_LU`` factorizes the trace-constrained system with SuperLU and is
    only practical for small cutoffs. ``ITERATIVE_KRYLOV`` runs restarted GMRES
    preconditioned by the excitation-block factorization.
    """
    opts = opts or SteadyStateOptions()
    A, rhs = _trace_constrained(L)

    if opts.method is SolverMethod.DIRECT_LU:
        try:
            x = sla.splu(A.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise NoUniqueSteadyStateError(f"trace-constrained Liouvillian is singular: {exc}")
    else:
        try:
            pc = ExcitationBlockSolver(A, L.excitation, L.dim).as_operator()
        except RuntimeError as exc:
            raise NoUniqueSteadyStateError(f"cannot factorize preconditioner: {exc}")
        maxiter = max(1, opts.max_iterations // opts.restart)
        x, info = sla.gmres(
            A, rhs, M=pc, rtol=opts.krylov_rtol, atol=0.0, restart=opts.restart, maxiter=maxiter
        )
        if info != 0 and np.abs(A @ x - rhs).max() > opts.residual_tol:
            raise ConvergenceError(
                f"GMRES did not converge within {opts.max_iterations} iterations"
            )

    if not np.all(np.isfinite(x)):
        raise NoUniqueSteadyStateError("steady-state solve produced non-finite values")
    rho = unvec(x, L.dim)
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NoUniqueSteadyStateError("steady-state solution has vanishing trace")
    rho = rho / tr
    res = residual(L, rho)
    if res > opts.residual_tol:
        raise NoUniqueSteadyStateError(
            f"steady-state residual {res:.3e} exceeds tolerance {opts.residual_tol:.1e}"
        )
    return rho


# Hairer & Wanner SDIRK4: L-stable, stiffly accurate, order 4 with an
# embedded order-3 solution.
_GAMMA = 0.25
_A = np.array(
    [
        [1 / 4, 0, 0, 0, 0],
        [1 / 2, 1 / 4, 0, 0, 0],
        [17 / 50, -1 / 25, 1 / 4, 0, 0],
        [371 / 1360, -137 / 2720, 15 / 544, 1 / 4, 0],
        [25 / 24, -49 / 48, 125 / 16, -85 / 12, 1 / 4],
    ]
)
_B = _A[-1].copy()
_B_HAT = np.array([59 / 48, -17 / 96, 225 / 32, -85 / 12, 0.0])
_E = _B - _B_HAT


class _StageSolver:
    """Preconditioned GMRES for ``(I - h*gamma*L) k = rhs`` at a fixed step size."""

    def __init__(self, L: Liouvillian, h: float, tol: float):
        n = L.matrix.shape[0]
        self.h = h
        self.tol = tol
        self.matrix = (sp.identity(n, dtype=complex, format="csr") - (h * _GAMMA) * L.matrix).tocsr()
        self.pc = ExcitationBlockSolver(self.matrix, L.excitation, L.dim).as_operator()

    def solve(self, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray | None:
        scale = np.abs(rhs).max()
        if scale == 0:
            return np.zeros_like(rhs)
        x, info = sla.gmres(
            self.matrix, rhs, x0=x0, M=self.pc, rtol=self.tol, atol=0.0, restart=40, maxiter=10
        )
        return x if info == 0 else None


class _SolverCache:
    """The few most recent stage solvers, keyed by step size."""

    def __init__(self, L: Liouvillian, tol: float, size: int = 4):
        self.L, self.tol, self.size = L, tol, size
        self._items: OrderedDict[float, _StageSolver] = OrderedDict()

    def get(self, h: float) -> _StageSolver:
        solver = self._items.pop(h, None) or _StageSolver(self.L, h, self.tol)
        self._items[h] = solver
        while len(self._items) > self.size:
            self._items.popitem(last=False)
        return solver


def iter_evolve(L: Liouvillian, opts: EvolveOptions) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, rho(t))`` on ``n_samples`` equally spaced times in ``[0, t_final]``.

    Adaptive SDIRK4 with local error control on ``(rtol, atol)``. Steps are
    shortened to land on every sample time, so each sample is an accepted
    step under error control rather than an interpolant.
    """
    rho0 = np.asarray(opts.initial_state, dtype=complex)
    if rho0.shape != (L.dim, L.dim):
        raise ValueError(f"initial state has shape {rho0.shape}, Liouvillian acts on dim {L.dim}")

    samples = np.linspace(0.0, opts.t_final, opts.n_samples)
    y = vec(rho0).copy()
    t = 0.0
    yield 0.0, rho0.copy()
    next_sample = 1

    if L.matrix.nnz == 0:
        for ts in samples[1:]:
            yield float(ts), rho0.copy()
        return

    h = opts.first_step or min(1e-2, opts.t_final / 10)
    h_min = 1e-12 * max(1.0, opts.t_final)
    # stage solves only need to beat the local error target
    solvers = _SolverCache(L, max(1e-13, 0.1 * min(opts.rtol, opts.atol)))
    k = np.zeros((5, y.size), dtype=complex)
    f = L.matrix @ y

    while next_sample < samples.size:
        gap = samples[next_sample] - t
        lands = h >= gap or gap - h < 0.1 * h
        h_step = gap if lands else h
        solver = solvers.get(h_step)

        ok = True
        for i in range(5):
            base = y + h_step * (_A[i, :i] @ k[:i]) if i else y
            ki = solver.solve(L.matrix @ base, k[i - 1] if i else f)
            if ki is None:
                ok = False
                break
            k[i] = ki

        if ok:
            y_new = y + h_step * (_B @ k)
            scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean(np.abs(h_step * (_E @ k) / scale) ** 2)))
        else:
            err = np.inf

        if err <= 1.0:
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.25)
            if lands:
                t = float(samples[next_sample])
                yield t, unvec(y_new, L.dim).copy()
                next_sample += 1
                # a clipped step says nothing about growing the nominal size
                if factor < 1:
                    h = min(h, h_step * factor)
            else:
                t += h_step
                if factor >= 1.5:  # grow only in large strides to limit refactorizations
                    h *= factor
            y = y_new
            f = k[-1]  # stiffly accurate: last stage derivative is L y_new
        else:
            factor = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.25)
            h = h_step * factor
            log.debug("step rejected at t=%g, err=%g, new h=%g", t, err, h)
            if h < h_min:
                raise StiffnessError(t, h)


def evolve(L: Liouvillian, opts: EvolveOptions) -> list[tuple[float, np.ndarray]]:
    return list(iter_evolve(L, opts))
