"""Second-moment equations under adiabatic elimination of the atom.

The atomic coherence is frozen at its driven steady value

    sigma = <s21^+> = 2 E1 E2 / (gamma10^2 + 4 (E1^2 + E2^2)),

which turns the tripartite coupling into a beam splitter of strength
``J*sigma`` between cavity and mechanics. With K = 0 the six moments
``<a^+a>, <b^+b>, <a^2>, <b^2>, <a^+b>, <ab>`` then obey a closed linear
system ``dx/dt = M x + c`` whose only source is ``2q`` in ``d<b^2>/dt``.
Partner moments (``<a^+b^+>`` etc.) are closed by complex conjugation; for
real moments the equations reduce term by term to the printed ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .model import SqueezedBathParams, SystemParams

__all__ = [
    "MomentState",
    "SemiclassicalParams",
    "InvalidParametersError",
    "sigma_ss",
    "moment_rhs",
    "moment_matrix",
    "steady_moments",
    "integrate_moments",
    "stability",
    "closed_form_stable",
    "instability_threshold",
    "variances_from_moments",
    "analytic_variance_coherent",
    "analytic_variance_bath",
]


class InvalidParametersError(ValueError):
    pass


@dataclass(frozen=True)
class MomentState:
    n_a: float = 0.0
    n_b: float = 0.0
    a2: complex = 0j
    b2: complex = 0j
    adb: complex = 0j
    ab: complex = 0j

    def to_real(self) -> np.ndarray:
        """``[n_a, n_b, Re a2, Im a2, Re b2, Im b2, Re adb, Im adb, Re ab, Im ab]``."""
        return np.array(
            [
                self.n_a, self.n_b,
                self.a2.real, self.a2.imag,
                self.b2.real, self.b2.imag,
                self.adb.real, self.adb.imag,
                self.ab.real, self.ab.imag,
            ]
        )

    @classmethod
    def from_real(cls, x) -> "MomentState":
        x = np.asarray(x, dtype=float)
        return cls(
            float(x[0]), float(x[1]),
            complex(x[2], x[3]), complex(x[4], x[5]),
            complex(x[6], x[7]), complex(x[8], x[9]),
        )


@dataclass(frozen=True)
class SemiclassicalParams:
    J: float
    q: float
    kappa_a: float
    kappa_b: float
    E1: float = 25.0
    E2: float = 25.0
    gamma10: float = 20.0

    @property
    def sigma(self) -> float:
        return sigma_ss(self.E1, self.E2, self.gamma10)

    @classmethod
    def from_system(cls, params: SystemParams) -> "SemiclassicalParams":
        return cls(
            J=params.J, q=params.q, kappa_a=params.kappa_a, kappa_b=params.kappa_b,
            E1=params.E1, E2=params.E2, gamma10=params.gamma10,
        )


def sigma_ss(E1: float, E2: float, gamma10: float) -> float:
    denom = gamma10**2 + 4 * (E1**2 + E2**2)
    if denom == 0:
        raise InvalidParametersError("E1, E2 and gamma10 cannot all vanish")
    return 2 * E1 * E2 / denom


def moment_rhs(state: MomentState, p: SemiclassicalParams) -> MomentState:
    g = p.J * p.sigma
    q, ka, kb = p.q, p.kappa_a, p.kappa_b
    half = (ka + kb) / 2
    return MomentState(
        n_a=-2 * g * state.adb.real - ka * state.n_a,
        n_b=2 * g * state.adb.real + 4 * q * state.b2.real - kb * state.n_b,
        a2=-2 * g * state.ab - ka * state.a2,
        b2=2 * g * state.ab + 4 * q * state.n_b - kb * state.b2 + 2 * q,
        adb=-g * (state.n_b - state.n_a) + 2 * q * state.ab.conjugate() - half * state.adb,
        ab=-g * (state.b2 - state.a2) + 2 * q * state.adb.conjugate() - half * state.ab,
    )


def moment_matrix(p: SemiclassicalParams) -> tuple[np.ndarray, np.ndarray]:
    """Real 10x10 ``M`` and source ``c`` of ``dx/dt = M x + c`` in the ``to_real`` layout."""
    c = moment_rhs(MomentState(), p).to_real()
    M = np.empty((10, 10))
    for j in range(10):
        e = np.zeros(10)
        e[j] = 1.0
        M[:, j] = moment_rhs(MomentState.from_real(e), p).to_real() - c
    return M, c


def steady_moments(p: SemiclassicalParams) -> MomentState:
    M, c = moment_matrix(p)
    return MomentState.from_real(np.linalg.solve(M, -c))


def integrate_moments(
    p: SemiclassicalParams, t_final: float, initial: MomentState | None = None, **kwargs
) -> MomentState:
    M, c = moment_matrix(p)
    x0 = (initial or MomentState()).to_real()
    kwargs.setdefault("rtol", 1e-11)
    kwargs.setdefault("atol", 1e-13)
    sol = solve_ivp(lambda t, x: M @ x + c, (0.0, t_final), x0, method="LSODA", jac=lambda t, x: M, **kwargs)
    return MomentState.from_real(sol.y[:, -1])


def stability(p: SemiclassicalParams) -> tuple[bool, np.ndarray]:
    """``(all Re(eig) < 0, eigenvalues)`` of the moment matrix."""
    M, _ = moment_matrix(p)
    eig = np.linalg.eigvals(M)
    return bool(np.all(eig.real < 0)), eig


def closed_form_stable(p: SemiclassicalParams) -> bool:
    return 4 * p.q < p.kappa_a + p.kappa_b


def instability_threshold(
    p: SemiclassicalParams, q_low: float = 0.0, q_high: float | None = None, tol: float = 1e-13
) -> float:
    """Bisect on ``q`` for the onset of instability of the eigenvalue test.

    ``q_low`` must be stable and ``q_high`` unstable; the default upper bound is
    twice the closed-form threshold.
    """
    if q_high is None:
        q_high = 0.5 * (p.kappa_a + p.kappa_b)
    stable = lambda q: stability(replace(p, q=q))[0]
    if not stable(q_low):
        raise InvalidParametersError(f"q_low={q_low} is already unstable")
    if stable(q_high):
        raise InvalidParametersError(f"q_high={q_high} is still stable")
    while q_high - q_low > tol:
        mid = 0.5 * (q_low + q_high)
        if stable(mid):
            q_low = mid
        else:
            q_high = mid
    return 0.5 * (q_low + q_high)


def variances_from_moments(state: MomentState) -> dict[str, float]:
    """Quadrature variances of both modes, assuming vanishing first moments."""
    return {
        "var_xa": (2 * state.n_a + 2 * state.a2.real + 1) / 4,
        "var_ya": (2 * state.n_a - 2 * state.a2.real + 1) / 4,
        "var_xb": (2 * state.n_b + 2 * state.b2.real + 1) / 4,
        "var_yb": (2 * state.n_b - 2 * state.b2.real + 1) / 4,
    }


def analytic_variance_coherent(p: SemiclassicalParams):
    """Steady ``(var_ya, var_yb, m, n, s)`` for the coherent phonon pump.

    ``n`` diverges at q = 0; there both variances are returned at their vacuum
    value 1/4 and ``n`` as ``inf``.
    """
    if p.q < 0:
        raise InvalidParametersError(f"q must be >= 0, got {p.q}")
    ka, kb = p.kappa_a, p.kappa_b
    m = 4 * p.q / (ka + kb)
    s = kb / (ka + kb)
    if p.q == 0:
        return 0.25, 0.25, m, math.inf, s
    n = (ka * kb + 4 * p.J**2 * p.sigma**2) / (4 * p.q * ka)
    denom = 4 * (m + 1) * (n + 1)
    return (m + n + s + 1) / denom, (n + s) / denom, m, n, s


def analytic_variance_bath(p: SemiclassicalParams, bath: SqueezedBathParams):
    """Steady ``(var_xa, var_xb, p, l)`` for the squeezed phonon reservoir."""
    ka, kb = p.kappa_a, p.kappa_b
    g2 = p.J**2 * p.sigma**2
    # N - M is real for theta = 0, pi; the real part is used otherwise.
    squeeze = 1 + 2 * (bath.N - bath.M).real
    pcoef = ka * kb / (4 * g2 + ka * kb)
    l = g2 * (kb * squeeze + ka) / ((ka + kb) * (4 * g2 + ka * kb))
    return pcoef / 4 + l, pcoef / 4 * squeeze + l, pcoef, l
