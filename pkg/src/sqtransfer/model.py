"""Hamiltonians and loss channels of the driven atom-cavity-mechanics system.

Everything is in units of the mechanical frequency (omega_m = 1) and in the
interaction picture obtained after the blue-detuned rotating-wave
approximation (detuning Delta = omega_m). The lab-frame Hamiltonian

    H0 = sum_i w_i s_ii + w_c a^+a + w_m b^+b
         + i g_ac (a s21^+ - a^+ s21^-) - i g_cm a^+a (b^+ - b)

and its time-dependent polaron-frame form are not simulated. What is built
here is the effective tripartite Hamiltonian

    H2 = i J s21^+ a b^+ + i q b^+^2 - 2 i K a^+a b^+ + h.c.,
    J  = g_ac g_cm,   K = q g_cm,

the two-tone atomic drive

    HE = i E1 (s20^- - s20^+) + i E2 (s10^- - s10^+),

and the zero-temperature / squeezed-vacuum loss channels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .operators import (
    HilbertSpec,
    Subsystem,
    annihilation,
    atomic_ladder,
    dagger,
    embed_sparse,
)

__all__ = [
    "SystemParams",
    "SqueezedBathParams",
    "ChannelKind",
    "DissipationChannel",
    "build_H2",
    "build_H3",
    "build_HE",
    "standard_channels",
    "squeezed_channels",
    "fig2_params",
    "fig4_params",
]


@dataclass(frozen=True)
class SystemParams:
    g_ac: float = 100.0
    g_cm: float = 0.01
    q: float = 0.01
    E1: float = 25.0
    E2: float = 25.0
    gamma10: float = 20.0
    gamma21: float = 0.0
    kappa_a: float = 0.2
    kappa_b: float = 0.002
    include_K: bool = False

    def __post_init__(self):
        for name in ("g_ac", "g_cm", "q", "E1", "E2", "gamma10", "gamma21", "kappa_a", "kappa_b"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")

    @property
    def J(self) -> float:
        return self.g_ac * self.g_cm

    @property
    def K(self) -> float:
        return self.q * self.g_cm if self.include_K else 0.0

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


def fig2_params(**changes) -> SystemParams:
    """Coherent-pump parameter set (kappa_b = kappa_a / 100)."""
    return SystemParams(**changes)


def fig4_params(**changes) -> SystemParams:
    """Squeezed-bath parameter set: no coherent pump, kappa_a = kappa_b = 0.2."""
    base = dict(q=0.0, kappa_a=0.2, kappa_b=0.2)
    base.update(changes)
    return SystemParams(**base)


@dataclass(frozen=True)
class SqueezedBathParams:
    r: float = 0.3
    theta: float = math.pi

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0:
            raise ValueError(f"squeezing magnitude r must be finite and >= 0, got {self.r}")

    @property
    def N(self) -> float:
        return math.sinh(self.r) ** 2

    @property
    def M(self) -> complex:
        return -np.exp(1j * self.theta) * math.sinh(self.r) * math.cosh(self.r)


class ChannelKind(enum.Enum):
    STANDARD = "standard"
    SQUEEZED_VACUUM = "squeezed_vacuum"


@dataclass(frozen=True)
class DissipationChannel:
    operator: sp.csr_matrix
    rate: float
    kind: ChannelKind = ChannelKind.STANDARD
    bath: SqueezedBathParams | None = None
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"channel rate must be >= 0, got {self.rate}")
        if self.kind is ChannelKind.SQUEEZED_VACUUM and self.bath is None:
            raise ValueError("squeezed-vacuum channel needs bath parameters")


def _mode_ops(spec: HilbertSpec):
    a = embed_sparse(annihilation(spec.cavity_dim), Subsystem.CAVITY, spec)
    b = embed_sparse(annihilation(spec.mech_dim), Subsystem.MECH, spec)
    return a, b


def _sigma(i: int, j: int, spec: HilbertSpec) -> sp.csr_matrix:
    return embed_sparse(atomic_ladder(i, j), Subsystem.ATOM, spec)


def _hermitian(T: sp.spmatrix) -> sp.csr_matrix:
    H = (T + dagger(T)).tocsr()
    H.sum_duplicates()
    H.eliminate_zeros()
    return H


def build_H2(params: SystemParams, spec: HilbertSpec) -> sp.csr_matrix:
    """Tripartite coupling, coherent phonon squeezing pump and the K correction."""
    a, b = _mode_ops(spec)
    bd = dagger(b)
    s21p = _sigma(2, 1, spec)
    T = 1j * params.J * (s21p @ a @ bd) + 1j * params.q * (bd @ bd)
    if params.K:
        T = T - 2j * params.K * (dagger(a) @ a @ bd)
    return _hermitian(T)


def build_H3(params: SystemParams, spec: HilbertSpec) -> sp.csr_matrix:
    """``build_H2`` with the pump and K term switched off."""
    return build_H2(params.with_(q=0.0, include_K=False), spec)


def build_HE(params: SystemParams, spec: HilbertSpec) -> sp.csr_matrix:
    # i E (s^- - s^+) == (-i E s^+) + h.c.
    T = -1j * params.E1 * _sigma(2, 0, spec) - 1j * params.E2 * _sigma(1, 0, spec)
    return _hermitian(T)


def standard_channels(params: SystemParams, spec: HilbertSpec) -> list[DissipationChannel]:
    """Zero-temperature losses: s21^-, s10^-, a, b in that order."""
    a, b = _mode_ops(spec)
    return [
        DissipationChannel(_sigma(1, 2, spec), params.gamma21, label="sigma21"),
        DissipationChannel(_sigma(0, 1, spec), params.gamma10, label="sigma10"),
        DissipationChannel(a, params.kappa_a, label="a"),
        DissipationChannel(b, params.kappa_b, label="b"),
    ]


def squeezed_channels(
    params: SystemParams, bath: SqueezedBathParams, spec: HilbertSpec
) -> list[DissipationChannel]:
    channels = standard_channels(params, spec)
    mech = channels[-1]
    channels[-1] = DissipationChannel(
        mech.operator, mech.rate, ChannelKind.SQUEEZED_VACUUM, bath, label="b_sq"
    )
    return channels
