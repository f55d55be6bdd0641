"""Experiment runners behind the CLI subcommands.

Every runner takes an :class:`ExperimentConfig` and returns a :class:`Table`
whose rows are in input order regardless of the worker count. Points that
are semiclassically unstable, that fail to converge in the cutoff, or whose
solve fails are kept and marked in the ``flag`` column.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..dynamics import (
    ConvergenceError,
    EvolveOptions,
    NoUniqueSteadyStateError,
    ground_state,
    iter_evolve,
    residual,
    steady_state,
)
from ..liouvillian import Liouvillian, coherent_pump_liouvillian, squeezed_bath_liouvillian
from ..model import SqueezedBathParams, SystemParams
from ..observables import Quadrature, fidelity, partial_trace, quadrature_variance, trace_distance, wigner
from ..operators import HilbertSpec, Subsystem
from ..semiclassical import (
    SemiclassicalParams,
    analytic_variance_bath,
    analytic_variance_coherent,
    closed_form_stable,
    instability_threshold,
    stability,
)
from .config import ConfigError, Experiment, ExperimentConfig

__all__ = [
    "Table",
    "UnconvergedCutoffError",
    "CutoffConvergence",
    "converge_cutoff",
    "run_sweep_q",
    "run_sweep_r",
    "run_fidelity_maps",
    "run_time_evolution",
    "run_stability",
    "run_wigner",
    "run_experiment",
]

log = logging.getLogger(__name__)

OK, UNSTABLE, UNCONVERGED, FAILED = "ok", "unstable", "unconverged", "failed"


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


class UnconvergedCutoffError(RuntimeError):
    def __init__(self, message: str, trail: list[dict]):
        super().__init__(message)
        self.trail = trail


@dataclass
class CutoffConvergence:
    """Result of a cutoff scan.

    ``spec`` is the smallest spec whose observables move by less than the
    tolerance when both boson dims grow by the step; ``state`` and
    ``state_spec`` hold the larger of the two compared solutions.
    """

    spec: HilbertSpec
    trail: list[dict]
    state: np.ndarray
    state_spec: HilbertSpec
    residual: float


# ---------------------------------------------------------------------------
# single-point building blocks


def _liouvillian(params: SystemParams, bath: SqueezedBathParams | None, spec: HilbertSpec) -> Liouvillian:
    if bath is None:
        return coherent_pump_liouvillian(params, spec)
    return squeezed_bath_liouvillian(params, bath, spec)


def _quadrature(bath: SqueezedBathParams | None) -> Quadrature:
    return Quadrature.Y if bath is None else Quadrature.X


def _variances(rho: np.ndarray, spec: HilbertSpec, quad: Quadrature) -> tuple[float, float]:
    rc = partial_trace(rho, Subsystem.CAVITY, spec)
    rm = partial_trace(rho, Subsystem.MECH, spec)
    return quadrature_variance(rc, quad), quadrature_variance(rm, quad)


def _fidelity(rho: np.ndarray, spec: HilbertSpec) -> float:
    rc = partial_trace(rho, Subsystem.CAVITY, spec)
    rm = partial_trace(rho, Subsystem.MECH, spec)
    n = min(spec.cavity_dim, spec.mech_dim)
    # compare on a common Fock space; the tails outside it are truncation noise
    return fidelity(rc[:n, :n], rm[:n, :n])


def _observables(rho, spec, bath) -> tuple[float, ...]:
    return _variances(rho, spec, _quadrature(bath))


def _is_stable(params: SystemParams, bath: SqueezedBathParams | None) -> bool:
    p = SemiclassicalParams.from_system(params)
    if bath is not None:
        p = replace(p, q=0.0)
    return stability(p)[0]


def _solve(cfg: ExperimentConfig, params, bath, spec):
    L = _liouvillian(params, bath, spec)
    rho = steady_state(L, cfg.solver)
    return rho, residual(L, rho)


def converge_cutoff(
    config: ExperimentConfig,
    params: SystemParams | None = None,
    bath: SqueezedBathParams | None = None,
    observables=None,
) -> CutoffConvergence:
    """Grow both boson cutoffs until every target observable settles.

    Starts at ``config.cutoff_start`` and steps by ``config.cutoff_step``;
    the targets default to both quadrature variances of the model.
    """
    if params is None:
        params, bath = config.params, config.bath if bath is None else bath
    observe = observables or (lambda rho, spec: _observables(rho, spec, bath))
    trail: list[dict] = []
    dim = config.cutoff_start
    prev = None
    while True:
        if dim > config.cutoff_cap:
            raise UnconvergedCutoffError(
                f"cutoff cap {config.cutoff_cap} reached without settling below {config.cutoff_tol:g}", trail
            )
        spec = HilbertSpec(cavity_dim=dim, mech_dim=dim)
        rho, res = _solve(config, params, bath, spec)
        values = tuple(float(v) for v in observe(rho, spec))
        delta = None if prev is None else max(abs(a - b) for a, b in zip(values, prev[1]))
        trail.append({"cavity_dim": dim, "mech_dim": dim, "observables": list(values), "delta": delta, "residual": res})
        log.info("cutoff %d: %s (delta %s)", dim, values, delta)
        if delta is not None and delta < config.cutoff_tol:
            return CutoffConvergence(prev[0], trail, rho, spec, res)
        prev = (spec, values)
        dim += config.cutoff_step


def _steady_point(cfg: ExperimentConfig, params: SystemParams, bath: SqueezedBathParams | None):
    """``(rho, spec_used, residual, flag, trail)`` for one grid point."""
    stable = _is_stable(params, bath)
    if cfg.converge and stable:
        try:
            conv = converge_cutoff(cfg, params, bath)
            return conv.state, conv.state_spec, conv.residual, OK, conv.trail
        except UnconvergedCutoffError as exc:
            log.warning("unconverged point %s: %s", params, exc)
            flag, trail = UNCONVERGED, exc.trail
        except (NoUniqueSteadyStateError, ConvergenceError) as exc:
            log.warning("solve failed at %s: %s", params, exc)
            flag, trail = FAILED, []
    else:
        flag, trail = (OK if stable else UNSTABLE), []
    try:
        rho, res = _solve(cfg, params, bath, cfg.spec)
    except (NoUniqueSteadyStateError, ConvergenceError) as exc:
        log.warning("solve failed at %s: %s", params, exc)
        return None, cfg.spec, math.nan, FAILED, trail
    return rho, cfg.spec, res, flag, trail


def _cutoff_label(spec: HilbertSpec) -> str:
    return f"{spec.cavity_dim}x{spec.mech_dim}"


# ---------------------------------------------------------------------------
# parallel map with ordered merge


def _pmap(fn, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _point_meta(rows_meta: list[dict]) -> dict:
    res = [m["residual"] for m in rows_meta if m["residual"] is not None and math.isfinite(m["residual"])]
    return {
        "max_residual": max(res) if res else None,
        "points": rows_meta,
    }


# ---------------------------------------------------------------------------
# sweeps


def _sweep_q_point(job):
    cfg, q, g_cm = job
    params = cfg.params.with_(q=float(q), g_cm=float(g_cm))
    rho, spec, res, flag, trail = _steady_point(cfg, params, None)
    if rho is None:
        num = (math.nan, math.nan)
    else:
        num = _variances(rho, spec, Quadrature.Y)
    ana = analytic_variance_coherent(SemiclassicalParams.from_system(params))[:2]
    row = (float(q), float(g_cm), num[0], num[1], ana[0], ana[1], res, _cutoff_label(spec), flag)
    return row, {"q": float(q), "g_cm": float(g_cm), "residual": res, "cutoff_used": _cutoff_label(spec), "flag": flag, "trail": trail}


def run_sweep_q(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Numeric and analytic ``Var(Y)`` of both modes per ``(q, g_cm)``."""
    qs = cfg.sweep("q", np.linspace(0.0, 0.04, 9))
    gs = cfg.sweep("g_cm", [cfg.params.g_cm])
    jobs = [(cfg, q, g) for g, q in itertools.product(gs, qs)]
    out = _pmap(_sweep_q_point, jobs, threads)
    cols = ["q", "g_cm", "var_ya_num", "var_yb_num", "var_ya_ana", "var_yb_ana", "residual", "cutoff_used", "flag"]
    return Table(cols, [r for r, _ in out], _point_meta([m for _, m in out]))


def _sweep_r_point(job):
    cfg, r, g_cm = job
    params = cfg.params.with_(g_cm=float(g_cm), q=0.0)
    bath = SqueezedBathParams(r=float(r), theta=(cfg.bath or SqueezedBathParams()).theta)
    rho, spec, res, flag, trail = _steady_point(cfg, params, bath)
    num = (math.nan, math.nan) if rho is None else _variances(rho, spec, Quadrature.X)
    ana = analytic_variance_bath(SemiclassicalParams.from_system(params), bath)[:2]
    row = (float(r), float(g_cm), num[0], num[1], ana[0], ana[1], res, _cutoff_label(spec), flag)
    return row, {"r": float(r), "g_cm": float(g_cm), "residual": res, "cutoff_used": _cutoff_label(spec), "flag": flag, "trail": trail}


def run_sweep_r(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Numeric and analytic ``Var(X)`` of both modes per ``(r, g_cm)`` under the squeezed bath."""
    rs = cfg.sweep("r", np.linspace(0.0, 0.5, 6))
    gs = cfg.sweep("g_cm", [cfg.params.g_cm])
    jobs = [(cfg, r, g) for g, r in itertools.product(gs, rs)]
    out = _pmap(_sweep_r_point, jobs, threads)
    cols = ["r", "g_cm", "var_xa_num", "var_xb_num", "var_xa_ana", "var_xb_ana", "residual", "cutoff_used", "flag"]
    return Table(cols, [r for r, _ in out], _point_meta([m for _, m in out]))


def _fidelity_point(job):
    cfg, axis, first, g_cm = job
    bath = cfg.bath
    if axis == "q":
        params = cfg.params.with_(q=float(first), g_cm=float(g_cm))
    else:
        params = cfg.params.with_(g_ac=float(first), g_cm=float(g_cm), q=0.0)
        bath = bath or SqueezedBathParams()

    def observe(rho, spec):
        return (_fidelity(rho, spec),)

    stable = _is_stable(params, bath)
    trail, flag = [], OK if stable else UNSTABLE
    rho, spec, res = None, cfg.spec, math.nan
    if cfg.converge and stable:
        try:
            conv = converge_cutoff(cfg, params, bath, observables=observe)
            rho, spec, res, trail = conv.state, conv.state_spec, conv.residual, conv.trail
        except UnconvergedCutoffError as exc:
            flag, trail = UNCONVERGED, exc.trail
        except (NoUniqueSteadyStateError, ConvergenceError):
            flag = FAILED
    if rho is None and flag != FAILED:
        try:
            rho, res = _solve(cfg, params, bath, spec)
        except (NoUniqueSteadyStateError, ConvergenceError):
            flag = FAILED
    F = math.nan if rho is None else _fidelity(rho, spec)
    row = (float(first), float(g_cm), F, res, _cutoff_label(spec), flag)
    return row, {axis: float(first), "g_cm": float(g_cm), "residual": res, "cutoff_used": _cutoff_label(spec), "flag": flag, "trail": trail}


def run_fidelity_maps(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Cavity-mechanics fidelity over ``(q, g_cm)`` (coherent pump) or ``(g_ac, g_cm)`` (bath)."""
    if cfg.experiment is Experiment.FIDELITY_MAP_GAC_GCM or (
        cfg.experiment is not Experiment.FIDELITY_MAP_Q_GCM and "g_ac" in cfg.sweeps
    ):
        axis, firsts = "g_ac", cfg.sweep("g_ac", [cfg.params.g_ac])
    else:
        axis, firsts = "q", cfg.sweep("q", [cfg.params.q])
    gs = cfg.sweep("g_cm", [1e-3, 5e-3, 1e-2])
    jobs = [(cfg, axis, a, g) for a, g in itertools.product(firsts, gs)]
    out = _pmap(_fidelity_point, jobs, threads)
    cols = [axis, "g_cm", "fidelity", "residual", "cutoff_used", "flag"]
    table = Table(cols, [r for r, _ in out], _point_meta([m for _, m in out]))
    table.meta["model"] = "coherent_pump" if axis == "q" else "squeezed_bath"
    return table


def run_time_evolution(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Both mode variances along the evolution from the ground state.

    The final sample is compared with the steady-state solver; the comparison
    lands in ``meta["steady_state"]``.
    """
    bath = cfg.bath
    params = cfg.params if bath is None else cfg.params.with_(q=0.0)
    spec = cfg.spec
    quad = _quadrature(bath)
    L = _liouvillian(params, bath, spec)
    opts = EvolveOptions(ground_state(spec), cfg.t_final, cfg.n_samples, cfg.rtol, cfg.atol)
    rows = []
    last = None
    max_trace_err = 0.0
    for t, rho in iter_evolve(L, opts):
        va, vb = _variances(rho, spec, quad)
        tr_err = abs(np.trace(rho) - 1)
        max_trace_err = max(max_trace_err, tr_err)
        rows.append((t, va, vb, float(np.real(np.trace(rho)))))
        last = rho
    q_name = quad.value
    cols = ["t", f"var_{q_name}a", f"var_{q_name}b", "trace"]
    rho_ss = steady_state(L, cfg.solver)
    ss = _variances(rho_ss, spec, quad)
    meta = {
        "cutoff_used": _cutoff_label(spec),
        "max_trace_error": max_trace_err,
        "steady_state": {
            f"var_{q_name}a": ss[0],
            f"var_{q_name}b": ss[1],
            "residual": residual(L, rho_ss),
            "trace_distance_to_final": trace_distance(last, rho_ss),
            "final_variance_gap": max(abs(rows[-1][1] - ss[0]), abs(rows[-1][2] - ss[1])),
        },
        "max_residual": residual(L, rho_ss),
    }
    return Table(cols, rows, meta)


def run_stability(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Eigenvalue verdict, closed-criterion verdict and the bisected threshold per ``q``."""
    base = SemiclassicalParams.from_system(cfg.params)
    qs = cfg.sweep("q", np.linspace(0.0, 0.06, 13))
    threshold = instability_threshold(base)
    rows = []
    for q in qs:
        p = replace(base, q=float(q))
        ok, eig = stability(p)
        eig = eig[np.lexsort((eig.imag, eig.real))]
        listing = ";".join(f"{e.real:.12e}{e.imag:+.12e}j" for e in eig)
        rows.append((float(q), float(eig.real.max()), ok, closed_form_stable(p), threshold, listing))
    cols = ["q", "max_real_eig", "is_stable", "closed_form_stable", "threshold", "eigenvalues"]
    meta = {
        "threshold": threshold,
        "closed_form_threshold": (base.kappa_a + base.kappa_b) / 4,
        "J": base.J,
        "max_residual": None,
    }
    return Table(cols, rows, meta)


def run_wigner(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Steady-state Wigner functions of both modes on a square grid."""
    bath = cfg.bath
    params = cfg.params if bath is None else cfg.params.with_(q=0.0)
    spec = cfg.spec
    rho, res = _solve(cfg, params, bath, spec)
    axis = np.linspace(-cfg.wigner_extent, cfg.wigner_extent, cfg.wigner_points)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    grid = X + 1j * Y
    wc = wigner(partial_trace(rho, Subsystem.CAVITY, spec), grid)
    wm = wigner(partial_trace(rho, Subsystem.MECH, spec), grid)
    rows = [
        (float(x), float(y), float(a), float(b))
        for x, y, a, b in zip(X.ravel(), Y.ravel(), wc.ravel(), wm.ravel())
    ]
    meta = {"cutoff_used": _cutoff_label(spec), "max_residual": res}
    return Table(["x", "y", "w_cavity", "w_mech"], rows, meta)


def run_converge(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Convergence trail of the quadrature variances for the configured point."""
    bath = cfg.bath
    params = cfg.params if bath is None else cfg.params.with_(q=0.0)
    try:
        conv = converge_cutoff(cfg, params, bath)
        trail, converged, meta_spec = conv.trail, True, _cutoff_label(conv.spec)
    except UnconvergedCutoffError as exc:
        trail, converged, meta_spec = exc.trail, False, None
    rows = [
        (step["cavity_dim"], step["mech_dim"], *step["observables"],
         math.nan if step["delta"] is None else step["delta"], step["residual"])
        for step in trail
    ]
    q_name = _quadrature(bath).value
    cols = ["cavity_dim", "mech_dim", f"var_{q_name}a", f"var_{q_name}b", "delta", "residual"]
    meta = {
        "converged": converged,
        "converged_spec": meta_spec,
        "max_residual": max(r[-1] for r in rows) if rows else None,
    }
    return Table(cols, rows, meta)


RUNNERS = {
    Experiment.SWEEP_Q: run_sweep_q,
    Experiment.SWEEP_R: run_sweep_r,
    Experiment.FIDELITY_MAP_Q_GCM: run_fidelity_maps,
    Experiment.FIDELITY_MAP_GAC_GCM: run_fidelity_maps,
    Experiment.TIME_EVOLUTION: run_time_evolution,
    Experiment.STABILITY: run_stability,
    Experiment.WIGNER: run_wigner,
    Experiment.CONVERGE: run_converge,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> Table:
    if cfg.experiment is None:
        raise ConfigError("no experiment selected")
    return RUNNERS[cfg.experiment](cfg, threads=threads)
