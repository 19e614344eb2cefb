"""Experiment orchestration behind the command line.

Every operation takes an :class:`ExperimentConfig`, writes its outputs under
an output directory and returns a :class:`RunResult` whose ``status`` is one
of the ``EXIT_*`` codes.  Each file embeds the resolved configuration and
the code version.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import estimates as est
from .config import ENV_PREFIX, ConvergenceSpec, EstimatesSpec, ExperimentConfig, LifespanSpec
from .diagonal import PhysicalState, from_diagonal, to_diagonal, transform_matrices
from .estimates import EstimateReport, fit_power
from .evolution import (
    BlowUpError,
    LinearPropagator,
    SolverConfig,
    Trajectory,
    simulate_kdvkdv,
    simulate_physical,
)
from .initial import GENERATOR, gaussian_field, make_state
from .io import write_csv, write_snapshot
from .spectral import (
    Grid2D,
    SpectralField,
    forward_transform,
    fractional_derivative,
    l2_norm,
    partial,
    riesz,
)

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_BLOWUP",
    "EXIT_INVARIANT",
    "EXIT_IO",
    "RunResult",
    "code_version",
    "simulate_config",
    "run_simulate",
    "run_lifespan_scan",
    "run_convergence",
    "energy_drift_study",
    "run_estimates",
    "ESTIMATE_SCENARIOS",
    "run_check",
    "resolve_jobs",
    "resolve_out",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_INVARIANT = 4
EXIT_IO = 5

CURL_LIMIT = 1e-8
DIAGNOSTIC_COLUMNS = ("t", "H", "eta_Hs", "v_Hs", "curl", "w0")


def code_version() -> str:
    from . import __version__

    return f"bsq2d {__version__}"


@dataclass
class RunResult:
    status: int
    paths: list[Path] = field(default_factory=list)
    reports: list[EstimateReport] = field(default_factory=list)
    trajectory: Optional[Trajectory] = None
    message: str = ""


def resolve_out(out: Optional[str]) -> Path:
    """``--out`` wins, then ``BSQ2D_OUT``, then ``./bsq2d-out``."""
    return Path(out or os.environ.get(ENV_PREFIX + "OUT") or "bsq2d-out")


def resolve_jobs(jobs: Optional[int]) -> int:
    """``--jobs`` wins, then ``BSQ2D_JOBS``, then 1."""
    if jobs is None:
        env = os.environ.get(ENV_PREFIX + "JOBS")
        jobs = int(env) if env else 1
    return max(1, int(jobs))


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    meta = {"config": cfg.resolved_json(), "version": code_version(), "generator": GENERATOR}
    meta.update({k: v if isinstance(v, str) else json.dumps(v, sort_keys=True) for k, v in extra.items()})
    return meta


def _map(func: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [func(*it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(func, *zip(*items)))


# --- simulate ---------------------------------------------------------------


def simulate_config(
    cfg: ExperimentConfig,
    epsilon: Optional[float] = None,
    scale: float = 1.0,
    grid: Optional[Grid2D] = None,
    **solver_overrides,
) -> Trajectory:
    """Run the model in ``cfg``; the scaled KdV-KdV system goes through the
    diagonal variables, any other abcd system through the physical ones."""
    eps = cfg.model.epsilon if epsilon is None else epsilon
    params = cfg.model.params(eps)
    grid = grid or cfg.grid.build()
    u0 = cfg.initial.build(grid, cfg.seed, scale)
    solver = cfg.solver.build(**solver_overrides)
    if cfg.model.is_scaled_kdv:
        return simulate_kdvkdv(u0, eps, solver)
    return simulate_physical(u0, params, solver, curl_free=u0.is_curl_free(1e-10))


def _diagnostic_rows(traj: Trajectory, columns) -> list[list]:
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([t] + [traj.diagnostics[c][i] for c in columns[1:]])
    return rows


def _breached(traj: Trajectory, kdv: bool) -> bool:
    if "invariant breach" in traj.flags:
        return True
    if kdv:
        ref = max(float(np.max(traj.diagnostics["v_Hs"])), 1e-300)
        return bool(np.max(traj.diagnostics["w0"]) > CURL_LIMIT * ref or np.max(traj.diagnostics["curl"]) > CURL_LIMIT * ref)
    return False


def run_simulate(cfg: ExperimentConfig, out: Path) -> RunResult:
    """Diagnostics CSV, snapshots at the configured stride and a
    ``manifest.json`` carrying the resolved config for the snapshots."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    kdv = cfg.model.is_scaled_kdv
    columns = list(DIAGNOSTIC_COLUMNS) + ([] if kdv else ["Y"])
    status, message = EXIT_OK, "completed"
    try:
        traj = simulate_config(cfg)
    except BlowUpError as exc:
        traj, status, message = exc.trajectory, EXIT_BLOWUP, str(exc)
    eps = cfg.model.epsilon
    paths = [write_csv(out / "diagnostics.csv", columns, _diagnostic_rows(traj, columns), _meta(cfg, status=traj.status))]
    for i, (t, state) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        paths.append(write_snapshot(out / f"snapshot_{i:05d}.bsq2", state, eps, t))
    # the binary layout has no room for metadata, so snapshots get a sidecar
    manifest = {"config": json.loads(cfg.resolved_json()), "version": code_version(), "generator": GENERATOR,
                "status": traj.status, "snapshots": [p.name for p in paths[1:]]}
    paths.append(out / "manifest.json")
    paths[-1].write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    if status == EXIT_OK and _breached(traj, kdv):
        status, message = EXIT_INVARIANT, "invariant breach"
    return RunResult(status, paths, [], traj, message)


# --- lifespan ---------------------------------------------------------------


def _lifespan_job(cfg_json: str, epsilon: float, t_end: float, scale: float, stop: Optional[float]):
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    try:
        traj = simulate_config(cfg, epsilon, scale, t_end=t_end, stop_factor=stop)
    except BlowUpError as exc:
        traj = exc.trajectory
    return traj.doubling_time, traj.max_norm_ratio, traj.final_time, traj.status


def run_lifespan_scan(cfg: ExperimentConfig, out: Optional[Path] = None, jobs: int = 1) -> EstimateReport:
    """``H^s`` doubling time against ``eps`` and a small-data boundedness check.

    Each run stops at twice the initial norm or at ``t_max = t_max_coefficient / eps``.
    Censored runs enter the fit with ``t_max``, a lower bound on their
    doubling time.  The fit passes when the slope of ``log T`` against
    ``log eps`` is at most ``exponent_bound``.  If every run is censored the
    report is inconclusive (``passed = None``).
    """
    spec = cfg.experiment
    if not isinstance(spec, LifespanSpec):
        raise ValueError("configuration is not a lifespan experiment")
    eps = np.array(spec.epsilons, dtype=float)
    t_max = spec.t_max_coefficient / eps
    payload = cfg.resolved_json()
    long_jobs = [(payload, e, t, 1.0, 2.0) for e, t in zip(eps, t_max)]
    short_jobs = [(payload, e, spec.window / math.sqrt(e), spec.small_amplitude_factor, None) for e in eps]
    results = _map(_lifespan_job, long_jobs + short_jobs, jobs)
    long, short = results[: eps.size], results[eps.size :]
    doubling = np.array([np.nan if r[0] is None else r[0] for r in long])
    censored = np.isnan(doubling)
    lifespans = np.where(censored, t_max, doubling)
    small_ratio = np.array([r[1] for r in short])
    bounded = small_ratio <= spec.bound_factor
    slope, resid = fit_power(eps, lifespans)
    if censored.all():
        passed, note = None, "every run censored: inconclusive"
    else:
        passed = bool(slope <= spec.exponent_bound and bounded.all())
        note = f"fitted exponent {slope:.3f} (bound {spec.exponent_bound}); censored runs: {int(censored.sum())}"
    ref = lifespans[0] * (eps / eps[0]) ** -0.5
    report = EstimateReport(
        "lifespan",
        {"epsilons": eps.tolist(), "t_max": t_max.tolist(), "exponent_bound": spec.exponent_bound,
         "small_amplitude_factor": spec.small_amplitude_factor, "window": spec.window},
        eps,
        lifespans,
        ref,
        {"exponent": slope, "max_small_ratio": float(small_ratio.max()), "small_ratios": small_ratio.tolist(),
         "censored": censored.tolist()},
        {"exponent": resid},
        passed,
        ~censored,
        [note],
    )
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [(e, d, tm, c, r) for e, d, tm, c, r in zip(eps, lifespans, t_max, censored, small_ratio)]
        write_csv(out / "lifespan.csv", ["epsilon", "doubling_time", "t_max", "censored", "small_data_max_ratio"], rows,
                  _meta(cfg, fitted=report.fitted["exponent"], passed=passed))
    return report


# --- convergence ------------------------------------------------------------


def _state_distance(a: PhysicalState, b: PhysicalState) -> float:
    """L2 distance, zero padding the coarser state's spectrum."""
    ga, gb = a.grid, b.grid
    if ga.shape == gb.shape:
        return float(math.sqrt(sum(l2_norm(x - y) ** 2 for x, y in zip(a.fields, b.fields))))
    if ga.nx > gb.nx:
        a, b = b, a
        ga, gb = gb, ga
    total = 0.0
    ia = ga.index[0] % gb.nx, ga.index[1] % gb.ny
    for x, y in zip(a.fields, b.fields):
        pad = np.zeros(gb.shape, dtype=complex)
        pad[ia] = x.coeffs
        total += gb.area * np.sum(np.abs(pad - y.coeffs) ** 2)
    return float(math.sqrt(total))


def _state_norm(u: PhysicalState) -> float:
    return float(math.sqrt(sum(l2_norm(f) ** 2 for f in u.fields)))


def run_convergence(cfg: ExperimentConfig, out: Optional[Path] = None, roundoff: float = 1e-11):
    """Temporal orders from successive step halvings and spatial
    self-convergence against the finest grid.

    Returns ``(temporal, spatial)`` reports.  Non-monotone error sequences
    are flagged in the notes and fail the report.  Each spatial error above
    ``roundoff`` must shrink by at least 1e3 at the next doubling; with a
    single comparison no rate exists and the spatial report is inconclusive.
    """
    spec = cfg.experiment
    if not isinstance(spec, ConvergenceSpec):
        raise ValueError("configuration is not a convergence experiment")
    t_end = spec.t_end or cfg.solver.t_end
    dts = np.array(spec.dts)
    finals = [simulate_config(cfg, t_end=t_end, dt=dt, diagnostics_stride=10**9).final_state for dt in dts]
    scale = max(_state_norm(finals[-1]), 1e-300)
    diffs = np.array([_state_distance(a, b) / scale for a, b in zip(finals, finals[1:])])
    linear = not cfg.solver.nonlinear
    notes = []
    if linear:
        orders = np.full(diffs.size - 1, np.nan)
        t_ok = bool(np.all(diffs < 1e-12))
        notes.append("linear run: step size only enters through roundoff")
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            orders = np.log2(diffs[:-1] / diffs[1:])
        monotone = bool(np.all(np.diff(diffs) < 0))
        if not monotone:
            notes.append("non-monotone temporal errors")
        t_ok = monotone and bool(np.all((orders >= 3.8) & (orders <= 4.2)))
    temporal = EstimateReport(
        "convergence_time", {"dts": dts.tolist(), "t_end": t_end, "scheme": cfg.solver.scheme.value},
        dts[:-1], diffs, dts[:-1] ** 4 * diffs[0] / dts[0] ** 4, {"orders": orders.tolist()}, {}, t_ok, None, notes,
    )

    nxs = np.array(spec.nxs)
    aspect = cfg.grid.ny / cfg.grid.nx
    dt_space = float(dts[-1])
    states = [
        simulate_config(cfg, grid=cfg.grid.build(int(n), int(round(n * aspect))), t_end=t_end, dt=dt_space,
                        diagnostics_stride=10**9).final_state
        for n in nxs
    ]
    ref = states[-1]
    scale = max(_state_norm(ref), 1e-300)
    errs = np.array([_state_distance(s, ref) / scale for s in states[:-1]])
    s_notes = []
    ok = True
    for e_coarse, e_fine in zip(errs, errs[1:]):
        if e_fine > roundoff and e_coarse / e_fine < 1e3:
            ok = False
        if e_fine > e_coarse and e_coarse > roundoff:
            s_notes.append("non-monotone spatial errors")
            ok = False
    if errs.size == 1 and errs[0] > roundoff:
        s_notes.append("single comparison: refinement rate not measured")
        ok = None
    spatial = EstimateReport(
        "convergence_space", {"nxs": nxs.tolist(), "dt": dt_space, "roundoff": roundoff},
        nxs[:-1].astype(float), errs, np.full(errs.size, roundoff), {"errors": errs.tolist()}, {}, ok, None, s_notes,
    )
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "convergence_time.csv", ["dt", "difference_to_next", "order"],
                  [(d, e, o) for d, e, o in zip(dts, diffs, list(orders) + [None])], _meta(cfg, passed=t_ok))
        write_csv(out / "convergence_space.csv", ["nx", "error_vs_finest"], list(zip(nxs, errs)), _meta(cfg, passed=ok))
    return temporal, spatial


def energy_drift_study(u0: PhysicalState, epsilon: float, t_end: float, dts: Sequence[float]) -> EstimateReport:
    """Relative Hamiltonian drift at ``t_end`` for each step and the
    observed orders between successive halvings."""
    drifts = []
    for dt in dts:
        traj = simulate_kdvkdv(u0, epsilon, SolverConfig(dt=dt, t_end=t_end, diagnostics_stride=10**9))
        h = traj.diagnostics["H"]
        drifts.append(abs(h[-1] - h[0]) / abs(h[0]))
    drifts = np.array(drifts)
    dts = np.asarray(dts, dtype=float)
    orders = np.log(drifts[:-1] / drifts[1:]) / np.log(dts[:-1] / dts[1:])
    return EstimateReport(
        "energy_drift", {"epsilon": epsilon, "t_end": t_end}, dts, drifts, drifts[0] * (dts / dts[0]) ** 4,
        {"orders": orders.tolist(), "min_order": float(orders.min())}, {}, bool(orders.min() >= 3.8), None, [],
    )


# --- estimates --------------------------------------------------------------


def exponent_table(alphas: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4)) -> EstimateReport:
    """``(q, kappa)`` per ``alpha``; checks the ``alpha = 0`` root, the quadratic
    residuals and the limits ``q -> 2``, ``kappa -> 5/8`` as ``alpha -> 1/2``."""
    alphas = np.asarray(alphas, dtype=float)
    qk = np.array([est.strichartz_exponent(a) for a in alphas])
    q0 = (7 + math.sqrt(13)) / 3
    err = abs(qk[alphas == 0, 0] - q0).max(initial=0.0) if (alphas == 0).any() else 0.0
    q = qk[:, 0]
    residual = float(np.max(np.abs(3 * q * q - 2 * (7 - 2 * alphas) * q + 12)))
    q_lim, k_lim = est.strichartz_exponent_limit()
    limit_err = max(abs(q_lim - 2.0), abs(k_lim - 0.625))
    fitted = {"q0_error": float(err), "quadratic_residual": residual, "limit_error": float(limit_err)}
    return EstimateReport(
        "exponents", {"alphas": alphas.tolist()}, alphas, q, qk[:, 1],
        fitted, {}, bool(max(fitted.values()) < 1e-12), None, ["measured column: q, reference column: kappa"],
    )


def decay_small_t(n: int = 2048, L: float = 128.0, K: float = 20.0, n_times: int = 8) -> EstimateReport:
    """``eps = 1``, ``beta = 0``: flat band-limited bump, ``t`` in ``[10^-2.5, 10^-1.7]``,
    inside the wrap-around horizon ``t = 0.023``."""
    g = Grid2D(n, n, L, L)
    return est.decay_scan(1.0, 0.0, est.bandlimited_bump(g, K), np.geomspace(10**-2.5, 10**-1.7, n_times))


def decay_large_t(n: int = 1024, L: float = 160.0, K: float = 3.3, n_times: int = 8) -> EstimateReport:
    """``eps = 0.01``: Gaussian spectrum, ``t`` in ``[10^0.5, 10^1.1]``, inside the
    wrap-around horizon ``t = 14.1``."""
    g = Grid2D(n, n, L, L)
    return est.decay_scan(0.01, 0.0, est.bandlimited_bump(g, K, "gaussian"), np.geomspace(10**0.5, 10**1.1, n_times))


_EPS_SWEEP = (1.0, 0.25, 1.0 / 16.0)


def _estimate_grid():
    return Grid2D(256, 256, 64.0, 64.0)


def _narrow_gaussian(g: Grid2D, sigma: float = 0.3) -> SpectralField:
    x, y = g.mesh
    return forward_transform(np.exp(-((x - g.Lx / 2) ** 2 + (y - g.Ly / 2) ** 2) / (2 * sigma**2)), g)


def strichartz_scenario(alpha: float = 0.0) -> EstimateReport:
    """Norm exponent over ``eps in {1, 1/4, 1/16}``, ``T = 1``, band ``K = 2``."""
    g = _estimate_grid()
    return est.strichartz_scaling(_EPS_SWEEP, alpha, 1.0, est.bandlimited_bump(g, 2.0))


def local_smoothing_scenario() -> EstimateReport:
    g = _estimate_grid()
    return est.local_smoothing_scaling(_EPS_SWEEP, 1.0, _narrow_gaussian(g), est.CubePartition(g))


def maximal_scenario() -> EstimateReport:
    g = _estimate_grid()
    return est.maximal_time_scan(0.25, (0.25, 0.5, 1.0), 2.0, _narrow_gaussian(g), est.CubePartition(g))


def bessel_scenario(epsilon: float = 0.1, beta: float = 0.0, s_max: float = 12.0, n: int = 1024, L: float = 64 * math.pi) -> EstimateReport:
    """Radial kernel by quadrature against the same kernel synthesized on a grid.

    Coefficients ``taper(|xi|) / area`` give a grid field equal to the kernel
    divided by ``2 pi`` up to the periodic images and the lattice sum error
    from the conical point of ``|xi|`` at the origin, a few parts in 1e6 for
    the default box.
    """
    g = Grid2D(n, n, L, L)
    taper = est.flat_taper(s_max)
    t = 1.0
    coeffs = taper(g.kmag) * np.where(g.kmag > 0, g.kmag, 0.0) ** beta / g.area if beta else taper(g.kmag) / g.area
    field_ = SpectralField(g, coeffs * np.exp(1j * t * (epsilon * g.kmag**3 - g.kmag))).to_physical()
    idx = np.array([0, 2, 5, 10, 20])
    r = idx * g.dx
    grid_vals = 2 * math.pi * field_[idx, 0]
    quad = np.array([est.bessel_kernel(t, ri, epsilon, beta, s_max) for ri in r])
    err = float(np.max(np.abs(quad - grid_vals)) / np.max(np.abs(quad)))
    return EstimateReport(
        "bessel", {"epsilon": epsilon, "beta": beta, "t": t, "s_max": s_max}, r, np.abs(quad), np.abs(grid_vals),
        {"relative_difference": err}, {}, bool(err < 1e-5), None, [],
    )


ESTIMATE_SCENARIOS: dict[str, Callable[[], EstimateReport]] = {
    "exponents": exponent_table,
    "decay_small_t": decay_small_t,
    "decay_large_t": decay_large_t,
    "strichartz": strichartz_scenario,
    "local_smoothing": local_smoothing_scenario,
    "maximal": maximal_scenario,
    "oscillatory": est.oscillatory_scan,
    "bessel": bessel_scenario,
}


def _estimate_job(name: str) -> EstimateReport:
    return ESTIMATE_SCENARIOS[name]()


def run_estimates(cfg: ExperimentConfig, out: Optional[Path] = None, jobs: int = 1) -> list[EstimateReport]:
    """Run the named scenarios; one CSV per report plus ``summary.csv``."""
    spec = cfg.experiment
    names = list(spec.names) if isinstance(spec, EstimatesSpec) else []
    reports = _map(_estimate_job, [(n,) for n in names], jobs)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for rep in reports:
            write_csv(out / f"estimate_{rep.name}.csv", ["x", "measured", "reference", "trusted"],
                      [(r["x"], r["measured"], r["reference"], r["trusted"]) for r in rep.rows()],
                      _meta(cfg, fitted=_jsonable(rep.fitted), passed=rep.passed))
        write_csv(out / "summary.csv", ["name", "passed", "fitted"],
                  [(rep.name, rep.passed, json.dumps(_jsonable(rep.fitted), sort_keys=True)) for rep in reports], _meta(cfg))
    return reports


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# --- invariant suite --------------------------------------------------------


def _check_operators(g: Grid2D, f: SpectralField) -> float:
    zero_mode = (g.kx == 0) & (g.ky == 0)
    f = SpectralField(g, np.where(g.nyquist_mask | zero_mode, 0, f.coeffs))
    d1 = fractional_derivative(1.0, f)
    alt = riesz(1, partial(1, f)) + riesz(2, partial(2, f))
    e1 = float(np.max(np.abs(d1.coeffs - alt.coeffs)))
    rr = riesz(1, riesz(1, f)) + riesz(2, riesz(2, f))
    e2 = float(np.max(np.abs(-rr.coeffs - f.coeffs)))
    P, Pinv = transform_matrices(g)
    e3 = float(np.max(np.abs(P @ Pinv - np.eye(3))))
    return max(e1, e2, e3)


def _check_propagator(g: Grid2D, f: SpectralField, eps: float) -> float:
    prop = LinearPropagator(g, eps)
    back = LinearPropagator(g, eps, -1)
    unit = abs(l2_norm(prop.apply(f, 0.7)) - l2_norm(f)) / l2_norm(f)
    group = np.max(np.abs(prop.apply(prop.apply(f, 0.3), 0.4).coeffs - prop.apply(f, 0.7).coeffs))
    rev = np.max(np.abs(back.apply(prop.apply(f, 0.7), 0.7).coeffs - f.coeffs))
    return float(max(unit, group / np.max(np.abs(f.coeffs)), rev / np.max(np.abs(f.coeffs))))


def run_check(cfg: Optional[ExperimentConfig] = None, out: Optional[Path] = None) -> RunResult:
    """Fast invariant suite: operator identities, propagator algebra, and a
    short nonlinear KdV-KdV run with energy, curl and ``w0`` control."""
    g = Grid2D(64, 64, 16 * math.pi, 16 * math.pi)
    eta = gaussian_field(g, 0.5, 3.0)
    u0 = make_state(eta, "potential", gaussian_field(g, 0.5, 3.0))
    rows = []
    rows.append(("operator_identities", _check_operators(g, eta), 1e-10))
    rows.append(("propagator_algebra", _check_propagator(g, eta, 0.1), 1e-12))
    w = to_diagonal(u0)
    rows.append(("diagonal_round_trip", _state_distance(from_diagonal(w), u0) / _state_norm(u0), 1e-12))
    traj = simulate_kdvkdv(u0, 0.1, SolverConfig(dt=0.01, t_end=1.0, diagnostics_stride=10))
    h = traj.diagnostics["H"]
    rows.append(("energy_drift", float(abs(h[-1] - h[0]) / abs(h[0])), 1e-6))
    vref = float(np.max(traj.diagnostics["v_Hs"]))
    rows.append(("curl_free", float(np.max(traj.diagnostics["curl"])) / vref, CURL_LIMIT))
    rows.append(("w0_level", float(np.max(traj.diagnostics["w0"])) / vref, CURL_LIMIT))
    ok = all(v < tol for _, v, tol in rows)
    paths = []
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(cfg) if cfg is not None else {"version": code_version()}
        paths.append(write_csv(out / "check.csv", ["check", "value", "tolerance", "passed"],
                               [(n, v, tol, v < tol) for n, v, tol in rows], meta))
    msg = "\n".join(f"{'PASS' if v < tol else 'FAIL'} {n}: {v:.3e} (< {tol:g})" for n, v, tol in rows)
    return RunResult(EXIT_OK if ok else EXIT_INVARIANT, paths, [], traj, msg)
