"""
Layout optimization: particle swarm search over the full-scale descriptors
minimizing the mismatch between the currents the layout supports and the
reference currents from the pattern-synthesis step.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import io
from .em import Direction, footprint_point, incident_fields
from .errors import NoGroundIntersection
from .gstc import SurfaceCurrentField, SusceptibilityCell, SusceptibilityField, surface_currents
from .ipt import FarFieldOperator, IptConfig, IptResult, ipt_run
from .mapping import full_scale_susceptibilities
from .radiation import (default_grid, directivity_pencil, directivity_shaped, far_field,
                        footprint, pencil_mask, shaped_mask)
from .surrogate.oracle import OracleParams, oracle_field
from .surrogate.training import join_targets


@dataclass
class LayoutDescriptors:
    values: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[..., None]
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if self.values.ndim != 3 or self.values.shape[2] != self.bounds.shape[0]:
            raise ValueError("values must be (P, Q, D) with one bound pair per descriptor")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        tol = 1e-12 * (hi - lo)
        if np.any(self.values < lo - tol) or np.any(self.values > hi + tol):
            raise ValueError("descriptor values outside their bounds")

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_vector(cls, x, shape, bounds):
        return cls(np.reshape(x, shape), bounds)

    def vector(self):
        return self.values.ravel()

    def box(self):
        """Per-coordinate (lo, hi) of the flattened descriptor vector."""
        P, Q, D = self.shape
        lo = np.broadcast_to(self.bounds[:, 0], (P, Q, D)).ravel()
        hi = np.broadcast_to(self.bounds[:, 1], (P, Q, D)).ravel()
        return lo, hi


@dataclass
class SbdConfig:
    A: int = 10
    N: int = 10_000
    seed: int = 0
    w: float = 0.7298
    c1: float = 1.49618
    c2: float = 1.49618
    vclamp: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if self.A < 2:
            raise ValueError("swarm size A must be >= 2")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 < self.w < 1:
            raise ValueError("inertia w must lie in (0, 1)")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if not 0 < self.vclamp <= 1:
            raise ValueError("vclamp must lie in (0, 1]")


@dataclass
class SwarmState:
    x: np.ndarray
    v: np.ndarray
    f: np.ndarray
    pbest: np.ndarray
    pbest_f: np.ndarray
    gbest: np.ndarray
    gbest_f: float
    n: int
    rng: np.random.Generator = field(repr=False)


@dataclass(frozen=True)
class ForwardContext:
    """Everything the layout -> currents chain needs."""

    wave: object
    model: object
    lattice: object

    def currents(self, G):
        field_ = full_scale_susceptibilities(G, self.model, self.lattice)
        return surface_currents(field_, self.wave)


def current_mismatch(G, J_ref, ctx):
    """Cell-area weighted squared l2 distance between supported and reference currents."""
    J = ctx.currents(G).J
    ref = J_ref.J if isinstance(J_ref, SurfaceCurrentField) else np.asarray(J_ref)
    if J.shape != ref.shape:
        raise ValueError(f"current shapes differ: {J.shape} vs {ref.shape}")
    return float(ctx.lattice.cell_area * np.sum(np.abs(J - ref) ** 2))


def _reflect(x, v, lo, hi):
    """Mirror positions that left the box and flip the offending velocities."""
    over = x > hi
    x = np.where(over, 2 * hi - x, x)
    v = np.where(over, -v, v)
    under = x < lo
    x = np.where(under, 2 * lo - x, x)
    v = np.where(under, -v, v)
    return np.clip(x, lo, hi), v


def _evaluate(cost, X, pool):
    if pool is None:
        return np.array([cost(x) for x in X])
    return np.array(list(pool.map(cost, X)))


def pso_optimize(cost, bounds, cfg, init=None, callback=None):
    """Global-best particle swarm minimization inside a box.

    Parameters
    ----------
    cost : callable
        Maps a flat position vector to a non-negative scalar.
    bounds : tuple of arrays
        (lo, hi) per coordinate.
    init : array, optional
        Up to A starting positions replacing the first random particles.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    x_best : ndarray
    history : ndarray
        Best cost after each of the N iterations (the first one evaluates
        the initial swarm).
    state : SwarmState
    """
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    span = hi - lo
    vmax = cfg.vclamp * span
    rng = np.random.default_rng(cfg.seed)
    x = lo + rng.random((cfg.A, lo.size)) * span
    if init is not None:
        init = np.clip(np.atleast_2d(np.asarray(init, dtype=float)), lo, hi)[:cfg.A]
        x[:len(init)] = init
    v = np.clip(0.5 * (lo + rng.random((cfg.A, lo.size)) * span - x), -vmax, vmax)

    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        f = _evaluate(cost, x, pool)
        i = int(np.argmin(f))  # lowest index wins ties
        state = SwarmState(x, v, f, x.copy(), f.copy(), x[i].copy(), float(f[i]), 1, rng)
        history = [state.gbest_f]
        if callback:
            callback(state)
        for n in range(2, cfg.N + 1):
            r1 = rng.random(x.shape)
            r2 = rng.random(x.shape)
            v = (cfg.w * v + cfg.c1 * r1 * (state.pbest - x)
                 + cfg.c2 * r2 * (state.gbest - x))
            v = np.clip(v, -vmax, vmax)
            x, v = _reflect(x + v, v, lo, hi)
            f = _evaluate(cost, x, pool)
            better = f < state.pbest_f
            state.pbest[better] = x[better]
            state.pbest_f[better] = f[better]
            i = int(np.argmin(state.pbest_f))
            if state.pbest_f[i] < state.gbest_f:
                state.gbest = state.pbest[i].copy()
                state.gbest_f = float(state.pbest_f[i])
            state.x, state.v, state.f, state.n = x, v, f, n
            history.append(state.gbest_f)
            if callback:
                callback(state)
    finally:
        if pool is not None:
            pool.shutdown()
    return state.gbest.copy(), np.asarray(history), state


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass
class Scenario:
    lattice: object
    wave: object
    mount: object
    model: object
    bounds: np.ndarray
    target: Optional[Direction] = None
    polygons: Optional[list] = None
    mask_level_db: float = 0.0
    ipt_oversample: float = 1.0
    eval_oversample: float = 4.0
    footprint_window: tuple = (-60.0, 60.0, 0.0, 60.0)
    footprint_step: float = 0.5
    oracle_params: Optional[OracleParams] = None

    def __post_init__(self):
        if (self.target is None) == (self.polygons is None):
            raise ValueError("a scenario needs exactly one of a pencil target or ground polygons")
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        m = self.model
        if self.bounds.shape[0] != m.D:
            raise ValueError(f"scenario has D = {self.bounds.shape[0]}, model expects {m.D}")
        if self.lattice.P < m.Pp or self.lattice.Q < m.Qp:
            raise ValueError("lattice is smaller than the surrogate window")

    @property
    def anchor(self):
        return (self.target.u, self.target.v) if self.target is not None else (0.0, 0.0)

    def grid(self, oversample):
        return default_grid(self.lattice, self.wave, oversample, self.anchor)

    def mask(self, grid, reference_power):
        level = reference_power * 10 ** (self.mask_level_db / 10)
        if self.target is not None:
            return pencil_mask(grid, self.target, level)
        return shaped_mask(grid, self.mount, self.polygons, level)


@dataclass
class SynthesisConfig:
    ipt: IptConfig = field(default_factory=IptConfig)
    sbd: SbdConfig = field(default_factory=SbdConfig)
    warm_start: bool = True
    warm_spread: float = 0.02


@dataclass
class SynthesisReport:
    scenario: Scenario
    config: SynthesisConfig
    ipt: IptResult
    J_ref: SurfaceCurrentField
    layout: LayoutDescriptors
    delta_history: np.ndarray
    evaluation: dict

    @property
    def metrics(self):
        return self.evaluation["metrics"]

    def save(self, path):
        os.makedirs(path, exist_ok=True)
        ev = self.evaluation
        io.write_json(os.path.join(path, "report.json"), {
            "metrics": ev["metrics"],
            "ipt": {"iterations_run": self.ipt.iterations_run,
                    "termination_reason": self.ipt.termination_reason,
                    "gamma_first": float(self.ipt.gamma_history[0]),
                    "gamma_final": float(self.ipt.gamma_history[-1])},
            "sbd": {"iterations": int(len(self.delta_history)),
                    "delta_initial": float(self.delta_history[0]),
                    "delta_final": float(self.delta_history[-1])},
        })
        io.write_layout(os.path.join(path, "layout.csv"), self.layout.values)
        io.write_currents(os.path.join(path, "currents_ref.csv"), self.J_ref)
        io.write_currents(os.path.join(path, "currents_achieved.csv"), ev["currents"])
        io.write_farfield(os.path.join(path, "farfield.csv"), ev["far"])
        io.write_footprint(os.path.join(path, "footprint.csv"), ev["footprint"])
        io.write_delta_trace(os.path.join(path, "delta_trace.csv"), self.delta_history)
        io.write_gamma_trace(os.path.join(path, "gamma_trace.csv"), self.ipt.gamma_history)


def reference_currents(J_opt, wave, C):
    """Scale unit-magnitude IPT currents to a full-reflection current level.

    At broadside a cell with reflection R carries J = 2 R E_t, so the
    reference asks for |R| = 1 with the synthesized phases.
    """
    E, _ = incident_fields(wave, np.zeros(3))
    scale = 2 * np.linalg.norm(E[:2]) / C
    return J_opt.scaled(scale)


def curve_start(J_ref, model, lattice, wave, bounds):
    """Per-cell first guess from the model's binned single-cell response.

    Each bin of the stored response curve is applied uniformly to the
    aperture; every cell then takes the side whose current lies closest
    to its reference current.  Extra descriptors sit mid-range.  Returns
    None when the model carries no curve.
    """
    curve = model.meta.get("response_curve")
    if not curve or not curve.get("side"):
        return None
    psi_e, psi_m = join_targets(np.asarray(curve["targets"], dtype=float))
    best = np.full(lattice.shape, np.inf)
    G0 = np.empty(lattice.shape + (bounds.shape[0],))
    G0[:] = (bounds[:, 0] + bounds[:, 1]) / 2
    for side, pe, pm in zip(curve["side"], psi_e, psi_m):
        field_ = SusceptibilityField.uniform(lattice, SusceptibilityCell(pe, pm))
        J = surface_currents(field_, wave).J
        err = np.sum(np.abs(J - J_ref.J) ** 2, axis=-1)
        upd = err < best
        best[upd] = err[upd]
        G0[upd, 0] = side
    return np.clip(G0, bounds[:, 0], bounds[:, 1])


def warm_swarm(x0, box, cfg, spread):
    """x0 plus A - 1 copies jittered by ``spread`` of the box width.

    ``spread = 0`` keeps only x0 and leaves the other particles random.
    """
    if spread <= 0:
        return np.asarray(x0)[None]
    lo, hi = box
    rng = np.random.default_rng([cfg.seed, 1])
    jitter = rng.normal(scale=spread, size=(cfg.A - 1, x0.size)) * (hi - lo)
    return np.vstack([x0, np.clip(x0 + jitter, lo, hi)])


def _beam_metrics(far, scenario, mask_fine):
    out = {}
    peak = far.peak()
    out["peak_theta_deg"] = float(np.degrees(peak.theta))
    out["peak_phi_deg"] = float(np.degrees(peak.phi))
    try:
        out["beam_ground_point"] = list(footprint_point(peak, scenario.mount))
    except NoGroundIntersection:
        out["beam_ground_point"] = None
    if scenario.target is not None:
        out["peak_error_deg"] = float(np.degrees(peak.angle_to(scenario.target)))
        out["xi_pen_db"] = directivity_pencil(far, scenario.target)
    else:
        out["xi_sha_db"] = directivity_shaped(far, mask_fine)
    return out


def evaluate_layout(G, scenario, ideal=None):
    """Currents, pattern, footprint and figures of merit of a layout.

    The twin chain (surrogate + mapping + sheet model) gives the achieved
    quantities; when oracle parameters are set the same layout is also
    re-evaluated directly by the synthetic oracle as an independent check.
    """
    G = LayoutDescriptors(G, scenario.bounds).values
    ctx = ForwardContext(scenario.wave, scenario.model, scenario.lattice)
    grid = scenario.grid(scenario.eval_oversample)
    mask_fine = None if scenario.polygons is None else shaped_mask(
        grid, scenario.mount, scenario.polygons, 1.0)
    cur = ctx.currents(G)
    far = far_field(cur, scenario.wave, grid)
    fp = footprint(far, scenario.mount, scenario.footprint_window, scenario.footprint_step)
    metrics = {"achieved": _beam_metrics(far, scenario, mask_fine)}
    metrics["achieved"]["footprint_peak"] = list(fp.peak())
    if scenario.target is not None:
        try:
            metrics["target_ground_point"] = list(footprint_point(scenario.target, scenario.mount))
        except NoGroundIntersection:
            metrics["target_ground_point"] = None
    if ideal is not None:
        far_i = far_field(ideal, scenario.wave, grid)
        metrics["reference"] = _beam_metrics(far_i, scenario, mask_fine)
    if scenario.oracle_params is not None:
        field_o = oracle_field(G[..., 0], scenario.lattice, scenario.wave, scenario.oracle_params)
        far_o = far_field(surface_currents(field_o, scenario.wave), scenario.wave, grid)
        metrics["oracle"] = _beam_metrics(far_o, scenario, mask_fine)
    return {"metrics": metrics, "currents": cur, "far": far, "footprint": fp}


def synthesize(mask, scenario, cfg, progress=None):
    """Reference currents by IPT, then a PSO layout supporting them."""
    lat, wave = scenario.lattice, scenario.wave
    op = FarFieldOperator(lat, wave, mask.grid)
    res = ipt_run(mask, lat, cfg.ipt, wave, operator=op)
    J_ref = reference_currents(res.J_opt, wave, cfg.ipt.C)

    ctx = ForwardContext(wave, scenario.model, lat)
    shape = (lat.P, lat.Q, scenario.model.D)
    proto = LayoutDescriptors(np.broadcast_to(scenario.bounds[:, 0], shape), scenario.bounds)
    init = None
    if cfg.warm_start:
        G0 = curve_start(J_ref, scenario.model, lat, wave, scenario.bounds)
        if G0 is not None:
            init = warm_swarm(G0.ravel(), proto.box(), cfg.sbd, cfg.warm_spread)

    def cost(x):
        return current_mismatch(x.reshape(shape), J_ref, ctx)

    x_best, history, _ = pso_optimize(cost, proto.box(), cfg.sbd, init=init, callback=progress)
    layout = LayoutDescriptors(x_best.reshape(shape), scenario.bounds)
    evaluation = evaluate_layout(layout.values, scenario, ideal=J_ref)
    evaluation["metrics"]["ipt_gamma_final"] = float(res.gamma_history[-1])
    evaluation["metrics"]["delta_final"] = float(history[-1])
    return SynthesisReport(scenario, cfg, res, J_ref, layout, history, evaluation)
