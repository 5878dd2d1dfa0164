"""
Ordinary Kriging with the exponential correlation kernel

    Z(x, x') = exp(-sum_n c_n |x_n - x'_n|)

One model per small-scale cell; its 12 real outputs (Re/Im of the six
diagonal susceptibility entries) share the cell's hyperparameters c,
tuned by maximizing the summed concentrated log-likelihood.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

from ..errors import IllConditioned
from ..gstc import SusceptibilityCell
from .oracle import SmallScaleLayout
from .training import join_targets, response_curve

FORMAT_VERSION = 1
TUNING_MODES = ("tied", "untied")


@dataclass
class KrigingConfig:
    tuning: str = "tied"
    n_starts: int = 8
    max_steps: int = 200
    step_tol: float = 1e-3
    c_bounds: tuple = (1e-3, 1e3)
    nugget: float = 1e-10
    max_nugget: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.tuning not in TUNING_MODES:
            raise ValueError(f"tuning must be one of {TUNING_MODES}")
        if self.n_starts < 1 or self.max_steps < 1:
            raise ValueError("n_starts and max_steps must be >= 1")


@dataclass
class CellModel:
    c: np.ndarray
    beta: np.ndarray
    weights: np.ndarray
    nugget: float
    loglik: float = float("nan")


@dataclass
class KrigingModel:
    """Fitted surrogate: shared training inputs plus one CellModel per cell."""

    Pp: int
    Qp: int
    D: int
    bounds: np.ndarray
    X: np.ndarray
    cells: list
    tuning: str = "tied"
    meta: dict = field(default_factory=dict)

    @property
    def n_inputs(self):
        return self.Pp * self.Qp * self.D

    def cell(self, p, q):
        """Model of small-scale cell (p', q'), 1-based."""
        return self.cells[(p - 1) + self.Pp * (q - 1)]

    def to_json(self):
        doc = {
            "format_version": FORMAT_VERSION,
            "Pp": self.Pp, "Qp": self.Qp, "D": self.D,
            "bounds": np.asarray(self.bounds).tolist(),
            "tuning": self.tuning,
            "meta": self.meta,
            "X": self.X.tolist(),
            "cells": [{"c": m.c.tolist(), "beta": m.beta.tolist(),
                       "weights": m.weights.tolist(), "nugget": m.nugget,
                       "loglik": m.loglik} for m in self.cells],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {doc.get('format_version')!r}")
        cells = [CellModel(np.array(m["c"]), np.array(m["beta"]), np.array(m["weights"]),
                           m["nugget"], m["loglik"]) for m in doc["cells"]]
        return cls(doc["Pp"], doc["Qp"], doc["D"], np.array(doc["bounds"]),
                   np.array(doc["X"], dtype=float).reshape(-1, doc["Pp"] * doc["Qp"] * doc["D"]),
                   cells, doc["tuning"], doc["meta"])

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def correlation(XA, XB, c):
    return np.exp(-cdist(XA, XB, "cityblock", w=c))


def _factor(R0, nugget, max_nugget):
    n = R0.shape[0]
    while True:
        try:
            L = linalg.cholesky(R0 + nugget * np.eye(n), lower=True)
            if np.all(np.diag(L) > 0):
                return L, nugget
        except linalg.LinAlgError:
            pass
        nugget *= 10
        if nugget > max_nugget * (1 + 1e-12):
            raise IllConditioned("correlation matrix not positive definite after nugget escalation")


def _gls(L, Y):
    """GLS constant mean, residual weights R^-1 (y - 1 beta) and sigma^2 per column."""
    n = L.shape[0]
    ones = np.ones(n)
    Ri1 = linalg.cho_solve((L, True), ones)
    RiY = linalg.cho_solve((L, True), Y)
    beta = (ones @ RiY) / (ones @ Ri1)
    W = RiY - np.outer(Ri1, beta)
    sigma2 = np.sum((Y - beta) * W, axis=0) / n
    return beta, W, sigma2


def _split_constant(Y):
    span = Y.max(axis=0) - Y.min(axis=0)
    scale = np.maximum(np.abs(Y).max(axis=0), 1e-300)
    return span <= 1e-14 * scale


class _Likelihood:
    """Concentrated log-likelihood of one cell's varying outputs."""

    def __init__(self, X, Y, nugget, max_nugget, tie_dist):
        self.X = X
        self.Y = Y
        self.nugget = nugget
        self.max_nugget = max_nugget
        self.tie_dist = tie_dist
        self.cache = {}

    def __call__(self, c_t):
        """Log-likelihood at tied parameters c_t (one per tie group)."""
        key = c_t.tobytes()
        if key not in self.cache:
            self.cache[key] = self._eval(np.exp(-np.tensordot(c_t, self.tie_dist, axes=1)))
        return self.cache[key]

    def _eval(self, R0):
        try:
            L, nug = _factor(R0, self.nugget, self.max_nugget)
        except IllConditioned:
            return -np.inf
        _, _, sigma2 = _gls(L, self.Y)
        n, K = self.Y.shape
        if np.any(sigma2 <= 0):
            return -np.inf
        logdet = 2 * np.sum(np.log(np.diag(L)))
        return float(-0.5 * n * np.sum(np.log(sigma2)) - 0.5 * K * logdet)

    def value_and_grad(self, log_c):
        """Negative log-likelihood and its gradient in log c (untied tuning)."""
        c = np.exp(log_c)
        R0 = correlation(self.X, self.X, c)
        L, _ = _factor(R0, self.nugget, self.max_nugget)
        beta, W, sigma2 = _gls(L, self.Y)
        n, K = self.Y.shape
        logdet = 2 * np.sum(np.log(np.diag(L)))
        f = 0.5 * n * np.sum(np.log(sigma2)) + 0.5 * K * logdet
        Rinv = linalg.cho_solve((L, True), np.eye(n))
        S = (W / sigma2) @ W.T * 0.5
        M = (S - 0.5 * K * Rinv) * R0
        g = np.empty_like(log_c)
        for j in range(self.X.shape[1]):
            Dj = np.abs(self.X[:, j, None] - self.X[None, :, j])
            g[j] = c[j] * np.sum(M * Dj)
        return f, g


def _pattern_search(fun, x0, lo, hi, step0, max_steps, tol):
    """Compass search maximizing fun over the box [lo, hi] (log space)."""
    x = x0.copy()
    fx = fun(np.exp(x))
    step = step0
    for _ in range(max_steps):
        best, fbest = None, fx
        for i in range(x.size):
            for s in (step, -step):
                y = x.copy()
                y[i] = np.clip(y[i] + s, lo[i], hi[i])
                fy = fun(np.exp(y))
                if fy > fbest:
                    best, fbest = y, fy
        if best is None:
            step /= 2
            if step < tol:
                break
        else:
            x, fx = best, fbest
    return x, fx


def dedupe(X, Y):
    """Merge identical input rows, averaging their targets."""
    Xu, inv = np.unique(X, axis=0, return_inverse=True)
    inv = inv.ravel()
    if Xu.shape[0] == X.shape[0]:
        return X, Y
    Yu = np.zeros((Xu.shape[0], Y.shape[1]))
    np.add.at(Yu, inv, Y)
    Yu /= np.bincount(inv)[:, None]
    return Xu, Yu


def tied_distances(X, tie):
    """Per tie group, the (B, B) sum of |x_n - x'_n| over the group's inputs."""
    return np.stack([cdist(X[:, tie == t], X[:, tie == t], "cityblock")
                     for t in range(tie.max() + 1)])


def _tie_map(Pp, Qp, D):
    """Index of the tied parameter (descriptor d) for every input n."""
    return np.repeat(np.arange(D), Pp * Qp)


def fit_cell(X, Y, ranges, cfg, tie=None, rng=None, tie_dist=None):
    """Fit one cell's 12 outputs; returns a CellModel."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    const = _split_constant(Y)
    Yv = Y[:, ~const]
    inv_range = 1.0 / ranges
    lo_all = np.log(cfg.c_bounds[0] * inv_range)
    hi_all = np.log(cfg.c_bounds[1] * inv_range)

    if Yv.shape[1] == 0:
        c = np.sqrt(cfg.c_bounds[0] * cfg.c_bounds[1]) * inv_range
        loglik = 0.0
    else:
        tie = np.zeros(X.shape[1], dtype=int) if tie is None else tie
        n_t = tie.max() + 1
        if tie_dist is None:
            tie_dist = tied_distances(X, tie)
        lik = _Likelihood(X, Yv, cfg.nugget, cfg.max_nugget, tie_dist)
        lo = np.array([lo_all[tie == t].max() for t in range(n_t)])
        hi = np.array([hi_all[tie == t].min() for t in range(n_t)])

        best_x, best_f = None, -np.inf
        for _ in range(cfg.n_starts):
            x0 = lo + rng.random(n_t) * (hi - lo)
            x, fx = _pattern_search(lik, x0, lo, hi, (hi - lo).max() / 4,
                                    cfg.max_steps, cfg.step_tol)
            if fx > best_f:
                best_x, best_f = x, fx
        if best_x is None:
            raise IllConditioned("no hyperparameter start produced a factorizable correlation matrix")
        log_c = best_x[tie]
        loglik = best_f
        if cfg.tuning == "untied":
            res = optimize.minimize(lik.value_and_grad, log_c, jac=True, method="L-BFGS-B",
                                    bounds=list(zip(lo_all, hi_all)),
                                    options={"maxiter": cfg.max_steps})
            if np.isfinite(res.fun) and -res.fun > loglik:
                log_c, loglik = res.x, -float(res.fun)
        c = np.exp(log_c)

    L, nug = _factor(correlation(X, X, c), cfg.nugget, cfg.max_nugget)
    beta = np.empty(Y.shape[1])
    W = np.zeros_like(Y)
    beta[const] = Y[0, const]
    if Yv.shape[1]:
        b, w, _ = _gls(L, Yv)
        beta[~const] = b
        W[:, ~const] = w
    return CellModel(c, beta, W, nug, float(loglik))


def fit_ok(train, cfg=KrigingConfig()):
    """Fit the per-cell OK surrogate to a TrainingSet."""
    B, Pp, Qp, D = train.layouts.shape
    X_all = train.inputs()
    T = train.targets()
    ranges = np.repeat(train.bounds[:, 1] - train.bounds[:, 0], Pp * Qp)
    tie = _tie_map(Pp, Qp, D)
    rng = np.random.default_rng(cfg.seed)

    X, _ = dedupe(X_all, T[:, 0, 0])
    tie_dist = tied_distances(X, tie)
    cells = []
    for q in range(Qp):
        for p in range(Pp):
            _, Yc = dedupe(X_all, T[:, p, q])
            cells.append(fit_cell(X, Yc, ranges, cfg, tie, rng, tie_dist))
    return KrigingModel(Pp, Qp, D, train.bounds.copy(), X, cells, cfg.tuning,
                        {"B": int(B), "seed": int(cfg.seed),
                         "response_curve": response_curve(train)})


def predict_outputs(model, x, cell_index):
    """Real outputs (m, K) for input rows x (m, n) read at flat cells ``cell_index``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cell_index = np.broadcast_to(np.asarray(cell_index), (x.shape[0],))
    out = np.empty((x.shape[0], model.cells[0].weights.shape[1]))
    for k in np.unique(cell_index):
        rows = np.flatnonzero(cell_index == k)
        m = model.cells[k]
        r = correlation(x[rows], model.X, m.c)
        out[rows] = m.beta + r @ m.weights
    return out


def layout_vector(G_prime):
    """(Pp, Qp, D) descriptors to the model's input ordering."""
    return np.asarray(G_prime, dtype=float).transpose(2, 1, 0).ravel()


def predict(model, layout):
    """Per-cell susceptibilities predicted for a small-scale layout."""
    G = layout.G_prime if isinstance(layout, SmallScaleLayout) else np.asarray(layout, dtype=float)
    if G.ndim == 2:
        G = G[..., None]
    if G.shape != (model.Pp, model.Qp, model.D):
        raise ValueError(f"layout shape {G.shape} does not match the model "
                         f"({model.Pp}, {model.Qp}, {model.D})")
    x = layout_vector(G)
    n_cells = model.Pp * model.Qp
    Y = predict_outputs(model, np.repeat(x[None], n_cells, axis=0), np.arange(n_cells))
    # flat cell index k = p + Pp*q
    Y = Y.reshape(model.Qp, model.Pp, 12).transpose(1, 0, 2)
    psi_e, psi_m = join_targets(Y)
    return SusceptibilityCell(psi_e, psi_m)
