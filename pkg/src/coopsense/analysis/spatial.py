"""Spatial distributions: where interferers that break a link sit, and where
cooperators remain available, averaged over the interferer position and
start time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..channel import mean_rx_power
from .outage import (
    QuadratureError,
    _outage_kernel,
    _outage_value,
    _power_quad_nodes,
    cs_binding_power,
    decode_power_thresholds,
    interference_tolerance,
)
from .scenarios import (
    BirthTimeDist,
    GridSpec,
    QuadratureConfig,
    Scenario3,
    ScenarioCoop,
    euclid,
    gauss_legendre,
)

__all__ = [
    "HeatmapResult",
    "interferer_distribution",
    "coop_conditional",
    "coop_distribution",
    "heatmap",
]

_COINCIDENT = 1e-9


@dataclass(frozen=True)
class HeatmapResult:
    quantity: str
    xs: np.ndarray           # cell-center x coordinates (nx,)
    ys: np.ndarray           # cell-center y coordinates (ny,)
    values: np.ndarray       # (nx, ny), NaN where a cell hosts a fixed node

    def argmax_position(self):
        """(x, y) of the largest finite cell value."""
        vals = np.where(np.isnan(self.values), -np.inf, self.values)
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        return float(self.xs[i]), float(self.ys[j])

    def value_near(self, point, radius: float) -> float:
        """Mean of finite cell values within ``radius`` of ``point``."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        mask = (gx - point[0]) ** 2 + (gy - point[1]) ** 2 <= radius ** 2
        sel = self.values[mask]
        sel = sel[np.isfinite(sel)]
        if sel.size == 0:
            raise ValueError("no cells within radius of point")
        return float(sel.mean())


def _inv_means(points: np.ndarray, ref, props) -> np.ndarray:
    """Inverse mean received powers d^alpha / P; zero where d == 0 (so the
    corresponding survival factors collapse to their infinite-power limit)."""
    d = np.hypot(points[:, 0] - ref[0], points[:, 1] - ref[1])
    out = np.zeros_like(d)
    nz = d > _COINCIDENT
    out[nz] = d[nz] ** props.path_loss_exp / props.tx_power
    return out


def _ti_nodes(T: float, birth: BirthTimeDist, quad: QuadratureConfig,
              domain=None):
    """Birth-time quadrature nodes and density-weighted weights, keeping the
    negative and positive halves on separate smooth panels."""
    a, b = domain if domain is not None else (-T, T)
    a = max(a, -T)
    b = min(b, T)
    if b <= a:
        raise ValueError("empty birth-time domain")
    per_half = max(quad.ti_nodes // 2, 8)
    us, ws = [], []
    for lo, hi in ((a, min(b, 0.0)), (max(a, 0.0), b)):
        if hi > lo:
            x, w = gauss_legendre(lo, hi, per_half)
            us.append(x)
            ws.append(w * birth.pdf(x))
    return np.concatenate(us), np.concatenate(ws)


def _interferer_gate(points: np.ndarray, p_ref, props) -> np.ndarray:
    """CS idle probability between each point and a reference node."""
    margin = props.cs_threshold - props.noise_floor
    if margin <= 0:
        return np.zeros(len(points))
    invm = _inv_means(points, p_ref, props)
    return -np.expm1(-margin * invm)


def _interferer_map_at(u: float, points: np.ndarray, p_s, p_d, props, rates,
                       quad: QuadratureConfig) -> np.ndarray:
    """Access-gated outage probability for interferers at ``points``."""
    mean_sd = mean_rx_power(p_s, p_d, props)
    invm_id = _inv_means(points, p_d, props)
    pos = invm_id[invm_id > 0]
    min_mean_interf = (1.0 / pos.max()) if pos.size else math.inf
    star, nodes, weights, tol = _outage_kernel(
        u, rates, props, mean_sd, min_mean_interf, quad, quad.eta_nodes)
    outage = _outage_value(star, nodes, weights, tol, 1.0 / mean_sd, invm_id)
    return _interferer_gate(points, p_s, props) * np.clip(outage, 0.0, 1.0)


def interferer_distribution(s: Scenario3, birth: BirthTimeDist | None = None,
                            quad: QuadratureConfig | None = None) -> float:
    """Probability that the interferer gets channel access and breaks the
    link, averaged over its start-time distribution."""
    quad = quad or QuadratureConfig()
    birth = birth or BirthTimeDist(s.T)
    us, ws = _ti_nodes(s.T, birth, quad)
    pt = np.array([[s.p_i[0], s.p_i[1]]], dtype=float)
    vals = np.array([
        _interferer_map_at(abs(u), pt, s.p_s, s.p_d, s.props, s.rates, quad)[0]
        for u in us
    ])
    return float(np.clip(np.dot(ws, vals), 0.0, 1.0))


class _CoopAvailability:
    """Per-start-time kernels for the cooperator availability over one set of
    interferer positions, evaluated lazily for many cooperator positions."""

    def __init__(self, sc: ScenarioCoop, quad: QuadratureConfig,
                 pc_grid_points: np.ndarray):
        self.sc = sc
        self.quad = quad
        area = GridSpec.from_rect(sc.region_A, quad.area_grid.nx, quad.area_grid.ny)
        self.area_points = area.center_points()
        self.props = sc.props
        self.rates = sc.rates
        # extremes of the source-cooperator mean power over requested points,
        # used to lay out one shared node ladder
        d_sc = np.hypot(pc_grid_points[:, 0] - sc.p_s[0],
                        pc_grid_points[:, 1] - sc.p_s[1])
        d_sc = d_sc[d_sc > _COINCIDENT]
        if d_sc.size == 0:
            raise ValueError("no valid cooperator positions")
        self.mean_sc_max = sc.props.tx_power * d_sc.min() ** (-sc.props.path_loss_exp)
        self.mean_sc_min = sc.props.tx_power * d_sc.max() ** (-sc.props.path_loss_exp)
        self._cache = {}

    def _weights_at(self, u: float):
        """Interferer mass over the area grid at |start time| u and its sum."""
        key = round(float(u), 15)
        if key not in self._cache:
            imap = _interferer_map_at(abs(u), self.area_points, self.sc.p_s,
                                      self.sc.p_d, self.props, self.rates, self.quad)
            self._cache[key] = imap
        return self._cache[key]

    def minus_kernel(self, u: float):
        """Shared decode-only kernel: nodes, weights, tolerances."""
        # decay hint from the farthest plausible interferer-cooperator link
        span = max(self.sc.region_A.x_max - self.sc.region_A.x_min,
                   self.sc.region_A.y_max - self.sc.region_A.y_min) * 2.0
        min_mean = self.props.tx_power * span ** (-self.props.path_loss_exp)
        star, nodes, weights, tol = _outage_kernel(
            u, self.rates, self.props,
            self.mean_sc_max, min(min_mean, self.mean_sc_min),
            self.quad, self.quad.eta_nodes)
        return star, nodes, weights, tol

    def plus_kernel(self, u: float):
        star, bar = decode_power_thresholds(u, self.rates, self.props)
        tilde = cs_binding_power(u, self.rates, self.props, self.quad.rel_tol)
        hi = min(tilde, star + self.quad.eta_truncation_factor * self.mean_sc_max)
        nodes, weights = _power_quad_nodes(star, hi, max(hi - star, 1e-300),
                                           self.quad.eta_nodes)
        tol = (interference_tolerance(nodes, u, self.rates, self.props)
               if nodes.size else nodes)
        return star, tilde, nodes, weights, tol

    def availability_row(self, u: float, signed: bool, p_c,
                         kernel) -> np.ndarray:
        """Availability of a cooperator at p_c against every interferer cell."""
        props = self.props
        d_sc = euclid(self.sc.p_s, p_c)
        if d_sc <= _COINCIDENT:
            return np.ones(len(self.area_points))
        invm_sc = d_sc ** props.path_loss_exp / props.tx_power
        invm_ic = _inv_means(self.area_points, p_c, props)
        if not signed:  # interference already over: decode is the only gate
            star, nodes, weights, tol = kernel
            outage = _outage_value(star, nodes, weights, tol, invm_sc, invm_ic)
            return 1.0 - np.clip(outage, 0.0, 1.0)
        star, tilde, nodes, weights, tol = kernel
        margin = props.cs_threshold - props.noise_floor
        if margin <= 0:
            return np.zeros(len(self.area_points))
        gate = -np.expm1(-margin * invm_ic)
        top = math.exp(-tilde * invm_sc) if not math.isinf(tilde) else 0.0
        out = gate * top
        if nodes.size:
            f = weights * invm_sc * np.exp(-nodes * invm_sc)
            active = f > f.max() * 1e-18 if f.size else np.zeros(0, bool)
            if active.any():
                grow = -np.expm1(-np.multiply.outer(invm_ic, tol[active]))
                out = out + grow @ f[active]
        return np.clip(out, 0.0, 1.0)


def _conditional_at(avail: _CoopAvailability, u: float, p_c) -> float:
    """Availability at p_c given the interferer started at u, averaged over
    interferer positions weighted by how likely each breaks the link."""
    imap = avail._weights_at(u)
    denom = imap.sum()
    if denom <= 0:
        raise QuadratureError(
            "no interferer mass over the integration region (denominator 0)")
    if u <= 0:
        kernel = avail.minus_kernel(abs(u))
        row = avail.availability_row(abs(u), False, p_c, kernel)
    else:
        kernel = avail.plus_kernel(u)
        row = avail.availability_row(u, True, p_c, kernel)
    return float(np.dot(imap, row) / denom)


def coop_conditional(sc: ScenarioCoop, t_i: float,
                     quad: QuadratureConfig | None = None) -> float:
    """Cooperator availability conditioned on the interferer start time."""
    quad = quad or QuadratureConfig()
    if abs(t_i) > sc.T * (1 + 1e-12):
        raise ValueError("|t_i| must not exceed the frame duration")
    pc = np.array([[sc.p_c[0], sc.p_c[1]]], dtype=float)
    avail = _CoopAvailability(sc, quad, pc)
    return _conditional_at(avail, t_i, sc.p_c)


def coop_distribution(sc: ScenarioCoop, birth: BirthTimeDist | None = None,
                      domain=None, quad: QuadratureConfig | None = None,
                      conditional: bool = True) -> float:
    """Cooperator availability averaged over the start-time distribution,
    optionally restricted to a sub-interval of [-T, T].

    With ``conditional`` the restricted integral is normalized by the domain
    mass, i.e. it reads as an availability given the start time fell there.
    """
    quad = quad or QuadratureConfig()
    birth = birth or BirthTimeDist(sc.T)
    dom = domain if domain is not None else (-sc.T, sc.T)
    us, ws = _ti_nodes(sc.T, birth, quad, dom)
    pc = np.array([[sc.p_c[0], sc.p_c[1]]], dtype=float)
    avail = _CoopAvailability(sc, quad, pc)
    total = float(np.dot(ws, [_conditional_at(avail, u, sc.p_c) for u in us]))
    if not conditional:
        return total
    mass = birth.mass(max(dom[0], -sc.T), min(dom[1], sc.T))
    if mass <= 0:
        raise ValueError("birth-time domain carries no probability mass")
    return float(np.clip(total / mass, 0.0, 1.0))


_QUANTITIES = ("interferer", "coop_minus", "coop_plus", "coop_avg")


def heatmap(quantity: str, sc: ScenarioCoop, grid: GridSpec | None = None,
            birth: BirthTimeDist | None = None,
            quad: QuadratureConfig | None = None) -> HeatmapResult:
    """Evaluate one of the spatial distributions on a cell grid.

    ``interferer`` maps the access-gated outage probability over interferer
    positions; the ``coop_*`` quantities map cooperator availability over
    cooperator positions (decode-only half, CS-constrained half, or the full
    average). Cells hosting the source or destination are NaN.
    """
    if quantity not in _QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; pick from {_QUANTITIES}")
    quad = quad or QuadratureConfig()
    grid = grid or GridSpec(*(sc.region_A.x_min, sc.region_A.x_max,
                              sc.region_A.y_min, sc.region_A.y_max))
    birth = birth or BirthTimeDist(sc.T)
    pts = grid.center_points()
    values = np.full(len(pts), np.nan)
    d_s = np.hypot(pts[:, 0] - sc.p_s[0], pts[:, 1] - sc.p_s[1])
    d_d = np.hypot(pts[:, 0] - sc.p_d[0], pts[:, 1] - sc.p_d[1])
    skip = (d_s <= _COINCIDENT) | (d_d <= _COINCIDENT)

    if quantity == "interferer":
        us, ws = _ti_nodes(sc.T, birth, quad)
        acc = np.zeros(len(pts))
        for u, w in zip(us, ws):
            acc += w * _interferer_map_at(abs(u), pts, sc.p_s, sc.p_d,
                                          sc.props, sc.rates, quad)
        values[~skip] = np.clip(acc[~skip], 0.0, 1.0)
    else:
        domain = {"coop_minus": (-sc.T, 0.0), "coop_plus": (0.0, sc.T),
                  "coop_avg": (-sc.T, sc.T)}[quantity]
        us, ws = _ti_nodes(sc.T, birth, quad, domain)
        mass = birth.mass(*domain)
        avail = _CoopAvailability(sc, quad, pts)
        kernels = []
        weightsums = []
        for u in us:
            imap = avail._weights_at(u)
            denom = imap.sum()
            if denom <= 0:
                raise QuadratureError("no interferer mass over the region")
            k = avail.minus_kernel(abs(u)) if u <= 0 else avail.plus_kernel(u)
            kernels.append(k)
            weightsums.append(denom)
        for idx in range(len(pts)):
            if skip[idx]:
                continue
            p_c = (pts[idx, 0], pts[idx, 1])
            total = 0.0
            for u, w, k, dsum in zip(us, ws, kernels, weightsums):
                imap = avail._weights_at(u)
                row = avail.availability_row(abs(u), u > 0, p_c, k)
                total += w * float(np.dot(imap, row) / dsum)
            values[idx] = min(max(total / mass, 0.0), 1.0)

    return HeatmapResult(quantity, *grid.centers(),
                         values.reshape(grid.nx, grid.ny))
