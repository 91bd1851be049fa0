"""Scenario descriptions and quadrature settings for the spatial analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..channel import PropagationParams, RateParams

# Region over which the interferer position is integrated for the canonical
# source at (0,0), destination at (60,0) topology. Chosen so that boundary
# cells carry a negligible share of the interferer-distribution mass.
DEFAULT_REGION = (-60.0, 180.0, -120.0, 120.0)


@dataclass(frozen=True)
class Rect:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("rectangle must have positive extent")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid; values are evaluated at cell centers."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int = 60
    ny: int = 48

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extent must be positive on both axes")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def centers(self):
        """(xs, ys) 1-D center coordinates."""
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys

    def center_points(self):
        """(nx*ny, 2) array of cell centers, x-major."""
        xs, ys = self.centers()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    @classmethod
    def from_rect(cls, rect: Rect, nx: int, ny: int) -> "GridSpec":
        return cls(rect.x_min, rect.x_max, rect.y_min, rect.y_max, nx, ny)


def default_heatmap_grid() -> GridSpec:
    return GridSpec(*DEFAULT_REGION, nx=60, ny=48)


def default_area_grid() -> GridSpec:
    # coarser than the display grid: it only discretizes the smooth
    # interferer-position integrals
    return GridSpec(*DEFAULT_REGION, nx=40, ny=32)


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs of the numerical evaluation.

    eta_nodes is the Gauss-Legendre order per geometric panel of the received
    power integrals; the panels themselves adapt to the integrand scales.
    ti_nodes is the total node count for birth-time integrals (split over the
    negative and positive half-intervals).
    """

    eta_truncation_factor: float = 60.0
    ti_nodes: int = 32
    eta_nodes: int = 16
    area_grid: GridSpec = field(default_factory=default_area_grid)
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.eta_truncation_factor < 20:
            raise ValueError("truncation factor must be at least 20")
        if self.ti_nodes < 16 or self.eta_nodes < 16:
            raise ValueError("node counts must be at least 16")
        if not (0 < self.rel_tol <= 1e-2):
            raise ValueError("rel_tol must lie in (0, 1e-2]")


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights of n-point Gauss-Legendre on [a, b]."""
    x, w = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class BirthTimeDist:
    """Distribution of the interfering transmission's start time on [-T, T].

    ``density`` is a vectorized pdf; the default is uniform 1/(2T).
    """

    def __init__(self, T: float, density=None, check_nodes: int = 64):
        if T <= 0:
            raise ValueError("T must be positive")
        self.T = T
        self._uniform = density is None
        self.density = density if density is not None else (
            lambda u: np.full_like(np.asarray(u, dtype=float), 1.0 / (2.0 * T)))
        total = self.mass(-T, T, nodes=check_nodes)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density mass over [-T, T] is {total}, expected 1")

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        vals = np.asarray(self.density(u), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density must be non-negative")
        return vals

    def mass(self, a: float, b: float, nodes: int = 64) -> float:
        if b <= a:
            return 0.0
        if self._uniform:
            return (b - a) / (2.0 * self.T)
        total = 0.0
        # split at zero: densities are allowed a kink where the overlap
        # geometry changes sign
        for lo, hi in ((a, min(b, 0.0)), (max(a, 0.0), b)):
            if hi > lo:
                x, w = gauss_legendre(lo, hi, nodes)
                total += float(np.dot(w, self.pdf(x)))
        return total

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._uniform:
            return rng.uniform(-self.T, self.T, size=n)
        # numeric inverse transform on a fine grid
        grid = np.linspace(-self.T, self.T, 4097)
        pdf = self.pdf(grid)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
        cdf /= cdf[-1]
        return np.interp(rng.uniform(0, 1, size=n), cdf, grid)


@dataclass(frozen=True)
class Scenario3:
    """Source, destination and one interferer; all data frames last T seconds."""

    p_s: tuple
    p_d: tuple
    p_i: tuple
    props: PropagationParams = field(default_factory=PropagationParams)
    rates: RateParams = field(default_factory=RateParams)

    def __post_init__(self):
        pts = [tuple(self.p_s), tuple(self.p_d), tuple(self.p_i)]
        if len({pts[0], pts[1], pts[2]}) != 3:
            raise ValueError("source, destination and interferer must be distinct")

    @property
    def T(self) -> float:
        return self.rates.payload_bits / self.rates.rho_data


@dataclass(frozen=True)
class ScenarioCoop:
    """Source, destination and a candidate cooperator; the interferer position
    is integrated over region_A."""

    p_s: tuple
    p_d: tuple
    p_c: tuple
    region_A: Rect = field(default_factory=lambda: Rect(*DEFAULT_REGION))
    props: PropagationParams = field(default_factory=PropagationParams)
    rates: RateParams = field(default_factory=RateParams)

    def __post_init__(self):
        pts = [tuple(self.p_s), tuple(self.p_d), tuple(self.p_c)]
        if len(set(pts)) != 3:
            raise ValueError("fixed node positions must be pairwise distinct")
        if self.region_A.area <= 0:
            raise ValueError("integration region must have positive area")

    @property
    def T(self) -> float:
        return self.rates.payload_bits / self.rates.rho_data


def euclid(p1, p2) -> float:
    return math.hypot(p1[0] - p2[0], p1[1] - p2[1])
