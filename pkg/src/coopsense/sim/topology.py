"""Node placement: uniform random layouts with an optional pinned
source-destination pair at the playground center."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TopologySpec", "Topology", "generate_topology"]


@dataclass(frozen=True)
class TopologySpec:
    n_nodes: int = 35
    width: float = 300.0
    height: float = 300.0
    pinned_delta_sd: float | None = None   # pins nodes 0 (src) and 1 (dst)
    neighbor_radius: float = 60.0
    max_retries: int = 200

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("playground must have positive extent")
        if self.pinned_delta_sd is not None and not (
                0 < self.pinned_delta_sd < self.width):
            raise ValueError("pinned pair distance must fit the playground")


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray          # (n, 2) meters
    width: float
    height: float
    pinned_pair: tuple | None      # (src, dst) node ids or None

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    def distances(self) -> np.ndarray:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])


def generate_topology(rng: np.random.Generator, spec: TopologySpec) -> Topology:
    """Uniform i.i.d. placement, redrawn until every node has a neighbor
    within the neighbor radius (bounded retries)."""
    pinned = None
    fixed = []
    if spec.pinned_delta_sd is not None:
        cx, cy = spec.width / 2.0, spec.height / 2.0
        half = spec.pinned_delta_sd / 2.0
        fixed = [(cx - half, cy), (cx + half, cy)]
        pinned = (0, 1)

    n_random = spec.n_nodes - len(fixed)
    for _ in range(spec.max_retries):
        xs = rng.uniform(0.0, spec.width, n_random)
        ys = rng.uniform(0.0, spec.height, n_random)
        pos = np.array(fixed + list(zip(xs, ys)), dtype=float)
        topo = Topology(pos, spec.width, spec.height, pinned)
        d = topo.distances()
        np.fill_diagonal(d, np.inf)
        if np.all(d.min(axis=1) <= spec.neighbor_radius):
            return topo
    raise RuntimeError(
        f"no connected layout within {spec.max_retries} draws; "
        f"raise the density or the neighbor radius")
