"""Per-pair fading for the simulator: one sum-of-sinusoids Rayleigh process
per unordered node pair, evaluated lazily on a block grid.

Gains are held constant within a block of MAC slots; the Doppler coherence
time at 11.1 Hz is hundreds of blocks, so the block width only matters for
runtime, not statistics. All oscillator parameters are drawn up front in
pair order, which keeps a run's channel realization independent of the
evaluation order (and therefore of the protocol under test).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["FadingField"]


class FadingField:
    def __init__(self, n_nodes: int, f_d: float, block_dt: float,
                 rng: np.random.Generator, n_oscillators: int = 16):
        self.n = n_nodes
        self.block_dt = block_dt
        m = n_oscillators
        n_pairs = n_nodes * (n_nodes - 1) // 2
        theta = rng.uniform(-math.pi, math.pi, size=(n_pairs, 1))
        k = np.arange(1, m + 1)[None, :]
        alpha = (2.0 * math.pi * k - math.pi + theta) / (4.0 * m)
        self.omega_i = 2.0 * math.pi * f_d * np.cos(alpha)
        self.omega_q = 2.0 * math.pi * f_d * np.sin(alpha)
        self.phi = rng.uniform(-math.pi, math.pi, size=(n_pairs, m))
        self.psi = rng.uniform(-math.pi, math.pi, size=(n_pairs, m))
        self._inv_m = 1.0 / m
        row = np.arange(n_nodes)
        # pair_base[i] = first pair id of row i in the upper triangle
        self._pair_base = np.concatenate(
            [[0], np.cumsum(n_nodes - 1 - row[:-1])])

    def pair_id(self, a, b):
        i = np.minimum(a, b)
        j = np.maximum(a, b)
        return self._pair_base[i] + (j - i - 1)

    def gains(self, pair_ids: np.ndarray, blocks: np.ndarray) -> np.ndarray:
        """Power gains, shape (len(pair_ids), len(blocks)); mean one."""
        t = np.asarray(blocks, dtype=float) * self.block_dt
        arg_i = self.omega_i[pair_ids][:, None, :] * t[None, :, None] \
            + self.phi[pair_ids][:, None, :]
        arg_q = self.omega_q[pair_ids][:, None, :] * t[None, :, None] \
            + self.psi[pair_ids][:, None, :]
        xc = np.cos(arg_i).sum(axis=2)
        xs = np.cos(arg_q).sum(axis=2)
        return (xc * xc + xs * xs) * self._inv_m

    def gain_one(self, a: int, b: int, block: int) -> float:
        return float(self.gains(np.array([self.pair_id(a, b)]),
                                np.array([block]))[0, 0])
