"""Monte Carlo estimators for the same probabilities the quadrature computes.

These sample the raw channel model (exponential received powers, the
capacity decoding rule, the carrier-sense events) with no shared code path
into the quadrature, so the two sides cross-validate each other.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import mean_rx_power
from .scenarios import BirthTimeDist, Scenario3, ScenarioCoop

__all__ = [
    "bits_with_overlap",
    "mc_outage_prob",
    "mc_interferer_outage",
    "mc_interferer_distribution",
    "mc_coop_decode_only",
    "mc_coop_cs_constrained",
    "mc_coop_conditional",
]


def bits_with_overlap(sig, interf, t_i, props, rates):
    """Decoded bits of a T-second payload whose last T-|t_i| seconds overlap
    an interfering transmission (vectorized)."""
    T = rates.payload_bits / rates.rho_data
    u = np.minimum(np.abs(t_i), T)
    n = props.noise_floor
    clean = u * props.bandwidth * np.log2(1.0 + sig / n)
    hit = (T - u) * props.bandwidth * np.log2(1.0 + sig / (n + interf))
    return clean + hit


def mc_outage_prob(s: Scenario3, t_i: float, n_samples: int,
                   rng: np.random.Generator) -> float:
    mean_sd = mean_rx_power(s.p_s, s.p_d, s.props)
    mean_id = mean_rx_power(s.p_i, s.p_d, s.props)
    sig = rng.exponential(mean_sd, n_samples)
    interf = rng.exponential(mean_id, n_samples)
    bits = bits_with_overlap(sig, interf, t_i, s.props, s.rates)
    return float(np.mean(bits < s.rates.payload_bits))


def mc_interferer_outage(s: Scenario3, t_i: float, n_samples: int,
                         rng: np.random.Generator) -> float:
    mean_is = mean_rx_power(s.p_i, s.p_s, s.props)
    mean_sd = mean_rx_power(s.p_s, s.p_d, s.props)
    mean_id = mean_rx_power(s.p_i, s.p_d, s.props)
    margin = s.props.cs_threshold - s.props.noise_floor
    sensed = rng.exponential(mean_is, n_samples)
    sig = rng.exponential(mean_sd, n_samples)
    interf = rng.exponential(mean_id, n_samples)
    bits = bits_with_overlap(sig, interf, t_i, s.props, s.rates)
    return float(np.mean((sensed < margin) & (bits < s.rates.payload_bits)))


def mc_interferer_distribution(s: Scenario3, n_samples: int,
                               rng: np.random.Generator,
                               birth: BirthTimeDist | None = None) -> float:
    birth = birth or BirthTimeDist(s.T)
    mean_is = mean_rx_power(s.p_i, s.p_s, s.props)
    mean_sd = mean_rx_power(s.p_s, s.p_d, s.props)
    mean_id = mean_rx_power(s.p_i, s.p_d, s.props)
    margin = s.props.cs_threshold - s.props.noise_floor
    t = birth.sample(n_samples, rng)
    sensed = rng.exponential(mean_is, n_samples)
    sig = rng.exponential(mean_sd, n_samples)
    interf = rng.exponential(mean_id, n_samples)
    bits = bits_with_overlap(sig, interf, t, s.props, s.rates)
    return float(np.mean((sensed < margin) & (bits < s.rates.payload_bits)))


def mc_coop_decode_only(sc: ScenarioCoop, p_i, t_i: float, n_samples: int,
                        rng: np.random.Generator) -> float:
    if t_i > 0:
        raise ValueError("decode-only availability applies to t_i <= 0")
    mean_sc = mean_rx_power(sc.p_s, sc.p_c, sc.props)
    mean_ic = mean_rx_power(p_i, sc.p_c, sc.props)
    sig = rng.exponential(mean_sc, n_samples)
    interf = rng.exponential(mean_ic, n_samples)
    bits = bits_with_overlap(sig, interf, t_i, sc.props, sc.rates)
    return float(np.mean(bits >= sc.rates.payload_bits))


def mc_coop_cs_constrained(sc: ScenarioCoop, p_i, t_i: float, n_samples: int,
                           rng: np.random.Generator) -> float:
    """Joint decode-and-sense-idle event; the interferer-cooperator power is
    shared between the two conditions."""
    if t_i <= 0:
        raise ValueError("CS-constrained availability applies to t_i > 0")
    mean_sc = mean_rx_power(sc.p_s, sc.p_c, sc.props)
    mean_ic = mean_rx_power(p_i, sc.p_c, sc.props)
    margin = sc.props.cs_threshold - sc.props.noise_floor
    if margin <= 0:
        return 0.0
    sig = rng.exponential(mean_sc, n_samples)
    interf = rng.exponential(mean_ic, n_samples)
    bits = bits_with_overlap(sig, interf, t_i, sc.props, sc.rates)
    return float(np.mean((bits > sc.rates.payload_bits) & (interf < margin)))


def mc_coop_conditional(sc: ScenarioCoop, t_i: float, n_samples: int,
                        rng: np.random.Generator) -> float:
    """Availability given the start time, averaging the interferer position
    over the region in proportion to how likely each breaks the link.

    Ratio estimator over uniform interferer positions. The access gate is an
    independent exponential threshold event, so its exact probability enters
    as a per-position weight (it appears identically above and below the
    bar); the outage and availability events stay raw indicator draws.
    """
    r = sc.region_A
    margin = sc.props.cs_threshold - sc.props.noise_floor
    if margin <= 0:
        raise ValueError("carrier sense threshold at or below noise: no access")
    xs = rng.uniform(r.x_min, r.x_max, n_samples)
    ys = rng.uniform(r.y_min, r.y_max, n_samples)
    alpha = sc.props.path_loss_exp
    p = sc.props.tx_power

    def means(ref):
        d = np.hypot(xs - ref[0], ys - ref[1])
        d = np.maximum(d, 1e-9)
        return p * d ** (-alpha)

    gate = -np.expm1(-margin / means(sc.p_s))
    sig_d = rng.exponential(mean_rx_power(sc.p_s, sc.p_d, sc.props), n_samples)
    interf_d = rng.exponential(means(sc.p_d))
    bits_d = bits_with_overlap(sig_d, interf_d, t_i, sc.props, sc.rates)
    broke_w = gate * (bits_d < sc.rates.payload_bits)
    denom = broke_w.sum()
    if denom == 0:
        raise ValueError("no interferer samples broke the link; enlarge n")

    sig_c = rng.exponential(mean_rx_power(sc.p_s, sc.p_c, sc.props), n_samples)
    interf_c = rng.exponential(means(sc.p_c))
    bits_c = bits_with_overlap(sig_c, interf_c, t_i, sc.props, sc.rates)
    if t_i <= 0:
        available = bits_c >= sc.rates.payload_bits
    else:
        available = (bits_c > sc.rates.payload_bits) & (interf_c < margin)
    return float((available * broke_w).sum() / denom)
