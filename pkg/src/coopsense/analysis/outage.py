"""Outage and cooperator-availability probabilities conditioned on the
interferer's start time.

The only random quantities are the exponentially distributed received powers;
everything reduces to one-dimensional integrals over the source-link power.
The integration interval splits at two thresholds: below the noise-limited
threshold decoding fails regardless of interference, above the
interference-immune threshold the interference-free part of the frame alone
carries the payload. In between, the tolerable interference power is an
explicit monotone function of the signal power with a vertical asymptote at
the upper threshold.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ..channel import PropagationParams, RateParams, mean_rx_power
from .scenarios import QuadratureConfig, Scenario3, ScenarioCoop, euclid, gauss_legendre

__all__ = [
    "QuadratureError",
    "cs_idle_prob",
    "decode_power_thresholds",
    "interference_tolerance",
    "cs_binding_power",
    "outage_prob",
    "interferer_outage",
    "coop_avail_decode_only",
    "coop_avail_cs_constrained",
]

_LN2 = math.log(2.0)


class QuadratureError(RuntimeError):
    """Raised when an integral fails its self-consistency check."""


def cs_idle_prob(p1, p2, props: PropagationParams) -> float:
    """Probability that a node at p2 senses the medium idle while p1 transmits."""
    margin = props.cs_threshold - props.noise_floor
    if margin <= 0:
        return 0.0
    mean = mean_rx_power(p1, p2, props)
    return -math.expm1(-margin / mean)


def decode_power_thresholds(t_i: float, rates: RateParams,
                            props: PropagationParams):
    """Signal-power thresholds of the partially interfered frame.

    Returns (noise_limited, interference_immune): below the first, decoding
    fails on noise alone; above the second, the interference-free |t_i|
    seconds already carry the payload. The second is +inf at t_i = 0 and
    collapses onto the first at |t_i| = T.
    """
    T = rates.payload_bits / rates.rho_data
    u = abs(t_i)
    if u > T * (1 + 1e-12):
        raise ValueError("|t_i| must not exceed the frame duration")
    u = min(u, T)
    n = props.noise_floor
    star = n * (2.0 ** (rates.rho_data / props.bandwidth) - 1.0)
    if u == 0.0:
        return star, math.inf
    exponent = rates.payload_bits / (props.bandwidth * u)
    if exponent > 1000.0:  # 2**exponent overflows, threshold is effectively inf
        return star, math.inf
    return star, n * (2.0 ** exponent - 1.0)


def _log_ratio(signal_power, u: float, rates: RateParams, props: PropagationParams):
    """ln of the residual SINR requirement on the interfered part of the frame.

    Stable for all 0 <= u < T: algebraically it never exceeds
    ln2 * rho_data / B on the valid signal-power interval.
    """
    T = rates.payload_bits / rates.rho_data
    rest = T - u
    a = _LN2 * rates.payload_bits / (props.bandwidth * rest)
    b = (u / rest) * np.log1p(np.asarray(signal_power, dtype=float) / props.noise_floor)
    return a - b


def interference_tolerance(signal_power, t_i: float, rates: RateParams,
                           props: PropagationParams):
    """Largest interference power that still lets the payload decode.

    Defined for signal powers between the two decode thresholds; zero at the
    lower one, strictly increasing, diverging at the upper one. Scalar in,
    scalar out; arrays are accepted and mapped elementwise.
    """
    star, bar = decode_power_thresholds(t_i, rates, props)
    u = min(abs(t_i), rates.payload_bits / rates.rho_data)
    eta = np.asarray(signal_power, dtype=float)
    scalar = eta.ndim == 0
    eta = np.atleast_1d(eta)
    if np.any(eta < star * (1 - 1e-9)) or np.any(eta >= bar):
        raise ValueError("signal power outside the partially-outaged interval")
    lr = _log_ratio(eta, u, rates, props)
    with np.errstate(divide="ignore"):  # the upper endpoint maps to +inf
        out = eta / np.expm1(lr) - props.noise_floor
    # clip the rounding residue at the lower endpoint where the value is 0
    out = np.where(np.abs(out) < 1e-30, np.maximum(out, 0.0), out)
    if scalar:
        return float(out[0])
    return out


def _tolerance_slope_at_star(u: float, rates: RateParams,
                             props: PropagationParams) -> float:
    """d(tolerance)/d(signal power) at the lower threshold."""
    star, _ = decode_power_thresholds(u, rates, props)
    u = min(abs(u), rates.payload_bits / rates.rho_data)
    T = rates.payload_bits / rates.rho_data
    n = props.noise_floor
    lr = float(_log_ratio(star, u, rates, props))
    em = math.expm1(lr)
    if u >= T:
        return 1.0 / em
    d_lr = -(u / (T - u)) / (n + star)
    return 1.0 / em - star * math.exp(lr) * d_lr / (em * em)


def cs_binding_power(t_i: float, rates: RateParams, props: PropagationParams,
                     rel_tol: float = 1e-6) -> float:
    """Signal power at which the tolerable interference equals the CS margin.

    Below it the decode constraint binds, above it the carrier-sense
    constraint does. Clamped to the valid interval endpoints when the margin
    is non-positive or exceeds the tolerance range.
    """
    margin = props.cs_threshold - props.noise_floor
    star, bar = decode_power_thresholds(t_i, rates, props)
    if margin <= 0:
        return star
    if bar == star:
        return star
    # grow the upper bracket outward from the lower threshold: near the upper
    # one the log-ratio loses float resolution, so never probe right at it
    cap = bar * (1.0 - 1e-9) if math.isfinite(bar) else math.inf
    slope = _tolerance_slope_at_star(t_i, rates, props)
    offset = margin / slope if slope > 0 else star
    lo = star
    hi = None
    while True:
        cand = min(star + offset, cap)
        val = interference_tolerance(cand, t_i, rates, props)
        if val >= margin:
            hi = cand
            break
        lo = cand
        if cand >= cap or cand > 1e6:
            # only the unresolvable sliver below the divergence remains
            return bar
        offset *= 2.0
    f = lambda eta: interference_tolerance(eta, t_i, rates, props) - margin
    return float(brentq(f, lo, hi, xtol=max(rel_tol * star, 1e-300), rtol=1e-13))


def _geometric_panels(lo: float, hi: float, w0: float):
    """Panel edges from lo to hi, widths growing by 4x from w0."""
    edges = [lo]
    w = w0
    x = lo
    while True:
        x = x + w
        if x >= hi - 1e-300 or (hi - x) < 0.25 * w:
            edges.append(hi)
            break
        edges.append(x)
        w *= 4.0
    return edges


def _power_quad_nodes(lo: float, hi: float, scale_hint: float, order: int):
    """Gauss-Legendre nodes/weights on [lo, hi] laid out on geometric panels
    so that integrand features of width ``scale_hint`` are resolved."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    width = hi - lo
    w0 = min(max(scale_hint, width * 1e-12), width) / 4.0
    nodes = []
    weights = []
    edges = _geometric_panels(lo, hi, w0)
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(a, b, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _outage_kernel(u: float, rates: RateParams, props: PropagationParams,
                   mean_signal: float, min_mean_interf: float,
                   quad: QuadratureConfig, order: int):
    """Nodes, weights and per-node interference tolerances for the outage
    integral over the partially-outaged signal-power interval."""
    star, bar = decode_power_thresholds(u, rates, props)
    hi = min(bar, star + quad.eta_truncation_factor * mean_signal)
    if hi <= star:
        return star, np.empty(0), np.empty(0), np.empty(0)
    slope = _tolerance_slope_at_star(u, rates, props)
    decay = min_mean_interf / slope if slope > 0 else math.inf
    scale = min(mean_signal, decay)
    nodes, weights = _power_quad_nodes(star, hi, scale, order)
    tol = interference_tolerance(nodes, u, rates, props) if nodes.size else nodes
    return star, nodes, weights, tol


def _outage_value(star, nodes, weights, tol, inv_mean_signal, inv_mean_interf):
    """Outage probability from a prepared kernel; vectorized over the
    interferer inverse mean power."""
    noise_term = -np.expm1(-star * inv_mean_signal)
    if nodes.size == 0:
        return noise_term + np.zeros_like(np.asarray(inv_mean_interf, dtype=float))
    f = inv_mean_signal * np.exp(-nodes * inv_mean_signal) * weights
    surv = np.exp(-np.multiply.outer(np.asarray(inv_mean_interf, dtype=float), tol))
    return noise_term + surv @ f


def outage_prob(s: Scenario3, t_i: float,
                quad: QuadratureConfig | None = None,
                check_convergence: bool = True) -> float:
    """Probability that the destination decodes fewer than the payload bits,
    conditioned on the interferer starting at t_i."""
    quad = quad or QuadratureConfig()
    u = abs(t_i)
    if u > s.T * (1 + 1e-12):
        raise ValueError("|t_i| must not exceed the frame duration")
    mean_sd = mean_rx_power(s.p_s, s.p_d, s.props)
    mean_id = mean_rx_power(s.p_i, s.p_d, s.props)

    def evaluate(order):
        star, nodes, weights, tol = _outage_kernel(
            u, s.rates, s.props, mean_sd, mean_id, quad, order)
        return float(_outage_value(star, nodes, weights, tol,
                                   1.0 / mean_sd, np.array(1.0 / mean_id)))

    val = evaluate(quad.eta_nodes)
    if check_convergence:
        ref = evaluate(2 * quad.eta_nodes)
        if abs(val - ref) > max(quad.rel_tol, quad.rel_tol * abs(ref)):
            raise QuadratureError(
                f"outage integral unstable: {val} vs {ref} at doubled order "
                f"(t_i={t_i}, mean_sd={mean_sd:.3e}, mean_id={mean_id:.3e})")
    return min(max(val, 0.0), 1.0)


def interferer_outage(s: Scenario3, t_i: float,
                      quad: QuadratureConfig | None = None,
                      check_convergence: bool = True) -> float:
    """Probability that the interferer is granted channel access and induces
    an outage at the destination, conditioned on its start time.

    The access event only involves the source-interferer link, so it
    factorizes from the outage event; its probability depends on that link's
    distance only, whichever of the two nodes senses the other.
    """
    gate = cs_idle_prob(s.p_i, s.p_s, s.props)
    if gate == 0.0:
        return 0.0
    return gate * outage_prob(s, t_i, quad, check_convergence)


def coop_avail_decode_only(sc: ScenarioCoop, p_i, t_i: float,
                           quad: QuadratureConfig | None = None,
                           check_convergence: bool = True) -> float:
    """Availability of the cooperator when the interference ended before the
    frame did (t_i <= 0): decoding the payload is the only requirement."""
    if not (-sc.T * (1 + 1e-12) <= t_i <= 0):
        raise ValueError("decode-only availability applies to t_i in [-T, 0]")
    s3 = Scenario3(sc.p_s, sc.p_c, p_i, sc.props, sc.rates)
    return 1.0 - outage_prob(s3, t_i, quad, check_convergence)


def coop_avail_cs_constrained(sc: ScenarioCoop, p_i, t_i: float,
                              quad: QuadratureConfig | None = None,
                              check_convergence: bool = True) -> float:
    """Availability of the cooperator while the interferer is still active
    (t_i > 0): it must decode the payload AND sense the medium idle, and both
    events share the interferer-cooperator power."""
    quad = quad or QuadratureConfig()
    if not (0 < t_i <= sc.T * (1 + 1e-12)):
        raise ValueError("CS-constrained availability applies to t_i in (0, T]")
    margin = sc.props.cs_threshold - sc.props.noise_floor
    if margin <= 0:
        return 0.0
    mean_sc = mean_rx_power(sc.p_s, sc.p_c, sc.props)
    mean_ic = mean_rx_power(p_i, sc.p_c, sc.props)
    tilde = cs_binding_power(t_i, sc.rates, sc.props, quad.rel_tol)
    star, bar = decode_power_thresholds(t_i, sc.rates, sc.props)
    hi = min(tilde, star + quad.eta_truncation_factor * mean_sc)

    def evaluate(order):
        nodes, weights = _power_quad_nodes(star, hi, mean_sc, order)
        if nodes.size == 0:
            inner = 0.0
        else:
            tol = interference_tolerance(nodes, t_i, sc.rates, sc.props)
            f = np.exp(-nodes / mean_sc) / mean_sc
            inner = float(np.dot(weights, -np.expm1(-tol / mean_ic) * f))
        gate = -math.expm1(-margin / mean_ic)
        top = math.exp(-tilde / mean_sc) if not math.isinf(tilde) else 0.0
        return gate * top + inner

    val = evaluate(quad.eta_nodes)
    if check_convergence:
        ref = evaluate(2 * quad.eta_nodes)
        if abs(val - ref) > max(quad.rel_tol, quad.rel_tol * abs(ref)):
            raise QuadratureError(
                f"availability integral unstable: {val} vs {ref} at doubled order")
    return min(max(val, 0.0), 1.0)
