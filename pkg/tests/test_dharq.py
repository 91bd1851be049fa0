import math

import numpy as np
import pytest

from coopsense.channel import RateParams, capacity
from coopsense.dharq import (
    DharqConfig,
    NackPayload,
    RelayCandidateState,
    contention_step,
    dequantize_sinr,
    ideal_relay_select,
    quantize_sinr,
    relay_rate,
)

CFG = DharqConfig()
RATES = RateParams()
B = 1e6


class TestQuantizer:
    def test_below_range_credits_nothing(self):
        idx = quantize_sinr(10 ** (-8 / 10), CFG)  # -8 dB
        assert idx == 0
        assert dequantize_sinr(idx, CFG) == 0.0

    def test_ten_db_lands_in_bin_three(self):
        # 8 levels over [-5, 30] dB: bins of 4.375 dB starting at -5
        idx = quantize_sinr(10.0, CFG)  # 10 dB
        assert idx == 3
        assert 10 * math.log10(dequantize_sinr(idx, CFG)) == pytest.approx(8.125)

    def test_above_range_uses_top_bin_lower_edge(self):
        idx = quantize_sinr(10 ** (40 / 10), CFG)
        assert idx == CFG.quant_levels - 1
        assert 10 * math.log10(dequantize_sinr(idx, CFG)) == pytest.approx(25.625)

    def test_never_overstates(self):
        rng = np.random.default_rng(0)
        for gamma in 10 ** rng.uniform(-2, 4, 500):
            assert dequantize_sinr(quantize_sinr(gamma, CFG), CFG) <= gamma
        assert dequantize_sinr(quantize_sinr(0.0, CFG), CFG) == 0.0

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            quantize_sinr(-1.0, CFG)
        with pytest.raises(ValueError):
            dequantize_sinr(CFG.quant_levels, CFG)
        with pytest.raises(ValueError):
            NackPayload(-1, 0)


class TestRelayRate:
    def test_zero_credit_floor(self):
        d = relay_rate(0.0, 7.0, RATES, CFG, B)
        expect = capacity(7.0, B) / (1.0 + CFG.epsilon)
        assert d.rate == pytest.approx(expect)

    def test_refusal_boundary(self):
        # pick gamma_cd so the computed rate is exactly the data rate
        target_c = (1.0 + CFG.epsilon) * RATES.rho_data - capacity(1.0, B)
        gamma_cd = 2.0 ** (target_c / B) - 1.0
        d = relay_rate(1.0, gamma_cd, RATES, CFG, B)
        assert d.refusal == "rate_too_low"

    def test_reference_operating_point(self):
        d = relay_rate(1.0, 7.0, RATES, CFG, B)
        expect = RATES.rho_data * capacity(7.0, B) / (1.06 * RATES.rho_data - 1e6)
        assert d.rate == pytest.approx(expect, rel=1e-9)
        assert d.rate > RATES.rho_data

    def test_already_decodable(self):
        strong = 2.0 ** ((1.0 + CFG.epsilon) * RATES.rho_data / B) - 1.0
        d = relay_rate(strong * 1.01, 7.0, RATES, CFG, B)
        assert d.refusal == "already_decodable"
        assert not d.participates

    def test_closure_identity(self):
        # the selected rate, fed back into the two-transmission bit budget,
        # reproduces exactly (1+eps)L decodable bits
        rng = np.random.default_rng(1)
        for _ in range(100):
            g_sd = float(10 ** rng.uniform(-1, 0.4))
            g_cd = float(10 ** rng.uniform(0.5, 2.5))
            d = relay_rate(g_sd, g_cd, RATES, CFG, B)
            if not d.participates:
                continue
            t_sd = RATES.payload_bits / RATES.rho_data
            t_cd = RATES.payload_bits / d.rate
            bits = t_sd * capacity(g_sd, B) + t_cd * capacity(g_cd, B)
            assert bits == pytest.approx(RATES.payload_bits * (1 + CFG.epsilon),
                                         rel=1e-9)


class TestContention:
    def make_candidate(self, backoff=3):
        return RelayCandidateState(node=5, cached_payload_bits=5000.0,
                                   gamma_cd=4.0, computed_rate=3e6,
                                   backoff_remaining=backoff)

    def test_power_above_threshold_abandons(self):
        c = self.make_candidate()
        _, action = contention_step(c, "power_above_threshold")
        assert action == ("give_up", "cs_busy")
        assert c.give_up_reason == "cs_busy"

    def test_nav_abandons(self):
        c = self.make_candidate()
        _, action = contention_step(c, "nav_active")
        assert action == ("give_up", "nav")

    def test_countdown_and_transmit(self):
        c = self.make_candidate(backoff=2)
        contention_step(c, "slot_idle")
        contention_step(c, "slot_idle")
        _, action = contention_step(c, "backoff_expired")
        assert action == ("start_relay_tx", 3e6)

    def test_loser_senses_winner(self):
        first = self.make_candidate(backoff=3)
        second = self.make_candidate(backoff=7)
        for _ in range(3):
            contention_step(first, "slot_idle")
            contention_step(second, "slot_idle")
        _, act = contention_step(first, "backoff_expired")
        assert act[0] == "start_relay_tx"
        _, act2 = contention_step(second, "power_above_threshold")
        assert act2 == ("give_up", "cs_busy")

    def test_equal_backoffs_both_transmit(self):
        a = self.make_candidate(backoff=4)
        b = self.make_candidate(backoff=4)
        for _ in range(4):
            contention_step(a, "slot_idle")
            contention_step(b, "slot_idle")
        _, act_a = contention_step(a, "backoff_expired")
        _, act_b = contention_step(b, "backoff_expired")
        assert act_a[0] == act_b[0] == "start_relay_tx"


class TestIdealSelect:
    def test_empty(self):
        assert ideal_relay_select([]) is None

    def test_single(self):
        assert ideal_relay_select([(3, 0.5)]) == 3

    def test_argmax(self):
        assert ideal_relay_select([(1, 0.5), (2, 3.0), (3, 1.2)]) == 2

    def test_scale_invariant(self):
        cands = [(1, 0.5), (2, 3.0), (3, 1.2)]
        scaled = [(n, 7.3 * g) for n, g in cands]
        assert ideal_relay_select(cands) == ideal_relay_select(scaled)
