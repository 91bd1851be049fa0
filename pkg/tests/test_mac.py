import numpy as np
import pytest
from scipy import stats

from coopsense.mac import (
    Frame,
    MacConfig,
    MacState,
    ProtocolError,
    advance_idle_run,
    draw_backoff,
    format_trace_line,
    nav_update,
    step,
)

CFG = MacConfig()


def make_data_frame(src=0, dst=1, payload_id=0):
    return Frame("DATA", src, dst, 112, 5000, 2.1e6, 0.532e6,
                 duration_field=2.5e-3, payload_id=payload_id)


def ack_frame(dst, payload_id=None):
    return Frame("ACK", 1, dst, 0, 112, 0.532e6, 0.532e6, 0.0,
                 payload_id=payload_id)


class TestDrawBackoff:
    def test_initial_window(self):
        rng = np.random.default_rng(0)
        draws = [draw_backoff(0, CFG, rng) for _ in range(10 ** 5)]
        assert min(draws) == 1
        assert max(draws) == 16
        counts = np.bincount(draws, minlength=17)[1:]
        chi = stats.chisquare(counts)
        assert chi.pvalue > 0.01

    def test_window_grows_with_attempts(self):
        rng = np.random.default_rng(1)
        draws = [draw_backoff(2, CFG, rng) for _ in range(20000)]
        assert min(draws) >= 1
        assert max(draws) == 64

    def test_deterministic_per_seed(self):
        a = [draw_backoff(0, CFG, np.random.default_rng(5)) for _ in range(3)]
        b = [draw_backoff(0, CFG, np.random.default_rng(5)) for _ in range(3)]
        assert a == b

    def test_attempt_beyond_srl(self):
        with pytest.raises(ValueError):
            draw_backoff(CFG.srl, CFG, np.random.default_rng(0))


class TestStateMachine:
    def setup_method(self):
        self.rng = np.random.default_rng(3)
        self.state = MacState(node=0)

    def enqueue(self, payload=0):
        step(self.state, "enqueue", 0.0, CFG, self.rng, payload=payload)

    def run_idle_slots(self, n, now=0.0):
        for _ in range(n):
            step(self.state, "channel_idle_slot", now, CFG, self.rng)

    def test_enqueue_starts_access(self):
        self.enqueue()
        assert self.state.phase == "frozen"
        assert 1 <= self.state.backoff_remaining <= 16

    def test_busy_freezes_and_preserves_counter(self):
        self.enqueue()
        self.run_idle_slots(CFG.difs_slots)
        assert self.state.phase == "backoff"
        self.state.backoff_remaining = 5
        step(self.state, "channel_busy", 0.0, CFG, self.rng)
        assert self.state.phase == "frozen"
        assert self.state.backoff_remaining == 5

    def test_difs_gates_resume(self):
        self.enqueue()
        self.state.backoff_remaining = 3
        self.run_idle_slots(CFG.difs_slots - 1)
        assert self.state.phase == "frozen"
        self.run_idle_slots(1)
        assert self.state.phase == "backoff"
        assert self.state.backoff_remaining == 3  # DIFS slots do not count down
        self.run_idle_slots(3)
        assert self.state.backoff_remaining == 0

    def test_busy_inside_difs_restarts_it(self):
        self.enqueue()
        self.run_idle_slots(CFG.difs_slots - 2)
        step(self.state, "channel_busy", 0.0, CFG, self.rng)
        assert self.state.idle_streak == 0
        self.run_idle_slots(CFG.difs_slots - 1)
        assert self.state.phase == "frozen"

    def test_expiry_emits_start_tx(self):
        self.enqueue(payload=7)
        self.run_idle_slots(CFG.difs_slots)
        self.run_idle_slots(self.state.backoff_remaining)
        actions = step(self.state, "backoff_expired", 0.0, CFG, self.rng)
        assert actions == [("start_tx", 7)]
        assert self.state.phase == "transmitting"

    def test_full_success_cycle(self):
        self.enqueue(payload=9)
        self.run_idle_slots(CFG.difs_slots + self.state.backoff_remaining)
        step(self.state, "backoff_expired", 0.0, CFG, self.rng)
        actions = step(self.state, "tx_end", 2.6e-3, CFG, self.rng)
        assert actions == [("set_timer",)]
        assert self.state.phase == "awaiting_ack"
        step(self.state, "frame_rx", 2.9e-3, CFG, self.rng, frame=ack_frame(0, 9))
        assert self.state.phase == "idle"
        assert self.state.queue == []
        assert self.state.attempt_index == 0

    def test_timeout_redraws_and_increments(self):
        self.enqueue()
        self.state.phase = "awaiting_ack"
        step(self.state, "ack_timeout", 1e-3, CFG, self.rng)
        assert self.state.attempt_index == 1
        assert self.state.phase == "frozen"
        assert 1 <= self.state.backoff_remaining <= 32

    def test_drop_at_retry_limit(self):
        self.enqueue(payload=4)
        self.state.phase = "awaiting_ack"
        self.state.attempt_index = CFG.srl - 1
        actions = step(self.state, "ack_timeout", 1e-3, CFG, self.rng)
        assert ("drop_packet", 4) in actions
        assert self.state.phase == "idle"
        assert self.state.attempt_index == 0

    def test_total_attempts_bounded_by_srl(self):
        self.enqueue(payload=1)
        attempts = 0
        while self.state.queue:
            self.run_idle_slots(CFG.difs_slots + self.state.backoff_remaining)
            step(self.state, "backoff_expired", 0.0, CFG, self.rng)
            attempts += 1
            step(self.state, "tx_end", 0.0, CFG, self.rng)
            step(self.state, "ack_timeout", 0.0, CFG, self.rng)
        assert attempts == CFG.srl

    def test_nack_extends_wait(self):
        self.enqueue(payload=2)
        self.state.phase = "awaiting_ack"
        nack = Frame("NACK", 1, 0, 0, 112, 0.532e6, 0.532e6, 0.0, nack_sinr_index=3)
        actions = step(self.state, "frame_rx", 1e-3, CFG, self.rng, frame=nack)
        assert actions == [("set_timer",)]
        assert self.state.phase == "awaiting_nack_window"
        step(self.state, "frame_rx", 2e-3, CFG, self.rng, frame=ack_frame(0, 2))
        assert self.state.phase == "idle"

    def test_illegal_event_raises(self):
        with pytest.raises(ProtocolError):
            step(self.state, "backoff_expired", 0.0, CFG, self.rng)
        with pytest.raises(ProtocolError):
            step(self.state, "ack_timeout", 0.0, CFG, self.rng)


class TestNav:
    def test_nav_sets_horizon(self):
        s = MacState(node=2)
        f = make_data_frame()
        nav_update(s, f, 1.0)
        assert s.nav_until == pytest.approx(1.0 + 2.5e-3)

    def test_shorter_reservation_keeps_longer_nav(self):
        s = MacState(node=2)
        nav_update(s, make_data_frame(), 1.0)
        shorter = Frame("ACK", 0, 1, 0, 112, 0.532e6, 0.532e6, 1e-4)
        nav_update(s, shorter, 1.0)
        assert s.nav_until == pytest.approx(1.0 + 2.5e-3)

    def test_nav_blocks_countdown(self):
        rng = np.random.default_rng(0)
        s = MacState(node=2)
        step(s, "enqueue", 0.0, CFG, rng, payload=0)
        nav_update(s, make_data_frame(), 0.0)
        for _ in range(CFG.difs_slots + 5):
            step(s, "channel_idle_slot", 1e-4, CFG, rng)  # inside the NAV window
        assert s.phase == "frozen"
        assert s.idle_streak == 0


class TestAdvanceEquivalence:
    def test_matches_repeated_steps(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            streak = int(rng.integers(0, CFG.difs_slots + 1))
            remaining = int(rng.integers(1, 20))  # 0 never persists in backoff
            phase = "frozen" if streak < CFG.difs_slots else "backoff"

            ref = MacState(node=0, phase=phase, idle_streak=streak,
                           backoff_remaining=remaining, queue=[0])
            fast = MacState(node=0, phase=phase, idle_streak=streak,
                            backoff_remaining=remaining, queue=[0])

            expired_at = None
            for k in range(n):
                step(ref, "channel_idle_slot", 0.0, CFG, rng)
                if ref.phase == "backoff" and ref.backoff_remaining == 0:
                    expired_at = k + 1
                    break
            got = advance_idle_run(fast, n, CFG, 0)
            assert got == expired_at
            assert fast.phase == ref.phase
            assert fast.backoff_remaining == ref.backoff_remaining


def test_trace_line_format():
    line = format_trace_line(123.4, 7, "backoff", "channel_busy", "frozen", "none")
    assert line == "123.4,7,backoff,channel_busy,frozen,none"
    assert line.count(",") == 5


def test_tracer_records_transitions():
    from coopsense.mac import MacTracer

    rng = np.random.default_rng(1)
    tr = MacTracer(MacState(node=3), CFG)
    tr.step("enqueue", 0.0, rng, payload=1)
    tr.step("channel_busy", 1e-5, rng)
    assert tr.lines[0].startswith("0.0,3,idle,enqueue,frozen,")
    assert tr.lines[1] == "10.0,3,frozen,channel_busy,frozen,none"
    for line in tr.lines:
        assert line.count(",") == 5
