import numpy as np
import pytest

from telesim.netshape import (
    MTU_BYTES,
    BurstSchedule,
    DceLink,
    LinkPolicy,
    RelayStore,
    load_policy,
)


class TestBurstSchedule:
    def test_continuous_after_horizon(self):
        sched = BurstSchedule(LinkPolicy())
        for t in np.linspace(2700, 2760, 200):
            in_burst, _ = sched.query(float(t))
            assert in_burst

    def test_duty_cycle_at_start(self):
        # T(0) = 30 s: over the first ~10 periods the duty cycle is ~1/30
        policy = LinkPolicy(blackout_horizon=1e12)  # keep T constant at 30
        sched = BurstSchedule(policy)
        ts = np.arange(0.0, 300.0, 0.01)
        duty = np.mean([sched.query(float(t))[0] for t in ts])
        assert abs(duty - 1.0 / 30.0) < 0.005

    def test_period_monotone(self):
        policy = LinkPolicy()
        periods = [policy.burst_period(t) for t in np.linspace(0, 3000, 50)]
        assert all(a >= b for a, b in zip(periods, periods[1:]))
        assert periods[-1] == policy.burst_duration

    def test_deterministic(self):
        q1 = [BurstSchedule(LinkPolicy()).query(t) for t in (5.0, 100.0, 2000.0)]
        q2 = [BurstSchedule(LinkPolicy()).query(t) for t in (5.0, 100.0, 2000.0)]
        assert q1 == q2


class TestDceAdmit:
    def offered_throughput(self, link, offered_rate, duration, pkt=MTU_BYTES, t0=0.0):
        # count bits by completion time so queued packets land in-window
        interval = pkt * 8 / offered_rate
        delivered = 0
        t = t0
        while t < t0 + duration:
            status, delay = link.admit(pkt, t)
            if status == "delivered" and t + delay < t0 + duration:
                delivered += pkt * 8
            t += interval
        return delivered / duration

    def test_outdoor_capacity(self):
        link = DceLink(LinkPolicy(downlink_mode="outdoor"), "down")
        rate = self.offered_throughput(link, 600e6, 60.0, pkt=65000)
        assert abs(rate - 300e6) / 300e6 < 0.05

    def test_indoor_between_bursts(self):
        link = DceLink(LinkPolicy(), "down")
        # offer 1200-byte frames at 1 Hz from t=1 to t=29 (before first burst)
        delivered_bits = 0
        for t in range(1, 29):
            status, _ = link.admit(1200, float(t))
            if status == "delivered":
                delivered_bits += 9600
        assert delivered_bits / 28 <= 9600 + 1e-9

    def test_indoor_after_horizon_like_outdoor(self):
        link = DceLink(LinkPolicy(), "down")
        link.admit(10, 2799.0)  # advance link clock
        rate = self.offered_throughput(link, 600e6, 10.0, pkt=65000, t0=2800.0)
        assert abs(rate - 300e6) / 300e6 < 0.05

    def test_loss_rate_within_3_sigma(self):
        p = 0.1
        link = DceLink(
            LinkPolicy(downlink_mode="outdoor", loss_prob=p, outdoor_rate=1e12), "down"
        )
        n = 100_000
        losses = 0
        for i in range(n):
            status, reason = link.admit(100, i * 1e-3)
            if status == "dropped":
                assert reason == "loss"
                losses += 1
        sigma = (p * (1 - p) / n) ** 0.5
        assert abs(losses / n - p) < 3 * sigma

    def test_throughput_conservation(self):
        policy = LinkPolicy(downlink_mode="outdoor", outdoor_rate=1e6)
        link = DceLink(policy, "down")
        delivered = 0
        rng = np.random.default_rng(0)
        t = 0.0
        while t < 20.0:
            size = int(rng.integers(100, 1500))
            status, delay = link.admit(size, t)
            if status == "delivered" and t + delay < 20.0:
                delivered += size * 8
            t += float(rng.uniform(0.0001, 0.01))
        budget = 1e6 * 20.0 + policy.bucket_depth_bytes * 8
        assert delivered <= budget

    def test_time_must_not_decrease(self):
        link = DceLink(LinkPolicy(), "down")
        link.admit(100, 5.0)
        with pytest.raises(ValueError):
            link.admit(100, 4.0)

    def test_uplink_rate(self):
        link = DceLink(LinkPolicy(), "up")
        rate = self.offered_throughput(link, 20000, 30.0, pkt=120)
        assert rate <= 9600 + 960

    def test_stats_jsonl(self):
        link = DceLink(LinkPolicy(downlink_mode="outdoor"), "down")
        link.admit(1000, 0.5)
        out = link.stats_jsonl()
        assert '"delivered_bits": 8000' in out


class TestRelay:
    def test_latest_wins(self):
        store = RelayStore()
        store.ingest("map", b"old", sequence=1)
        store.ingest("map", b"new", sequence=2)
        assert store.latest("map") == b"new"
        store.ingest("map", b"stale", sequence=1)
        assert store.latest("map") == b"new"

    def test_burst_covers_all_topics(self):
        store = RelayStore()
        for i in range(10):
            store.ingest(f"topic{i}", bytes(100_000), sequence=1)
        packets = store.stream(1.0, rate=300e6)
        assert {t for t, _ in packets} == {f"topic{i}" for i in range(10)}

    def test_empty_store_keepalive(self):
        assert RelayStore().stream(1.0) == [RelayStore.KEEPALIVE]

    def test_idempotent_under_repeat_ingest(self):
        a, b = RelayStore(), RelayStore()
        a.ingest("x", b"payload", sequence=5)
        for _ in range(10):
            b.ingest("x", b"payload", sequence=5)
        assert a.stream(0.001, rate=1e6) == b.stream(0.001, rate=1e6)


class TestConfig:
    def test_load_policy(self, tmp_path):
        cfg = tmp_path / "link.conf"
        cfg.write_text(
            "# test link\n"
            "downlink_mode = outdoor\n"
            "loss_prob = 0.02\n"
            "burst_period_t0 = 10\n"
            "seed = 42\n"
        )
        p = load_policy(cfg)
        assert p.downlink_mode == "outdoor"
        assert p.loss_prob == 0.02
        assert p.burst_period_t0 == 10.0
        assert p.seed == 42

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.conf"
        cfg.write_text("bogus = 1\n")
        with pytest.raises(ValueError):
            load_policy(cfg)
