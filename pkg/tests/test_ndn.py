import pytest

from iot_arena import trace as tr
from iot_arena.kernel import Kernel, SEC
from iot_arena.ndn import (ContentStore, DataMsg, Interest, LOCAL_FACE, NdnConfig,
                           NdnForwarder, data_bytes, interest_bytes)
from iot_arena.phymac import MacConfig, Radio
from iot_arena.topology import DEFAULT_PREFIX


def make_pair(p=1.0, **cfg_kw):
    """Two-node ICN setup: node 0 (consumer side) and node 1 (producer side)."""
    kernel = Kernel(seed=17)
    trace = tr.Trace("test")
    radio = Radio(kernel, trace, MacConfig())
    radio.add_link(0, 1, p)
    radio.add_link(1, 0, p)
    fwds = {}
    for node in (0, 1):
        fwd = NdnForwarder(kernel, radio, node, trace, NdnConfig(**cfg_kw), "test")
        fwds[node] = fwd
        radio.attach(node, lambda frame, src, f=fwd: (
            f.on_interest(src, frame.msg) if isinstance(frame.msg, Interest)
            else f.on_data(src, frame.msg)))
    return kernel, trace, radio, fwds


class TestWireSizes:
    def test_interest(self):
        assert interest_bytes() == 36

    def test_data_adds_payload_plus_four(self):
        assert data_bytes(48) == 88


class TestContentStore:
    def test_insert_lookup(self):
        cs = ContentStore(10240)
        cs.insert((1, 1), 48)
        assert cs.lookup((1, 1)) == 48

    def test_lookup_unknown(self):
        cs = ContentStore(10240)
        assert cs.lookup((1, 9)) is None

    def test_lru_eviction_respects_budget(self):
        cs = ContentStore(10240)
        for seq in range(300):
            cs.insert((1, seq), 48)
        assert cs.used_bytes <= 10240
        assert cs.lookup((1, 0)) is None  # oldest evicted
        assert cs.lookup((1, 299)) == 48

    def test_eviction_makes_room_exactly(self):
        cs = ContentStore(10240)
        used = 0
        while used + 48 <= 10240:
            cs.insert((1, used), 48)
            used += 48
        cs.insert((2, 1), 100)
        assert cs.used_bytes <= 10240

    def test_oversized_rejected(self):
        cs = ContentStore(100)
        with pytest.raises(ValueError):
            cs.insert((1, 1), 101)


class TestInterestPipeline:
    def test_cs_hit_answers_without_forwarding(self):
        kernel, trace, radio, fwds = make_pair()
        fwds[1].cs.insert((3, 7), 48)
        got = []
        fwds[0].on_local_data = lambda d: got.append(d.name)
        fwds[0].express_interest(Interest((3, 7)), out_face=1)
        kernel.run_until(1 * SEC)
        assert got == [(3, 7)]
        # producer never forwarded anything: only interest + data frames
        kinds = [r.frame for r in trace.records if r.kind == tr.TX]
        assert kinds.count(tr.F_INTEREST) == 1 and kinds.count(tr.F_DATA) == 1

    def test_aggregation_single_forward(self):
        kernel, trace, radio, fwds = make_pair()
        radio.add_link(2, 1, 1.0)
        radio.add_link(1, 2, 1.0)
        radio.add_link(3, 1, 1.0)
        radio.add_link(1, 3, 1.0)
        fwds[1].fib[9] = 0  # upstream toward node 0
        fwds[1].on_interest(2, Interest((9, 1)))
        fwds[1].on_interest(3, Interest((9, 1)))
        entry = fwds[1].pit[(9, 1)]
        assert entry.in_faces == [2, 3]
        kernel.run_until(1 * SEC)
        tx_interests = [r for r in trace.records
                        if r.kind == tr.TX and r.frame == tr.F_INTEREST and r.node == 1]
        assert len(tx_interests) == 1

    def test_no_route_drop(self):
        kernel, trace, radio, fwds = make_pair()
        fwds[1].on_interest(0, Interest((99, 1)))
        drops = [r for r in trace.records if r.info == "no-route"]
        assert len(drops) == 1

    def test_pit_drop_new_policy(self):
        kernel, trace, radio, fwds = make_pair(pit_capacity=1, pit_policy="drop-new")
        fwds[1].fib[DEFAULT_PREFIX] = 0
        fwds[1].on_interest(0, Interest((1, 1)))
        fwds[1].on_interest(0, Interest((2, 1)))
        assert (1, 1) in fwds[1].pit and (2, 1) not in fwds[1].pit
        assert any(r.info == "pit-drop" and r.item == (2, 1) for r in trace.records)

    def test_pit_overwrite_oldest_policy(self):
        kernel, trace, radio, fwds = make_pair(pit_capacity=1,
                                               pit_policy="overwrite-oldest")
        fwds[1].fib[DEFAULT_PREFIX] = 0
        fwds[1].on_interest(0, Interest((1, 1)))
        fwds[1].on_interest(0, Interest((2, 1)))
        assert (1, 1) not in fwds[1].pit and (2, 1) in fwds[1].pit
        assert any(r.info == "pit-overwrite" and r.item == (1, 1)
                   for r in trace.records)

    def test_pit_occupancy_never_exceeds_capacity(self):
        kernel, trace, radio, fwds = make_pair(pit_capacity=4,
                                               pit_policy="overwrite-oldest")
        fwds[1].fib[DEFAULT_PREFIX] = 0
        for seq in range(20):
            fwds[1].on_interest(0, Interest((seq, 1)))
            assert len(fwds[1].pit) <= 4


class TestDataPipeline:
    def test_fanout_to_all_in_faces(self):
        kernel, trace, radio, fwds = make_pair()
        radio.add_link(1, 4, 1.0)
        radio.add_link(4, 1, 1.0)
        radio.add_link(1, 5, 1.0)
        radio.add_link(5, 1, 1.0)
        fwds[1].fib[7] = 0
        fwds[1].on_interest(4, Interest((7, 1)))
        fwds[1].on_interest(5, Interest((7, 1)))
        fwds[1].on_data(0, DataMsg((7, 1), 48))
        kernel.run_until(1 * SEC)
        data_tx = [r for r in trace.records
                   if r.kind == tr.TX and r.frame == tr.F_DATA and r.node == 1]
        assert sorted(r.dst for r in data_tx) == [4, 5]
        assert (7, 1) not in fwds[1].pit

    def test_unsolicited_dropped_and_not_cached(self):
        kernel, trace, radio, fwds = make_pair()
        fwds[1].on_data(0, DataMsg((8, 1), 48))
        assert any(r.info == "unsolicited" for r in trace.records)
        assert fwds[1].cs.lookup((8, 1)) is None

    def test_ack_data_not_cached(self):
        kernel, trace, radio, fwds = make_pair()
        fwds[1].fib[DEFAULT_PREFIX] = 0
        fwds[1].on_interest(0, Interest((5, 1)))
        fwds[1].on_data(0, DataMsg((5, 1), 0, is_ack=True))
        assert fwds[1].cs.lookup((5, 1)) is None
        assert (5, 1) not in fwds[1].pit


class TestHopRetransmission:
    def test_exactly_four_retransmissions_then_silence(self):
        """Dead link: sends at t0, +2 s, +4 s, +6 s, +8 s; entry expires at 10 s."""
        kernel, trace, radio, fwds = make_pair(p=0.0)
        t0 = kernel.now
        fwds[0].express_interest(Interest((1, 1), 10 * SEC), out_face=1)
        kernel.run_until(30 * SEC)
        sends = [r.t for r in trace.records
                 if r.kind == tr.TX and r.frame == tr.F_INTEREST
                 and r.node == 0 and r.attempt == 1]
        assert sends == [t0, t0 + 2 * SEC, t0 + 4 * SEC, t0 + 6 * SEC, t0 + 8 * SEC]
        expiry = [r for r in trace.records if r.info == "pit-expire" and r.node == 0]
        assert len(expiry) == 1 and expiry[0].t == t0 + 10 * SEC

    def test_data_arrival_cancels_pending_timers(self):
        kernel, trace, radio, fwds = make_pair()
        fwds[1].cs.insert((1, 1), 48)
        fwds[0].express_interest(Interest((1, 1)), out_face=1)
        kernel.run_until(20 * SEC)
        sends = [r for r in trace.records
                 if r.kind == tr.TX and r.frame == tr.F_INTEREST and r.node == 0]
        assert len(sends) == 1  # no retransmissions after satisfaction

    def test_expiry_notifies_local_consumer(self):
        kernel, trace, radio, fwds = make_pair(p=0.0)
        expired = []
        fwds[0].on_local_expire = expired.append
        fwds[0].express_interest(Interest((1, 1), 10 * SEC), out_face=1)
        kernel.run_until(11 * SEC)
        assert expired == [(1, 1)]

    def test_feedback_mode_arms_only_on_mac_failure(self):
        kernel, trace, radio, fwds = make_pair(p=1.0, retx_mode="feedback")
        # healthy link, content not yet published: the entry stays quiet
        fwds[1].fib[1] = LOCAL_FACE
        fwds[0].fib[1] = 1
        fwds[0].express_interest(Interest((1, 5), 10 * SEC))
        kernel.run_until(9 * SEC)
        sends = [r for r in trace.records
                 if r.kind == tr.TX and r.frame == tr.F_INTEREST and r.node == 0]
        assert len(sends) == 1

    def test_publish_satisfies_pending_entry(self):
        kernel, trace, radio, fwds = make_pair()
        got = []
        fwds[0].on_local_data = lambda d: got.append(d.name)
        fwds[1].fib[1] = LOCAL_FACE
        fwds[0].fib[1] = 1
        fwds[0].express_interest(Interest((1, 5), 10 * SEC))
        kernel.run_until(1 * SEC)
        fwds[1].publish((1, 5), 48)
        kernel.run_until(2 * SEC)
        assert got == [(1, 5)]
