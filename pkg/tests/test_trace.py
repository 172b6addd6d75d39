from hypothesis import given, strategies as st

from iot_arena import trace as tr
from iot_arena.kernel import SEC
from iot_arena.ndn import ContentStore
from iot_arena.scenario import ScenarioConfig, ScheduleSpec, TopologySpec, run_experiment
from iot_arena.trace import TraceRecord, read_jsonl


def test_jsonl_roundtrip(tmp_path):
    cfg = ScenarioConfig(
        name="t", protocol="mqtt-q1", seed=3,
        topology=TopologySpec(kind="single-hop", p=0.9),
        schedule=ScheduleSpec(mode="periodic", interval_us=2 * SEC,
                              items_per_node=15))
    res = run_experiment(cfg)
    path = tmp_path / "trace.jsonl"
    res.trace.write_jsonl(path)
    back = read_jsonl(path)
    assert len(back) == len(res.trace.records)
    for a, b in zip(res.trace.records, back):
        assert a.to_json() == b.to_json()


def test_json_field_order_stable():
    rec = TraceRecord(t=5, node=1, kind=tr.TX, proto="x", frame="data",
                      item=(3, 9), bytes=40, src=1, dst=0, attempt=2)
    assert rec.to_json() == ('{"t":5,"node":1,"kind":"tx","proto":"x",'
                             '"frame":"data","item":"p3/9","bytes":40,'
                             '"src":1,"dst":0,"attempt":2}')


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(1, 400)), max_size=80))
def test_content_store_never_exceeds_budget(ops):
    """LRU cache invariant under arbitrary insert sequences."""
    cs = ContentStore(2000)
    for seq, size in ops:
        if size <= cs.capacity_bytes:
            cs.insert((1, seq), size)
        assert cs.used_bytes <= cs.capacity_bytes
        assert sum(cs.stored.values()) == cs.used_bytes
