import json
from pathlib import Path

import pytest

from iot_arena.cli import main, load_preset, PRESET_NAMES
from iot_arena.kernel import SEC


@pytest.fixture
def tiny_scenario(tmp_path):
    cfg = load_preset("single-hop-5s")
    cfg.schedule.items_per_node = 5
    path = tmp_path / "tiny.json"
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh)
    return path


def test_presets_load_and_validate():
    for name in PRESET_NAMES:
        cfg = load_preset(name)
        cfg.validate()


def test_run_writes_artifacts(tiny_scenario, tmp_path):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(tiny_scenario), "--reps", "3",
               "--out", str(out), "--trace"])
    assert rc == 0
    assert (out / "manifest.json").exists()
    for rep in range(3):
        rep_dir = out / "ndn" / "single-hop-5s" / str(rep)
        for name in ("trace.jsonl", "ttc.csv", "loss.csv", "goodput.csv",
                     "linkstress.csv", "energy.csv", "overhead.csv",
                     "topology.json"):
            assert (rep_dir / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["runs"]) == 3


def test_same_invocation_byte_identical(tiny_scenario, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        rc = main(["run", "--scenario", str(tiny_scenario), "--reps", "2",
                   "--out", str(out), "--trace"])
        assert rc == 0
    for rep in range(2):
        rel = Path("ndn") / "single-hop-5s" / str(rep)
        for name in ("trace.jsonl", "ttc.csv", "loss.csv", "goodput.csv",
                     "linkstress.csv", "energy.csv", "overhead.csv"):
            assert (out_a / rel / name).read_bytes() == \
                (out_b / rel / name).read_bytes()


def test_parallel_matches_serial(tiny_scenario, tmp_path):
    out_a, out_b = tmp_path / "serial", tmp_path / "parallel"
    main(["run", "--scenario", str(tiny_scenario), "--reps", "2",
          "--out", str(out_a), "--trace"])
    main(["run", "--scenario", str(tiny_scenario), "--reps", "2",
          "--out", str(out_b), "--trace", "--parallel", "2"])
    for rep in range(2):
        rel = Path("ndn") / "single-hop-5s" / str(rep)
        assert (out_a / rel / "trace.jsonl").read_bytes() == \
            (out_b / rel / "trace.jsonl").read_bytes()


def test_protocol_override(tiny_scenario, tmp_path):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(tiny_scenario), "--protocol", "mqtt-q0",
               "--out", str(out)])
    assert rc == 0
    assert (out / "mqtt-q0" / "single-hop-5s" / "0" / "loss.csv").exists()


def test_invalid_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    cfg = load_preset("single-hop-5s").to_dict()
    cfg["protocol"] = "nonsense"
    bad.write_text(json.dumps(cfg))
    rc = main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_summarize(tiny_scenario, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", "--scenario", str(tiny_scenario), "--out", str(out)])
    rc = main(["summarize", "--in", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "ndn" in printed and "single-hop-5s" in printed


def test_matrix_smoke(tmp_path):
    """Ten protocols x six scenarios at minimal scale (structure check only)."""
    out = tmp_path / "matrix"
    rc = main(["matrix", "--preset", "paper", "--out", str(out),
               "--items", "2", "--parallel", "4"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["configs"]) == 60
    from iot_arena.scenario import PROTOCOLS
    for proto in PROTOCOLS:
        for scenario in PRESET_NAMES:
            assert (out / proto / scenario / "0" / "loss.csv").exists()
