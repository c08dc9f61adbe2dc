import io

import pandas as pd
import pytest

from conlab.cli import main

from conftest import REFERENCE_TREE, RTT_SOURCE

# one request from c1, nothing cached anywhere
SINGLE_REQUEST = REFERENCE_TREE + "\n[schedule]\n0us c1 /content/00\n"

# (time, node, action, name) of SINGLE_REQUEST's trace
GOLDEN = [
    (0, "c1", "request", "/content/00"),
    (5_100, "R1", "forward", "/content/00"),
    (15_200, "R0", "forward", "/content/00"),
    (25_300, "P", "send_data", "/content/00"),
    (35_400, "R0", "send_data", "/content/00"),
    (35_400, "R0", "cache", "/content/00"),
    (45_500, "R1", "send_data", "/content/00"),
    (45_500, "R1", "cache", "/content/00"),
    (RTT_SOURCE, "c1", "deliver", "/content/00"),
]

WARM_FIRST_HOP = "\n[schedule]\n0us c2 /content/01\n1ms c2 /content/02\n2ms c3 /content/30\n"


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("CONLAB_SEED", raising=False)


def _write(tmp_path, text: str, name: str = "scenario.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def _trace(path) -> pd.DataFrame:
    return pd.read_csv(path, keep_default_na=False)


def _rows(df: pd.DataFrame):
    return list(df[["time", "node", "action", "name"]].itertuples(index=False, name=None))


def test_single_request_trace_matches_golden(tmp_path):
    scenario = _write(tmp_path, SINGLE_REQUEST)
    out = tmp_path / "trace.csv"
    assert main(["simulate", str(scenario), "--out", str(out)]) == 0
    df = _trace(out)
    assert _rows(df) == GOLDEN
    assert df["detail"].iloc[3] == "origin"
    assert df["detail"].iloc[-1] == f"rtt={RTT_SOURCE}"


def test_seed_leaves_deterministic_trace_alone(tmp_path):
    scenario = _write(tmp_path, SINGLE_REQUEST)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", str(scenario), "--seed", "1", "--out", str(a)]) == 0
    assert main(["simulate", str(scenario), "--seed", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_only_jittered_timings(tmp_path):
    scenario = _write(tmp_path, REFERENCE_TREE + "jitter 500us\n[schedule]\n0us c1 /content/00\n")
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["simulate", str(scenario), "--seed", "1", "--out", str(a)]) == 0
    assert main(["simulate", str(scenario), "--seed", "1", "--out", str(c)]) == 0
    assert main(["simulate", str(scenario), "--seed", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == c.read_bytes()
    assert a.read_bytes() != b.read_bytes()
    ta, tb = _trace(a), _trace(b)
    events = ["node", "action", "name", "face"]
    assert list(ta[events].itertuples(index=False)) == list(tb[events].itertuples(index=False))
    assert [(n, act, nm) for _, n, act, nm in _rows(ta)] == [(n, act, nm) for _, n, act, nm in GOLDEN]
    assert list(ta["time"]) != list(tb["time"])


def test_attack_dump_reports_first_hop_names(tmp_path):
    attack = "\n[attack]\nkind dump\nadversary c1\nprefix /content\nscope 2\n"
    scenario = _write(tmp_path, REFERENCE_TREE + WARM_FIRST_HOP + attack)
    out, metrics = tmp_path / "dump.csv", tmp_path / "dump_metrics.csv"
    assert main(["attack", "dump", str(scenario), "--out", str(out), "--metrics", str(metrics)]) == 0
    assert out.read_text(encoding="utf-8") == "probe,name,in_snapshot\n1,/content/01,1\n2,/content/02,1\n"
    lines = metrics.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "metric,value"
    assert "jaccard,1.000000" in lines
    assert "probes,3.000000" in lines


def test_attack_timing_to_stdout(tmp_path, capsys):
    attack = "\n[attack]\nkind timing\nadversary c1\ntrials 12\nepsilon 1010us\n"
    scenario = _write(tmp_path, REFERENCE_TREE + attack)
    assert main(["attack", "timing", str(scenario)]) == 0
    df = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert len(df) == 12
    assert (df["verdict"] == df["truth"]).all()


def test_attack_unknown_kind_is_usage_error(tmp_path):
    scenario = _write(tmp_path, REFERENCE_TREE)
    assert main(["attack", "fingerprint", str(scenario)]) == 2


@pytest.mark.parametrize("kind,attack", [
    ("timing", "kind timing\nadversary c1\ntrials 9\n"),
    ("monitor", "kind monitor\nadversary c1\ntrials 4\nperiod 500ms\nhorizon 2s\n"),
    ("dump", "kind dump\nadversary c1\nprefix /\n"),
])
def test_attack_output_is_byte_identical_across_runs(tmp_path, kind, attack):
    scenario = _write(tmp_path, REFERENCE_TREE + WARM_FIRST_HOP + "\n[attack]\n" + attack)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ma, mb = tmp_path / "ma.csv", tmp_path / "mb.csv"
    assert main(["attack", kind, str(scenario), "--out", str(a), "--metrics", str(ma)]) == 0
    assert main(["attack", kind, str(scenario), "--out", str(b), "--metrics", str(mb)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert ma.read_bytes() == mb.read_bytes()


def test_compare_output_is_byte_identical_across_runs(tmp_path):
    workload = "\n[workload]\nzipf exponent=1.0 requests=150 seed=5 interval=2ms\n"
    scenario = _write(tmp_path, REFERENCE_TREE + workload)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["compare-defenses", str(scenario), "--defenses", "wait_before_reply,delay_first_k,probabilistic"]
    assert main(args + ["--workers", "1", "--out", str(a)]) == 0
    assert main(args + ["--workers", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
