import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredflow.cli import EXIT_IDENTITY, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main
from fredflow.errors import InputError
from fredflow.presets import PathSpec, battery_member, preset_spec, scalar_tanh


def run(capsys, *argv):
    code = main(list(argv))
    out = json.loads(capsys.readouterr().out)
    return code, out


def strip_header(report):
    return {k: v for k, v in report.items() if k != "header"}


def test_sf_scalar_tanh(capsys):
    code, out = run(capsys, "sf", "--preset", "scalar-tanh")
    assert code == EXIT_OK
    assert out["result"]["sf"] == 1 and out["result"]["methods_agree"] is True
    code, out = run(capsys, "sf", "--preset", "scalar-tanh", "--reversed")
    assert out["result"]["sf"] == -1


def test_index_tanh_diag(capsys):
    code, out = run(capsys, "index", "--preset", "tanh-diag")
    r = out["result"]
    assert code == EXIT_OK
    assert (r["ker"], r["coker"], r["index"], r["pair_index"], r["match"]) == (1, 1, 0, 0, True)


def test_verify_battery(capsys):
    code, out = run(capsys, "verify", "--preset", "random-battery", "--seed", "7", "--count", "50")
    r = out["result"]
    assert code == EXIT_OK
    assert (r["passes"], r["total"]) == (50, 50)
    assert r["summary"] == "50/50 identity passes"
    assert [p["id"] for p in r["paths"]] == list(range(50))


def test_reports_are_deterministic(capsys):
    argv = ("stable", "--preset", "tanh-diag")
    _, a = run(capsys, *argv)
    _, b = run(capsys, *argv)
    assert "timestamp" in a["header"]
    assert json.dumps(strip_header(a), sort_keys=True) == json.dumps(strip_header(b), sort_keys=True)


def test_exit_codes(capsys, tmp_path):
    code, out = run(capsys, "sf", "--preset", "rotation")
    assert code == EXIT_NUMERICAL and out["error"]["type"] == "NonHyperbolicError"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out = run(capsys, "sf", str(bad))
    assert code == EXIT_INPUT and out["error"]["type"] == "InputError"
    code, _ = run(capsys, "sf")
    assert code == EXIT_INPUT
    code, _ = run(capsys, "stable", "--preset", "patch")
    assert code == EXIT_INPUT


def test_verify_counts_failed_members(capsys):
    # a member that cannot be verified is a failed identity, not a crash
    code, out = run(capsys, "verify", "--preset", "rotation")
    r = out["result"]
    assert code == EXIT_IDENTITY
    assert r["summary"] == "0/1 identity passes"
    assert r["paths"][0]["error"] == "NonHyperbolicError"


def test_verify_flags_mislabeled_limits(capsys, tmp_path):
    spec = PathSpec.from_path(scalar_tanh(), list(np.linspace(-40, 40, 801)))
    spec.limit_minus = [1.0]   # true value is -1
    f = tmp_path / "lie.json"
    f.write_text(spec.to_json())
    code, out = run(capsys, "verify", str(f))
    assert code == EXIT_IDENTITY
    assert out["result"]["passes"] == 0


def test_projector_command(capsys):
    code, out = run(capsys, "projector", "--matrix", "[[0, 3], [1, 0]]")
    r = out["result"]["matrix"]
    s = np.sqrt(3.0)
    assert code == EXIT_OK and r["rank_plus"] == 1
    assert np.allclose(r["p_plus"], 0.5 * np.array([[1.0, s], [1.0 / s, 1.0]]), atol=1e-10)
    code, out = run(capsys, "projector", "--preset", "tanh-diag")
    assert set(out["result"]) == {"limit_minus", "limit_plus"}


def test_csv_dump(capsys, tmp_path):
    csv_file = tmp_path / "eig.csv"
    code, _ = run(capsys, "sf", "--preset", "scalar-tanh", "--csv", str(csv_file))
    rows = csv_file.read_text().splitlines()
    assert code == EXIT_OK
    assert rows[0] == "t,re_lambda_0" and len(rows) == 402
    t, lam = map(float, rows[201].split(","))
    assert t == 0.0 and lam == pytest.approx(0.0, abs=1e-12)


def test_out_file_and_demo(capsys, tmp_path):
    out = tmp_path / "demo.json"
    assert main(["demo", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["result"]["all_ok"]
    assert all(c["ok"] for c in rep["result"]["examples"])


def test_sample_spec_round_trips_through_cli(capsys, tmp_path):
    spec = PathSpec.from_path(scalar_tanh(), list(np.linspace(-40, 40, 1601)))
    f = tmp_path / "tanh.json"
    f.write_text(spec.to_json())
    code, out = run(capsys, "sf", str(f))
    assert code == EXIT_OK and out["result"]["sf"] == 1


def test_pathspec_validation():
    with pytest.raises(InputError):
        PathSpec.from_dict({"dim": 1, "kind": "preset", "name": "scalar-tanh", "colour": 3})
    with pytest.raises(InputError):
        PathSpec.from_dict({"dim": 1, "kind": "samples", "times": [0.0, 0.0], "matrices": [[1.0], [1.0]],
                            "limit_minus": [1.0], "limit_plus": [1.0]})
    with pytest.raises(InputError):
        PathSpec.from_dict({"dim": 2, "kind": "preset", "name": "nope"})
    with pytest.raises(InputError):
        PathSpec.from_dict({"kind": "preset", "name": "tanh-diag"})
    with pytest.raises(InputError):
        PathSpec.from_json("[1, 2]")


def test_preset_round_trip():
    for spec in (preset_spec("tanh-diag"), preset_spec("rotation", angle=0.3),
                 preset_spec("random-battery", seed=3, count=4),
                 preset_spec("patch", dim=2, x=[[1.0, 1.0]], y=[])):
        again = PathSpec.from_json(spec.to_json())
        assert again == spec


@settings(max_examples=20)
@given(st.integers(1, 3), st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=6, unique=True),
       st.integers(0, 10**6))
def test_sample_spec_round_trip(n, times, seed):
    times = sorted(times)
    if np.min(np.diff(times)) <= 0:
        return
    rng = np.random.default_rng(seed)
    flat = lambda: [float(v) for v in rng.standard_normal(n * n)]
    spec = PathSpec(n, "samples", "s", {}, times, [flat() for _ in times], flat(), flat())
    assert PathSpec.from_json(spec.to_json()) == spec
    again = PathSpec.from_dict(json.loads(spec.to_json()))
    assert again.to_json() == spec.to_json()


def test_battery_is_reproducible():
    a, b = battery_member(7, 5), battery_member(7, 5)
    ts = np.linspace(-10, 10, 21)
    assert np.array_equal(a.sample(ts), b.sample(ts))
    assert np.array_equal(a.limit_plus, b.limit_plus)
