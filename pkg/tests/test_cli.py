import json
import math
from statistics import NormalDist

import pytest

from imfid.cli import run
from imfid.sets import parse_set

Z975 = NormalDist().inv_cdf(0.975)


def _run(tmp_path, name, argv, csv=True):
    out = [*argv, "--out-json", str(tmp_path / f"{name}.json")]
    if csv:
        out += ["--out-csv", str(tmp_path / f"{name}.csv")]
    code = run(out)
    payload = json.loads((tmp_path / f"{name}.json").read_text()) if code != 2 else None
    return code, payload


def test_cc_normal_location_example(tmp_path):
    code, js = _run(tmp_path, "nl", ["cc", "--model", "normal-location", "--data", "1",
                                     "--randomset", "two-sided", "--window", "-4", "6",
                                     "--levels", "0.95"])
    assert code == 0
    S = parse_set(js["levels"]["0.95"])
    assert S.bounds == pytest.approx((1 - Z975, 1 + Z975), abs=1e-6)
    assert js["kind"] == "exact" and js["provenance"] == "im"
    rows = (tmp_path / "nl.csv").read_text().splitlines()
    assert rows[0] == "theta,cc" and len(rows) == 2002
    # nine significant digits
    assert all(len(v.split(",")[1].replace(".", "").lstrip("0")) <= 9 for v in rows[1:])


def test_oracle_example(tmp_path):
    code, js = _run(tmp_path, "or", ["oracle", "--model", "discrete-shift:4", "--data", "5"],
                    csv=False)
    assert code == 0
    assert js["theorems"]["violations"] == []
    assert all(len(t["rows"]) == 16 for t in js["tables"])


def test_cc_fieller_example(tmp_path):
    code, js = _run(tmp_path, "fr", ["cc", "--model", "two-normal", "--data", "2", "1",
                                     "--functional", "ratio", "--levels", "0.95"])
    assert code == 0
    S = parse_set(js["levels"]["0.95"])
    x, y = 2.0, 1.0
    a, b, c = y * y - Z975**2, -2 * x * y, x * x - Z975**2
    disc = math.sqrt(b * b - 4 * a * c)
    r1, r2 = sorted(((-b - disc) / (2 * a), (-b + disc) / (2 * a)))
    gap = S.complement()
    assert gap.is_bounded()
    assert gap.bounds == pytest.approx((r1, r2), abs=1e-6)


def test_belief_command(tmp_path):
    code, js = _run(tmp_path, "b", ["belief", "--model", "discrete-shift:4", "--data", "5",
                                    "--randomset", "left", "--assertion", "{3,4,5}"], csv=False)
    assert code == 0
    rep = js["reports"]["{3,4,5}"]
    assert rep["belief"] == pytest.approx(0.75) and rep["plausibility"] == 1


def test_fiducial_header_records_run(tmp_path):
    code, js = _run(tmp_path, "f", ["fiducial", "--model", "normal-location", "--data", "0",
                                    "--n", "50", "--seed", "3", "--epsilon", "0"])
    assert code == 0
    lines = (tmp_path / "f.csv").read_text().splitlines()
    header = dict(line[2:].split("=", 1) for line in lines if line.startswith("# "))
    assert header["seed"] == "3" and header["tie_rule"] == "leftmost"
    assert float(header["epsilon"]) == 0 and float(header["acceptance_rate"]) == 1
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == "theta" and len(body) == 51


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(["fiducial", "--model", "normal-location", "--data", "0", "--n", "5"]) == 2
    assert run(["cc", "--model", "no-such-model", "--data", "0"]) == 2
    assert run(["belief", "--model", "normal-location", "--data", "0",
                "--assertion", "(1,"]) == 2
    assert run(["frobnicate"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert run(["cc", "--config", str(bad)]) == 2


def test_verdict_failure_exits_1(tmp_path):
    table = tmp_path / "sq.csv"
    table.write_text("u,gamma\n" + "".join(f"{k / 20},{(k / 20) ** 2}\n" for k in range(21)))
    code, js = _run(tmp_path, "v", ["validate", "--model", "normal-location",
                                    "--check", "validity-condition", "--gamma-table", str(table),
                                    "--n-mc", "10000", "--seed", "1"], csv=False)
    assert code == 1
    code, _ = _run(tmp_path, "v2", ["validate", "--model", "normal-location",
                                    "--check", "validity-condition", "--randomset", "two-sided",
                                    "--n-mc", "10000", "--seed", "1"], csv=False)
    assert code == 0


def test_validate_coverage_worker_independent(tmp_path):
    base = ["validate", "--model", "normal-location", "--check", "cc-coverage",
            "--randomset", "two-sided", "--theta0", "0", "--n-rep", "2000", "--seed", "9"]
    c1, j1 = _run(tmp_path, "w1", [*base, "--workers", "1"], csv=False)
    c2, j2 = _run(tmp_path, "w3", [*base, "--workers", "3"], csv=False)
    assert c1 == c2 == 0
    j1.pop("config"), j2.pop("config")
    assert j1 == j2


@pytest.mark.parametrize("argv", [
    ["cc", "--model", "normal-location", "--data", "0.3", "--randomset", "left",
     "--window", "-5", "5", "--levels", "0.5", "0.9"],
    ["cc", "--model", "two-normal", "--data", "2", "1", "--functional", "mux",
     "--levels", "0.95"],
    ["fiducial", "--model", "normal-location", "--data", "1", "--n", "200", "--seed", "4"],
])
def test_config_echo_round_trips(tmp_path, argv):
    code, _ = _run(tmp_path, "a", argv)
    assert code == 0
    code = run(["cc" if argv[0] == "cc" else argv[0], "--config", str(tmp_path / "a.json"),
                "--out-csv", str(tmp_path / "b.csv"), "--out-json", str(tmp_path / "b.json")])
    assert code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    for d in (a, b):
        d["config"].pop("out_csv"), d["config"].pop("out_json")
    assert a == b
