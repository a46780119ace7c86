import json
import math
import subprocess
import sys

import pytest

from killing_geodesics import cli
from killing_geodesics.errors import SearchFailureError
from killing_geodesics.report import dumps

SQRT2 = math.sqrt(2.0)


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "killing_geodesics", *args],
        capture_output=True,
        text=True,
        timeout=300,
    )
    return proc


class TestParsing:
    def test_special_constants(self):
        assert cli.parse_scalar("sqrt2") == SQRT2
        assert cli.parse_scalar("golden") == (1 + math.sqrt(5)) / 2
        assert cli.parse_scalar("pi") == math.pi
        assert cli.parse_scalar("2pi") == 2 * math.pi
        assert cli.parse_scalar("-pi") == -math.pi
        assert cli.parse_scalar("0.25") == 0.25

    def test_vector(self):
        assert cli.parse_vector("1,sqrt2") == (1.0, SQRT2)


class TestJsonEmitter:
    def test_seventeen_digit_floats(self):
        assert dumps(0.1) == "0.10000000000000001"
        assert dumps(1.0) == "1"
        assert dumps(-2.0000000000000004) == "-2.0000000000000004"

    def test_roundtrip(self):
        obj = {"a": [1, 2.5, None, True], "b": {"c": "x\"y"}}
        assert json.loads(dumps(obj)) == obj


class TestCommands:
    def test_list(self):
        proc = run_cli("list")
        assert proc.returncode == 0
        names = proc.stdout.split()
        assert names == ["flat-torus", "klein-bottle", "stationary-s3", "mapping-torus", "commuting-t4"]

    def test_analyze_klein_bottle(self):
        proc = run_cli("analyze", "klein-bottle", "--seed", "7")
        assert proc.returncode == 0
        report = json.loads(proc.stdout)
        assert report["entry_name"] == "klein-bottle"
        assert report["degenerate_constant"] is True
        assert report["signature"] == [1, 1]
        scan = report["fiber_scan"]
        exceptional = [row for row in scan if row["start"][0] in (0.0, 0.5)]
        assert len(exceptional) == 2
        for row in exceptional:
            assert row["period"] == pytest.approx(1.0, abs=1e-6)
            assert 0.0 <= row["orbit_coordinate"] <= 0.5
        for row in scan:
            assert 0.0 <= row["orbit_coordinate"] <= 0.5

    def test_analyze_null_torus(self):
        proc = run_cli("analyze", "flat-torus", "--slope", "1,1", "--seed", "3")
        assert proc.returncode == 0
        report = json.loads(proc.stdout)
        assert report["degenerate_constant"] is True
        assert report["critical_orbits"][0]["f_value"] == pytest.approx(0.0, abs=1e-12)

    def test_approximate_flat_torus(self):
        proc = run_cli("approximate", "flat-torus", "--slope", "1,sqrt2", "--n", "3", "--seed", "5")
        assert proc.returncode == 0
        report = json.loads(proc.stdout)
        approx = report["approximation"]
        assert [c["q"] for c in approx["convergents"]] == [1, 2, 5]
        periods = [row["closure_period"] for row in approx["per_approximant"]]
        assert periods == pytest.approx([1.0, 2.0, 5.0], abs=1e-6)

    def test_approximate_zero_convergents(self):
        proc = run_cli("approximate", "stationary-s3", "--n", "0")
        assert proc.returncode == 0
        report = json.loads(proc.stdout)
        assert report["approximation"]["convergents"] == []

    def test_trace_klein(self, tmp_path):
        out = tmp_path / "trace.csv"
        proc = run_cli("trace", "klein-bottle", "--start", "0,0", "--T", "2", "--out", str(out))
        assert proc.returncode == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "s,x1,x2,v1,v2,f"
        assert all(row.split(",")[-1] == "-1" for row in lines[1:])

    def test_trace_zero_horizon(self):
        proc = run_cli("trace", "klein-bottle", "--start", "0.25,0", "--T", "0")
        assert proc.returncode == 0
        assert len(proc.stdout.strip().split("\n")) == 2

    def test_trace_half_length_start(self):
        proc = run_cli("trace", "stationary-s3", "--start", "1,0", "--T", "0.5")
        assert proc.returncode == 0
        first = proc.stdout.strip().split("\n")[1].split(",")
        assert [float(x) for x in first[1:5]] == [1.0, 0.0, 0.0, 0.0]


class TestExitCodes:
    def test_unknown_entry(self):
        assert run_cli("analyze", "moebius").returncode == 2

    def test_off_manifold_start(self):
        proc = run_cli("trace", "stationary-s3", "--start", "2,0,0,0", "--T", "1")
        assert proc.returncode == 2

    def test_rational_theta(self):
        assert run_cli("analyze", "mapping-torus", "--theta", "pi").returncode == 2

    def test_unsupported_approximation(self):
        assert run_cli("approximate", "klein-bottle", "--n", "2").returncode == 4

    def test_search_failure_maps_to_three(self, monkeypatch):
        def boom(*args, **kwargs):
            raise SearchFailureError("forced")

        monkeypatch.setattr(cli, "analyze_entry", boom)
        assert cli.main(["analyze", "klein-bottle"]) == 3
