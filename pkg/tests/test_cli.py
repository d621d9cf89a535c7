from __future__ import annotations

import argparse
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from rnacount.cli import main, rational


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_rational_parsing():
    assert rational("3/8") == Fraction(3, 8)
    assert rational("0.375") == Fraction(3, 8)
    with pytest.raises(argparse.ArgumentTypeError):
        rational("x")


def test_count_example():
    code, out = run("count", "--family", "general", "--theta", "1", "--p", "1", "--n-max", "7")
    assert code == 0
    assert out.splitlines() == ["n,count", "1,1", "2,1", "3,2", "4,4", "5,8", "6,17", "7,37"]


def test_count_methods_agree():
    outs = {m: run("count", "--family", "saturated", "--n-max", "10", "--method", m)[1]
            for m in ("series", "grammar", "oracle")}
    assert len(set(outs.values())) == 1


def test_count_json_big_integers_are_strings():
    code, out = run("count", "--n", "200", "--output", "json")
    data = json.loads(out)
    value = data["counts"]["200"]
    assert isinstance(value, str) and int(value) > 2**64


def test_count_rational_stickiness():
    code, out = run("count", "--n", "5", "--p", "1/2")
    assert code == 0
    assert out.splitlines()[1] == "5,17/4"


def test_series_dump():
    code, out = run("series", "--order", "5", "--dangles")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,links,dangles,coefficient"
    assert "5,1,2,1" in lines


def test_asym_saturated():
    code, out = run("asym", "--family", "saturated", "--theta", "1", "--p", "1")
    assert code == 0
    data = json.loads(out)
    assert abs(data["gamma"] - 2.35467) < 1e-4
    assert abs(data["d"] - 1.07427) < 1e-3
    assert data["digits"]["gamma"].startswith("2.354673")


def test_asym_grammar():
    code, out = run("asym", "--grammar", "g5", "--eliminate")
    assert code == 0
    assert abs(json.loads(out)["gamma"] - 3.079596) < 1e-5


def test_limitlaw():
    code, out = run("limitlaw", "--family", "saturated")
    assert code == 0
    assert abs(json.loads(out)["mu"] - 0.337361) < 1e-5


def test_melt_csv_and_json():
    code, out = run("melt", "--n", "30", "--t-min", "0", "--t-max", "100", "--t-step", "50")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("T_celsius,")
    assert len(lines) == 4
    code, out = run("melt", "--n", "100", "--t-min", "0", "--t-max", "10", "--t-step", "10",
                    "--reference", "midpoint", "--output", "json", "--paper-R")
    data = json.loads(out)
    assert data["R"] == pytest.approx(0.001959)
    assert data["Tm_celsius"]["stacking"] > data["Tm_celsius"]["nussinov"]


def test_check_example():
    code, out = run("check", "--n-max", "12")
    assert code == 0
    assert out.splitlines()[-1] == "all classes consistent"


@pytest.mark.parametrize("argv", [
    ["count", "--n", "3", "--n-max", "4"],
    ["count", "--p", "abc"],
    ["count", "--p", "0"],
    ["count", "--family", "saturated", "--tau", "1"],
    ["count", "--q", "1"],
    ["asym", "--grammar", "G4", "--family", "general"],
    ["check", "--n-max", "40"],
    ["melt", "--t-min", "-300"],
    ["nonsense"],
    [],
])
def test_validation_errors_exit_1(argv):
    assert run(*argv)[0] == 1


def test_numeric_failure_exit_2(monkeypatch):
    from rnacount import asymptotics

    def boom(*a, **k):
        raise asymptotics.NewtonDivergence("diverged")

    monkeypatch.setattr(asymptotics, "class_asymptotics", boom)
    assert run("asym")[0] == 2


def test_precision_environment_override(monkeypatch):
    monkeypatch.setenv("RNACOUNT_DPS", "50")
    code, out = run("asym")
    assert len(json.loads(out)["digits"]["gamma"]) > 40
    monkeypatch.setenv("RNACOUNT_DPS", "many")
    assert run("asym")[0] == 1


def test_deterministic_output():
    assert run("series", "--order", "8", "--family", "gsaturated") == run("series", "--order", "8", "--family",
                                                                         "gsaturated")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rnacount", "count", "--n-max", "3"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines() == ["n,count", "1,1", "2,1", "3,2"]
