from __future__ import annotations

import csv
import io
from fractions import Fraction

import pytest

from rnacount.models import StructureClass, gf_series
from rnacount.structures import _strings, parse_dot_bracket
from rnacount.thermo import (KELVIN, R_PAPER, EnergyModel, MeltingError, expected_from_table, expected_pairs,
                             expected_total_pairs_stacking, figure_csv, max_slope, mean_by_derivative,
                             melting_curve, melting_temperature, occupancy_table, stacking_pair_table,
                             unweighted_mean, zero_temperature_limit)

NUS = EnergyModel("nussinov")
STK = EnergyModel("stacking")


def test_energy_model_validation():
    with pytest.raises(ValueError):
        EnergyModel("turner")
    with pytest.raises(ValueError):
        EnergyModel("nussinov", epsilon=0)
    with pytest.raises(ValueError):
        NUS.log_weight(0)


def test_occupancy_examples():
    assert occupancy_table(5, NUS) == {0: 1, 1: 6, 2: 1}
    assert occupancy_table(5, STK) == {0: 7, 1: 1}


def test_occupancy_totals_match_series():
    totals = gf_series(StructureClass(), 100)
    for n in range(1, 101):
        assert sum(occupancy_table(n, NUS).values()) == totals[n]
        assert sum(occupancy_table(n, STK).values()) == totals[n]
        assert occupancy_table(n, NUS).get(0) == 1


def test_stacking_pair_table_matches_brute_force():
    n = 10
    counts, pairs = {}, {}
    for text in _strings(n, 1):
        s = parse_dot_bracket(text)
        m = s.stacked_pairs()
        counts[m] = counts.get(m, 0) + 1
        pairs[m] = pairs.get(m, 0) + s.links
    assert stacking_pair_table(n) == (counts, pairs)


def test_temperature_limits():
    table = occupancy_table(40, NUS)
    hot = expected_from_table(table, NUS, 1e9)
    cold = expected_from_table(table, NUS, 1.0)
    assert abs(hot - float(unweighted_mean(table))) < 1e-6
    assert abs(cold - zero_temperature_limit(table)) < 1e-9


def test_no_overflow_at_low_temperature():
    assert expected_pairs(100, STK, 0.5) == pytest.approx(48)


@pytest.mark.parametrize("n", [5, 20, 60, 100])
def test_derivative_route_matches_exact_means(n):
    assert mean_by_derivative(n, NUS) == unweighted_mean(occupancy_table(n, NUS))
    assert mean_by_derivative(n, STK) == unweighted_mean(occupancy_table(n, STK))


def test_curves_nonincreasing():
    grid = [t + KELVIN for t in range(-250, 500, 3)]
    for model in (NUS, STK):
        table = occupancy_table(100, model)
        vals = [expected_from_table(table, model, T) for T in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    counts, pairs = stacking_pair_table(100)
    vals = [expected_total_pairs_stacking(100, T, tables=(counts, pairs)) for T in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_melting_temperature_ground_reference():
    table = occupancy_table(100, STK)
    tm = melting_temperature(100, STK, table=table)
    assert expected_from_table(table, STK, tm) == pytest.approx(zero_temperature_limit(table) / 2, abs=1e-6)


def test_nussinov_half_maximum_level_not_reached_at_n_100():
    table = occupancy_table(100, NUS)
    assert zero_temperature_limit(table) / 2 == 24.5
    assert float(unweighted_mean(table)) > 24.5
    with pytest.raises(MeltingError, match="does not cross"):
        melting_temperature(100, NUS, table=table)


def test_nussinov_half_maximum_level_reached_with_larger_hairpins():
    # with theta = 3 the high-temperature mean sits below half the maximum
    table = occupancy_table(100, NUS, 3)
    assert float(unweighted_mean(table)) < zero_temperature_limit(table) / 2
    tm = melting_temperature(100, NUS, 3, table=table)
    assert expected_from_table(table, NUS, tm) == pytest.approx(24, abs=1e-6)


def test_midpoint_reference():
    for model in (NUS, STK):
        table = occupancy_table(100, model)
        tm = melting_temperature(100, model, table=table, reference="midpoint")
        level = (zero_temperature_limit(table) + float(unweighted_mean(table))) / 2
        assert expected_from_table(table, model, tm) == pytest.approx(level, abs=1e-6)
    assert melting_temperature(100, STK, reference="midpoint") > melting_temperature(100, NUS, reference="midpoint")
    with pytest.raises(ValueError):
        melting_temperature(100, NUS, reference="other")


def test_degenerate_length():
    with pytest.raises(MeltingError, match="no pairs"):
        melting_temperature(2, NUS)
    with pytest.raises(MeltingError):
        melting_temperature(2, STK)


def test_melting_curve_object():
    curve = melting_curve(30, STK, [0, 50, 100])
    assert len(curve.expected) == 3 and curve.tm is not None
    assert melting_curve(100, NUS, [0]).tm is None


def test_gas_constant_changes_scale_only():
    a = melting_temperature(60, STK)
    b = melting_temperature(60, EnergyModel("stacking", R=R_PAPER))
    assert a / b == pytest.approx(R_PAPER / STK.R, rel=1e-6)


def test_cooperativity():
    grid = list(range(-250, 501))
    slopes = {}
    for model in (NUS, STK):
        table = occupancy_table(100, model)
        slopes[model.kind] = max_slope(grid, [expected_from_table(table, model, t + KELVIN) for t in grid])
    assert slopes["stacking"] > slopes["nussinov"]


def test_figure_csv():
    text = figure_csv(20, [0, 100])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["T_celsius", "expected_pairs_nussinov", "expected_stacked_pairs_stacking",
                       "expected_pairs_stacking"]
    assert len(rows) == 3
    assert float(rows[1][3]) >= float(rows[1][2])


def test_unweighted_mean_is_exact():
    assert unweighted_mean({0: 1, 1: 6, 2: 1}) == Fraction(1)
