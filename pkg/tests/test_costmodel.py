from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import toma
from toma import CostParams, DataError, analytic_bound, cost_report, speedup_limit_check
from toma.costmodel import as_ratio


def test_hand_derived_example_d4_n8_r_half():
    rep = cost_report(CostParams(n=8, d=4, r=Fraction(1, 2)))
    assert rep.c_base == 1024
    assert rep.c_attn == 384
    assert rep.c_sub == 256
    assert rep.c_proj == rep.c_merge == rep.c_unmerge == 128
    assert rep.c_lin == 384
    assert rep.c_total == 1024
    assert rep.speedup_ideal == Fraction(8, 3)
    assert rep.speedup_practical == 1
    assert rep.analytic_bound == Fraction(4, 3)


def test_no_merging_means_no_speedup():
    rep = cost_report(CostParams(n=16, d=8, r=1))
    assert rep.c_attn == rep.c_base
    assert rep.speedup_ideal == 1


def test_analytic_bound_values():
    assert analytic_bound(Fraction(1, 2)) == Fraction(4, 3)
    assert analytic_bound(1) == Fraction(2, 3)
    assert analytic_bound(Fraction(1, 4)) == Fraction(2) / Fraction(9, 8)


def test_limit_approximation_quarter_ratio():
    # with d/N -> 0 the practical-speedup approximation tends to 2/1.875
    lim = speedup_limit_check(d=4, r=Fraction(1, 4), n_grid=(4, 400, 40_000, 4_000_000))
    assert abs(float(lim.approximation[-1]) - 2 / 1.875) < 1e-3
    tail = Fraction(2) / (Fraction(2, 16) + 1 + Fraction(3, 4))
    assert tail == Fraction(16, 15)


def test_limit_check_gap_shrinks_with_n():
    lim = speedup_limit_check(d=64, r=Fraction(1, 2), n_grid=(256, 1024, 4096))
    assert all(a > b for a, b in zip(lim.gaps, lim.gaps[1:]))


def test_limit_check_validates_grid():
    with pytest.raises(DataError):
        speedup_limit_check(d=64, r=Fraction(1, 2), n_grid=(1024, 256))
    with pytest.raises(DataError):
        speedup_limit_check(d=64, r=Fraction(1, 2), n_grid=(32,))


def test_tiling_divides_each_overhead_term_exactly():
    plain = cost_report(CostParams(n=64, d=8, r=Fraction(1, 2), tiles=1))
    tiled = cost_report(CostParams(n=64, d=8, r=Fraction(1, 2), tiles=4))
    assert tiled.tiled_c_sub * 4 == plain.c_sub
    assert tiled.tiled_c_merge * 4 == plain.c_merge
    assert tiled.tiled_c_unmerge * 4 == plain.c_unmerge
    assert tiled.tiled_c_total == tiled.c_attn + (plain.c_sub + plain.c_lin) / 4
    assert any("1/k" in note for note in tiled.notes)


def test_counts_stay_exact_at_large_scale():
    rep = cost_report(CostParams(n=100_000, d=10_000, r=Fraction(1, 4)))
    assert isinstance(rep.c_base, Fraction)
    assert rep.c_base == 4 * 10_000**2 * 100_000 + 2 * 10_000 * 100_000**2
    assert rep.c_base.denominator == 1


@settings(max_examples=50, deadline=None)
@given(num=st.integers(1, 63), den=st.integers(64, 256))
def test_ideal_speedup_decreases_in_ratio(num, den):
    lo = Fraction(num, den)
    hi = lo + Fraction(1, den)
    a = cost_report(CostParams(n=den * 4, d=8, r=lo))
    b = cost_report(CostParams(n=den * 4, d=8, r=hi))
    assert a.speedup_ideal > b.speedup_ideal


def test_as_ratio_parses_common_forms():
    assert as_ratio("1/3") == Fraction(1, 3)
    assert as_ratio(0.25) == Fraction(1, 4)
    assert as_ratio("0.5") == Fraction(1, 2)
    assert as_ratio(Fraction(2, 7)) == Fraction(2, 7)
    assert as_ratio(1) == 1
    # float literals convert via their decimal spelling, not binary expansion
    assert as_ratio(0.1) == Fraction(1, 10)
    with pytest.raises(DataError):
        as_ratio("one half")


def test_cost_params_validation():
    with pytest.raises(DataError):
        CostParams(n=8, d=4, r=Fraction(3, 2))
    with pytest.raises(DataError):
        CostParams(n=8, d=4, r=0)
    with pytest.raises(DataError):
        CostParams(n=8, d=4, r=Fraction(1, 100))
    with pytest.raises(DataError):
        CostParams(n=0, d=4, r=Fraction(1, 2))


def test_report_dict_round_trips_to_json_types():
    import json

    rep = cost_report(CostParams(n=4096, d=320, r="1/4", tiles=4))
    plain = rep.as_dict()
    text = json.dumps(plain)
    back = json.loads(text)
    assert back["params"]["r_exact"] == "1/4"
    assert back["c_total"] == 10485760000
    assert "with_adds" not in back
    doubled = rep.as_dict(with_adds=True)
    assert doubled["with_adds"]["c_total"] == 2 * plain["c_total"]
