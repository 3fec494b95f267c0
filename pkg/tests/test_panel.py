import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import didpanel as dp
from didpanel.errors import (
    DuplicateCell,
    MissingColumn,
    NonFiniteValue,
    NonPositiveWeight,
    WrongShape,
)

from conftest import make_panel

FIG1_CSV = """group,time,treatment,outcome
early,1,0,0.0
early,2,1,1.0
early,3,1,4.0
late,1,0,0.0
late,2,0,0.0
late,3,1,1.0
"""


def test_load_csv_fig1_round_trip_structure(tmp_path):
    path = tmp_path / "fig1.csv"
    path.write_text(FIG1_CSV)
    data = dp.load_csv(path)
    assert data.n_groups == 2
    assert data.n_periods == 3
    assert data.groups == ("early", "late")
    assert data.periods == (1, 2, 3)
    assert data.weight_mode == "uniform"
    assert np.all(data.weight == 1.0)
    # rows sorted by (group, time)
    assert data.row_keys()[:3] == (("early", 1), ("early", 2), ("early", 3))


def test_load_csv_duplicate_cell(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(FIG1_CSV + "late,3,1,9.9\n")
    with pytest.raises(DuplicateCell) as err:
        dp.load_csv(path)
    assert "late" in str(err.value)


def test_load_csv_missing_required_column(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("group,time,outcome\na,1,0\na,2,1\nb,1,0\nb,2,1\n")
    with pytest.raises(MissingColumn) as err:
        dp.load_csv(path)
    assert "treatment" in str(err.value)


def test_load_csv_schema_mapping(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("state,year,udl,divorce\na,1,0,0\na,2,1,1\nb,1,0,0\nb,2,0,0\n")
    data = dp.load_csv(path, schema={"group": "state", "time": "year",
                                     "treatment": "udl", "outcome": "divorce"})
    assert data.n_groups == 2


def test_load_csv_bad_values(tmp_path):
    bad_time = tmp_path / "t.csv"
    bad_time.write_text("group,time,treatment,outcome\na,1.5,0,0\na,2,1,1\nb,1,0,0\nb,2,0,0\n")
    with pytest.raises(NonFiniteValue) as err:
        dp.load_csv(bad_time)
    assert ":2:" in str(err.value)

    bad_weight = tmp_path / "w.csv"
    bad_weight.write_text(
        "group,time,treatment,outcome,weight\na,1,0,0,1\na,2,1,1,0\nb,1,0,0,1\nb,2,0,0,1\n"
    )
    with pytest.raises(NonPositiveWeight) as err:
        dp.load_csv(bad_weight)
    assert "weight" in str(err.value)

    bad_value = tmp_path / "v.csv"
    bad_value.write_text("group,time,treatment,outcome\na,1,0,\na,2,1,1\nb,1,0,0\nb,2,0,0\n")
    with pytest.raises(NonFiniteValue):
        dp.load_csv(bad_value)


def test_load_csv_ignores_extra_columns(tmp_path):
    path = tmp_path / "extra.csv"
    path.write_text(
        "note,group,time,treatment,outcome,junk\n"
        "x,a,1,0,0.0,9\nx,a,2,1,1.0,9\nx,b,1,0,0.0,9\nx,b,2,0,0.5,9\n"
    )
    data = dp.load_csv(path)
    assert data.n_groups == 2 and data.n_rows == 4


def test_missing_weight_column_defaults_to_uniform(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text(FIG1_CSV)
    data = dp.load_csv(path)
    assert data.weight_mode == "uniform"
    assert np.all(data.weight == 1.0)


def test_write_then_load_is_identical(tmp_path, fig1_never):
    data, _ = fig1_never
    path = tmp_path / "out.csv"
    data.write_csv(path)
    again = dp.load_csv(path)
    assert again.groups == data.groups
    assert again.periods == data.periods
    assert np.array_equal(again.treatment, data.treatment)
    assert np.array_equal(again.outcome, data.outcome)
    assert np.array_equal(again.weight, data.weight)
    assert again.weight_mode == data.weight_mode
    # a second round trip is bit-for-bit stable
    path2 = tmp_path / "out2.csv"
    again.write_csv(path2)
    assert path.read_text() == path2.read_text()


def test_weighted_write_round_trip(tmp_path):
    data = make_panel(
        [[0, 1], [0, 0]], [[0.1, 2.3], [0.7, -1.9]],
        weights=[[1.25, 0.5], [3.0, 0.125]],
    )
    path = tmp_path / "w.csv"
    data.write_csv(path)
    again = dp.load_csv(path)
    assert np.array_equal(again.weight, data.weight)
    assert again.weight_mode == "supplied"


def test_validation_needs_two_groups_and_periods():
    with pytest.raises(WrongShape):
        dp.PanelDataset.from_arrays(group=["a", "a"], time=[1, 2],
                                    treatment=[0, 1], outcome=[0, 1])
    with pytest.raises(WrongShape):
        dp.PanelDataset.from_arrays(group=["a", "b"], time=[1, 1],
                                    treatment=[0, 1], outcome=[0, 1])


def test_non_finite_rejected():
    with pytest.raises(NonFiniteValue):
        dp.PanelDataset.from_arrays(group=["a", "a", "b", "b"], time=[1, 2, 1, 2],
                                    treatment=[0, np.inf, 0, 0], outcome=[0, 1, 0, 1])


# --- design derivation ----------------------------------------------------

def test_derive_design_fig1(fig1):
    data, _ = fig1
    design = dp.derive_design(data)
    assert design.first_switch == {"early": 2, "late": 3}
    assert design.is_binary and design.is_staggered
    assert design.cohorts == {2: ("early",), 3: ("late",)}
    assert design.last_untreated_period == 2
    assert design.baseline_treatment == {"early": 0.0, "late": 0.0}


def test_derive_design_all_zero():
    data = make_panel([[0, 0, 0], [0, 0, 0]], np.zeros((2, 3)))
    design = dp.derive_design(data)
    assert all(f == dp.NEVER for f in design.first_switch.values())
    assert design.cohorts == {}
    assert design.last_untreated_period == 3


def test_derive_design_non_staggered_path():
    data = make_panel([[0, 2, 1], [0, 0, 0]], np.zeros((2, 3)))
    design = dp.derive_design(data)
    assert design.first_switch["g1"] == 2
    assert not design.is_staggered
    assert not design.is_binary


def test_derive_design_staggered_dose_increase():
    # one increase, non-binary: staggered by the generalized definition
    data = make_panel([[0, 2, 2], [0, 0, 0]], np.zeros((2, 3)))
    design = dp.derive_design(data)
    assert design.is_staggered and not design.is_binary


def test_derive_design_row_order_invariant(fig1_never):
    data, _ = fig1_never
    rng = np.random.default_rng(4)
    perm = rng.permutation(data.n_rows)
    shuffled = dp.PanelDataset.from_arrays(
        group=[data.groups[data.group_code[i]] for i in perm],
        time=data.time_values[perm],
        treatment=data.treatment[perm],
        outcome=data.outcome[perm],
    )
    assert dp.derive_design(shuffled).first_switch == dp.derive_design(data).first_switch


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([0.0, 1.0, 2.0]), min_size=4, max_size=4))
def test_derive_design_idempotent_and_consistent(doses):
    data = make_panel([doses, [0.0, 0.0, 0.0, 0.0]], np.zeros((2, 4)))
    d1 = dp.derive_design(data)
    d2 = dp.derive_design(data)
    assert d1.first_switch == d2.first_switch
    changes = [t for t, (a, b) in enumerate(zip(doses[:-1], doses[1:]), start=2) if a != b]
    expected = min([t for t in range(2, 5) if doses[t - 1] != doses[0]], default=dp.NEVER)
    assert d1.first_switch["g1"] == expected
    assert d1.is_staggered == (len(changes) <= 1 and all(b >= a for a, b in zip(doses[:-1], doses[1:])))


# --- balance --------------------------------------------------------------

def test_balance_full_grid(fig1):
    data, _ = fig1
    rep = dp.balance_report(data)
    assert rep.balanced and rep.missing == ()


def test_balance_missing_cell():
    data = dp.PanelDataset.from_arrays(
        group=["a", "a", "b", "b", "c"], time=[1, 2, 1, 2, 1],
        treatment=[0, 1, 0, 0, 0], outcome=[0, 1, 0, 0, 0],
    )
    rep = dp.balance_report(data)
    assert not rep.balanced
    assert rep.missing == (("c", 2),)


def test_balance_single_group_subset(fig1):
    data, _ = fig1
    solo = data.subset(groups=["early"])
    rep = dp.balance_report(solo)
    assert rep.balanced and rep.n_groups == 1


def test_rows_view_and_cells(fig1):
    data, _ = fig1
    rows = data.rows
    assert rows[0] == dp.Cell(group="early", time=1, treatment=0.0, outcome=0.0, weight=1.0)
    assert len(rows) == 6


def test_subset_periods(fig1):
    data, _ = fig1
    sub = data.subset(periods=[1, 2])
    assert sub.periods == (1, 2)
    assert sub.n_rows == 4
