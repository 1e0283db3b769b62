import math

import pytest
from hypothesis import given, strategies as st

from branchstat.errors import InvalidInputError, ParseError
from branchstat.grid_model import BaseQuantities, BranchKind, BranchRecord, VoltageClass, classify_voltage
from branchstat.ingest import (
    CSV_COLUMNS,
    CaseFormat,
    fill_line_lengths,
    great_circle_km,
    parse_branch_csv,
    parse_matpower_subset,
    read_case,
    rewrite_matpower,
    write_branch_csv,
)
from branchstat.toy import toy_case_path, toy_records

from conftest import line, xfmr

MATPOWER = """function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
	1	3	0	0	0	0	1	1	0	{kv1}	1	1.1	0.9;
	2	1	50	10	0	0	1	1	0	{kv2}	1	1.1	0.9;
];
%% branch data
mpc.branch = [
	1	{to}	0.01	0.05	0	300	0	0	{ratio}	0	1	-360	360;
];
"""


def case(kv1=230, kv2=230, ratio=0, to=2):
    return MATPOWER.format(kv1=kv1, kv2=kv2, ratio=ratio, to=to)


# --- great circle ---------------------------------------------------------------

def test_great_circle_examples():
    assert great_circle_km((40, -75), (40, -75)) == 0.0
    assert great_circle_km((0, 0), (1, 0)) == pytest.approx(111.195, abs=1e-3)
    assert great_circle_km((0, 0), (0, 180)) == pytest.approx(20015.087, abs=1e-2)


coords = st.tuples(st.floats(-90, 90), st.floats(-180, 180))


@given(coords, coords)
def test_great_circle_symmetric_and_bounded(a, b):
    d = great_circle_km(a, b)
    assert d == pytest.approx(great_circle_km(b, a), abs=1e-9)
    assert 0.0 <= d <= math.pi * 6371.0 + 1e-9


def test_great_circle_rejects_bad_latitude():
    with pytest.raises(InvalidInputError):
        great_circle_km((95, 0), (0, 0))


def test_fill_line_lengths():
    explicit = line(id="a", length=12.5, geo=((0, 0), (1, 0)))
    missing = line(id="b", length=None, geo=((0, 0), (1, 0)))
    t = xfmr()
    out = fill_line_lengths([explicit, missing, t])
    assert out[0].length_km == 12.5 and not out[0].length_estimated
    assert out[1].length_km == pytest.approx(111.195, abs=1e-3) and out[1].length_estimated
    assert out[2] == t


# --- MATPOWER -------------------------------------------------------------------

def test_matpower_line():
    records, warnings = parse_matpower_subset(case())
    assert warnings == []
    (rec,) = records
    assert rec.kind is BranchKind.LINE
    assert rec.x_pu == 0.05 and rec.r_pu == 0.01 and rec.rating_mva == 300
    assert classify_voltage(rec.nominal_kv) == VoltageClass(230)
    assert rec.system_base == BaseQuantities(230, 100)


def test_matpower_transformer_from_ratio():
    (rec,), _ = parse_matpower_subset(case(kv2=115, ratio=1.05))
    assert rec.kind is BranchKind.TRANSFORMER
    assert (rec.kv_high, rec.kv_low) == (230, 115)


def test_matpower_transformer_from_differing_kv():
    (rec,), _ = parse_matpower_subset(case(kv2=115, ratio=0))
    assert rec.kind is BranchKind.TRANSFORMER


def test_matpower_unknown_bus_names_it():
    with pytest.raises(ParseError, match="bus 99") as info:
        parse_matpower_subset(case(to=99))
    assert info.value.line == 11


def test_matpower_s_base_override_and_status():
    text = case().replace("\t1\t-360", "\t0\t-360")
    records, warnings = parse_matpower_subset(text)
    assert records == [] and "out of service" in warnings[0]
    (rec,), _ = parse_matpower_subset(case(), s_base_override=50)
    assert rec.system_base.s_base == 50


def test_matpower_missing_tables():
    with pytest.raises(ParseError):
        parse_matpower_subset("mpc.baseMVA = 100;\n")


def test_matpower_rewrite_touches_only_branch_numbers():
    text = case()
    records, _ = parse_matpower_subset(text)
    changed = [BranchRecord(**{**records[0].__dict__, "x_pu": 0.07, "r_pu": 0.02, "rating_mva": 150.0})]
    out = rewrite_matpower(text, changed)
    again, _ = parse_matpower_subset(out)
    assert (again[0].x_pu, again[0].r_pu, again[0].rating_mva) == (0.07, 0.02, 150.0)
    assert out.splitlines()[:10] == text.splitlines()[:10]


# --- CSV ------------------------------------------------------------------------

HEADER = ",".join(CSV_COLUMNS) + "\n"


def test_csv_header_only():
    assert parse_branch_csv(HEADER) == ([], [])


def test_csv_transformer_row():
    text = "id,kind,kv_high,kv_low,x_pu,r_pu,s_base_mva,rating_mva\nT,xfmr,230,115,0.08,0.002,100,200\n"
    (rec,), warnings = parse_branch_csv(text)
    assert warnings == []
    assert rec.kind is BranchKind.TRANSFORMER and rec.x_pu == 0.08 and rec.rating_mva == 200


def test_csv_line_with_geography_only():
    text = (
        "id,kind,kv_high,kv_low,x_pu,r_pu,s_base_mva,from_lat,from_lon,to_lat,to_lon\n"
        "L,line,230,230,0.01,0.001,100,0,0,1,0\n"
    )
    (rec,), _ = parse_branch_csv(text)
    assert rec.endpoints_geo == ((0, 0), (1, 0)) and rec.length_km is None


def test_csv_bad_rows_become_warnings():
    text = HEADER + "X,cable,230,230,0.01,0.001,100,,,,,,,\nY,line,230,230,abc,0.001,100,,,,,,,\n"
    records, warnings = parse_branch_csv(text)
    assert records == [] and len(warnings) == 2
    assert warnings[0].startswith("line 2:")


def test_csv_missing_column_is_fatal():
    with pytest.raises(ParseError, match="x_pu"):
        parse_branch_csv("id,kind,kv_high,kv_low,r_pu,s_base_mva\n")


finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def records(draw):
    out = []
    for i in range(draw(st.integers(0, 6))):
        kv = draw(st.sampled_from([69.0, 115.0, 230.0, 345.0, 500.0]))
        x = draw(st.floats(0.0, 2.0, **finite))
        r = draw(st.floats(0.0, 1.0, **finite))
        rating = draw(st.none() | st.floats(1.0, 5000.0, **finite))
        if draw(st.booleans()):
            out.append(xfmr(id=f"T{i}", kv_high=kv, kv_low=kv / 2, x=x, r=r, rating=rating))
        else:
            geo = draw(st.none() | st.tuples(st.tuples(st.floats(-90, 90, **finite), st.floats(-180, 180, **finite)),
                                              st.tuples(st.floats(-90, 90, **finite), st.floats(-180, 180, **finite))))
            length = draw(st.none() | st.floats(0.1, 500.0, **finite))
            out.append(line(id=f"L{i}", kv=kv, x=x, r=r, rating=rating, length=length, geo=geo))
    return out


@given(records())
def test_csv_round_trip(recs):
    parsed, warnings = parse_branch_csv(write_branch_csv(recs))
    assert warnings == []
    assert parsed == recs


def test_estimated_lengths_are_not_written():
    (filled,) = fill_line_lengths([line(length=None, geo=((0, 0), (1, 0)))])
    (parsed,), _ = parse_branch_csv(write_branch_csv([filled]))
    assert parsed.length_km is None


def test_shipped_toy_case_matches_generator():
    path = toy_case_path()
    assert path.read_text(encoding="utf-8") == write_branch_csv(toy_records())
    c = read_case(path)
    assert c.format is CaseFormat.CSV and len(c.records) == 720 and c.warnings == []


def test_read_case_missing_file(tmp_path):
    with pytest.raises(ParseError) as info:
        read_case(tmp_path / "nope.m")
    assert "nope.m" in str(info.value)
