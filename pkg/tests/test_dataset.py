from __future__ import annotations

import math

import numpy as np
import pytest

from monet.dataset import (QuarterStamp, load_country_dataset, log_view,
                           simulate_country_dataset, write_dataset_csv)
from monet.errors import MissingQuarter, NonPositiveValue, ParseError, UnknownCountry


def _write(path, rows):
    path.write_text("date,country,m1,ngdp,gold_usd\n" + "".join(rows), encoding="utf-8")


def _rows(country, start, end, skip=()):
    q = QuarterStamp.parse(start)
    out = []
    i = 0
    while q <= QuarterStamp.parse(end):
        if str(q) not in skip:
            out.append(f"{q.to_date().isoformat()},{country},{10 + i},{100 + i},{35 + 0.5 * i}\n")
        q = q.next()
        i += 1
    return out


def test_quarter_counts(tmp_path):
    p = tmp_path / "d.csv"
    _write(p, _rows("US", "1959Q1", "2022Q4") + _rows("BR", "1996Q1", "2022Q4"))
    us = load_country_dataset(p, "US", ("1959Q1", "2022Q4"))
    br = load_country_dataset(p, "BR", ("1996Q1", "2022Q4"))
    assert len(us) == 256 and len(br) == 108
    for ds in (us, br):
        assert ds.m1.stamps == ds.ngdp.stamps == ds.gold.stamps


def test_missing_quarter_named(tmp_path):
    p = tmp_path / "d.csv"
    _write(p, _rows("US", "1960Q1", "1975Q4", skip={"1970Q3"}))
    with pytest.raises(MissingQuarter, match="1970Q3"):
        load_country_dataset(p, "US", ("1960Q1", "1975Q4"))


def test_unknown_and_bad_values(tmp_path):
    p = tmp_path / "d.csv"
    _write(p, _rows("US", "2000Q1", "2002Q4"))
    with pytest.raises(UnknownCountry):
        load_country_dataset(p, "XX")
    _write(p, ["2000-01-01,US,1,-2,3\n", "2000-04-01,US,1,2,3\n"])
    with pytest.raises(NonPositiveValue):
        load_country_dataset(p, "US")
    _write(p, ["2000-01-01,US,1,abc,3\n"])
    with pytest.raises(ParseError, match="row"):
        load_country_dataset(p, "US")


def test_month_maps_to_quarter():
    assert QuarterStamp.parse("1970-08-01") == QuarterStamp(1970, 3)
    assert QuarterStamp.parse("1970Q3").to_date().isoformat() == "1970-07-01"


def test_round_trip_bitwise(tmp_path):
    ds = simulate_country_dataset("CA", "1961Q1", "2022Q4", seed=3)
    p = tmp_path / "ca.csv"
    write_dataset_csv([ds], p)
    back = load_country_dataset(p, "CA")
    for v in ("M1", "NGDP", "GOLD"):
        assert np.array_equal(ds.series(v).values, back.series(v).values)
    assert ds.content_hash() == back.content_hash()


def test_log_view(tmp_path):
    p = tmp_path / "d.csv"
    _write(p, ["2000-01-01,UK,1,2,1\n", "2000-04-01,UK,2.718281828459045,4,1\n",
               "2000-07-01,UK,3,8,1\n"])
    lv = log_view(load_country_dataset(p, "UK"))
    assert lv.is_log
    assert lv.m1.values[0] == 0 and lv.m1.values[1] == pytest.approx(1.0)
    assert np.allclose(np.diff(lv.ngdp.values), math.log(2))
    assert lv.stamps[0] == QuarterStamp(2000, 1)


def test_intersection_of_coverage(tmp_path, caplog):
    p = tmp_path / "d.csv"
    rows = _rows("US", "2000Q1", "2003Q4")
    rows[0] = rows[0].replace(",10,", ",,")  # M1 starts one quarter late
    _write(p, rows)
    ds = load_country_dataset(p, "US")
    assert str(ds.stamps[0]) == "2000Q2" and len(ds) == 15
