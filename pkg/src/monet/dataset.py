"""Quarterly country data: parsing, validation, alignment and log views."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, MissingQuarter, NonPositiveValue, ParseError, UnknownCountry

logger = logging.getLogger(__name__)

COUNTRIES = ("US", "CA", "UK", "BR")
VARIABLES = ("M1", "NGDP", "GOLD")
CSV_HEADER = ("date", "country", "m1", "ngdp", "gold_usd")
_COLUMN_FOR = {"M1": "m1", "NGDP": "ngdp", "GOLD": "gold_usd"}

# coverage used in the reference study
DEFAULT_RANGES = {
    "US": ("1959Q1", "2022Q4"),
    "CA": ("1961Q1", "2022Q4"),
    "UK": ("1986Q1", "2022Q4"),
    "BR": ("1996Q1", "2022Q4"),
}


@dataclass(frozen=True, order=True)
class QuarterStamp:
    year: int
    quarter: int

    def __post_init__(self):
        if self.quarter not in (1, 2, 3, 4):
            raise ValueError(f"quarter must be 1..4, got {self.quarter}")

    @classmethod
    def parse(cls, text: str) -> "QuarterStamp":
        """Accept ``1970Q3`` or an ISO date (month is mapped to its quarter)."""
        text = text.strip()
        if "Q" in text.upper():
            y, q = text.upper().split("Q")
            return cls(int(y), int(q))
        d = _dt.date.fromisoformat(text)
        return cls(d.year, (d.month - 1) // 3 + 1)

    def next(self) -> "QuarterStamp":
        if self.quarter == 4:
            return QuarterStamp(self.year + 1, 1)
        return QuarterStamp(self.year, self.quarter + 1)

    def ordinal(self) -> int:
        return self.year * 4 + self.quarter - 1

    def to_date(self) -> _dt.date:
        return _dt.date(self.year, 3 * (self.quarter - 1) + 1, 1)

    def __str__(self):
        return f"{self.year}Q{self.quarter}"


def quarter_range(start: QuarterStamp, end: QuarterStamp) -> list[QuarterStamp]:
    out = []
    q = start
    while q <= end:
        out.append(q)
        q = q.next()
    return out


def _check_country(code: str) -> str:
    if code not in COUNTRIES:
        raise UnknownCountry(f"unknown country code {code!r}; expected one of {COUNTRIES}")
    return code


@dataclass(frozen=True)
class CountrySeries:
    country: str
    variable: str
    stamps: tuple[QuarterStamp, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_country(self.country)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(self.stamps):
            raise ValueError("values must be one-dimensional and match the stamps")
        ords = [s.ordinal() for s in self.stamps]
        if any(b - a != 1 for a, b in zip(ords, ords[1:])):
            raise MissingQuarter(f"{self.country}/{self.variable}: stamps are not consecutive quarters")
        bad = np.flatnonzero(~(values > 0))
        if bad.size:
            raise NonPositiveValue(
                f"{self.country}/{self.variable}: nonpositive value at {self.stamps[bad[0]]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.stamps)


@dataclass(frozen=True)
class CountryDataset:
    """Three aligned quarterly series for one country.

    ``is_log`` marks a dataset whose values have already been log-transformed
    (see :func:`log_view`).
    """

    m1: CountrySeries
    ngdp: CountrySeries
    gold: CountrySeries
    is_log: bool = False

    def __post_init__(self):
        s = self.m1.stamps
        if not (self.ngdp.stamps == s and self.gold.stamps == s):
            raise ValueError("series stamps are not aligned")
        if len({self.m1.country, self.ngdp.country, self.gold.country}) != 1:
            raise ValueError("series belong to different countries")

    @property
    def country(self) -> str:
        return self.m1.country

    @property
    def stamps(self) -> tuple[QuarterStamp, ...]:
        return self.m1.stamps

    def __len__(self):
        return len(self.m1)

    def series(self, variable: str) -> CountrySeries:
        return {"M1": self.m1, "NGDP": self.ngdp, "GOLD": self.gold}[variable.upper()]

    @cached_property
    def log_m1(self) -> np.ndarray:
        return np.log(self.m1.values)

    @cached_property
    def log_ngdp(self) -> np.ndarray:
        return np.log(self.ngdp.values)

    @cached_property
    def log_gold(self) -> np.ndarray:
        return np.log(self.gold.values)

    def column(self, name: str) -> np.ndarray:
        """Named column: ``m1``, ``ngdp``, ``gold`` or their ``log_`` variants.

        ``prices`` is accepted as an alias of ``ngdp``.
        """
        key = name.lower().replace("prices", "ngdp")
        raw = {"m1": self.m1.values, "ngdp": self.ngdp.values, "gold": self.gold.values}
        if key in raw:
            return raw[key]
        if key.startswith("log_") and key[4:] in raw:
            return getattr(self, key)
        raise KeyError(name)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.country.encode())
        h.update(str(self.stamps[0]).encode() + str(self.stamps[-1]).encode())
        for s in (self.m1, self.ngdp, self.gold):
            h.update(np.ascontiguousarray(s.values, dtype="<f8").tobytes())
        return h.hexdigest()


def log_view(dataset: CountryDataset) -> CountryDataset:
    """Elementwise natural log of every series; stamps are preserved."""
    out = []
    for s in (dataset.m1, dataset.ngdp, dataset.gold):
        if np.any(s.values <= 0):
            raise DomainError(f"log of nonpositive value in {s.country}/{s.variable}")
        logged = np.log(s.values)
        # CountrySeries requires positive values; a log view may go negative
        series = object.__new__(CountrySeries)
        for k, v in (("country", s.country), ("variable", s.variable),
                     ("stamps", s.stamps), ("values", logged)):
            object.__setattr__(series, k, v)
        logged.setflags(write=False)
        out.append(series)
    return CountryDataset(*out, is_log=True)


def _parse_value(text: str, row: int, column: str) -> float | None:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN"):
        return None
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {text!r} as a number", row=row) from None
    if not math.isfinite(v):
        raise ParseError(f"column {column!r}: non-finite value {text!r}", row=row)
    return v


def read_rows(path: str | Path) -> list[dict]:
    """Parse the quarterly CSV into dict rows with typed values."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=1) from None
        header = [h.strip().lower() for h in header]
        if tuple(header) != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(rec)}", row=lineno)
            try:
                stamp = QuarterStamp.parse(rec[0])
            except ValueError as exc:
                raise ParseError(f"bad date {rec[0]!r}: {exc}", row=lineno) from None
            country = rec[1].strip()
            if not (len(country) == 2 and country.isupper()):
                raise ParseError(f"country must be an uppercase 2-letter code, got {country!r}", row=lineno)
            row = {"row": lineno, "stamp": stamp, "country": country}
            for col in CSV_HEADER[2:]:
                v = _parse_value(rec[CSV_HEADER.index(col)], lineno, col)
                if v is not None and v <= 0:
                    raise NonPositiveValue(f"row {lineno}: column {col!r} is not positive ({v})")
                row[col] = v
            rows.append(row)
    return rows


def _coverage(points: dict[QuarterStamp, float]) -> tuple[QuarterStamp, QuarterStamp] | None:
    if not points:
        return None
    return min(points), max(points)


def load_country_dataset(path: str | Path, country: str,
                         range: tuple[QuarterStamp | str, QuarterStamp | str] | None = None,
                         ) -> CountryDataset:
    """Load one country's aligned (M1, NGDP, gold) series from the CSV at ``path``.

    When ``range`` is omitted the intersection of the three series' coverage is
    used. Any quarter missing inside the range raises :class:`MissingQuarter`.
    """
    _check_country(country)
    rows = [r for r in read_rows(path) if r["country"] == country]
    if not rows:
        raise UnknownCountry(f"no rows for country {country!r} in {path}")

    points: dict[str, dict[QuarterStamp, float]] = {v: {} for v in VARIABLES}
    for r in rows:
        for var in VARIABLES:
            v = r[_COLUMN_FOR[var]]
            if v is None:
                continue
            if r["stamp"] in points[var]:
                raise ParseError(f"duplicate {var} value for {r['stamp']}", row=r["row"])
            points[var][r["stamp"]] = v

    covers = {var: _coverage(p) for var, p in points.items()}
    for var, cov in covers.items():
        if cov is None:
            raise MissingQuarter(f"{country}: no {var} values", missing=())

    if range is None:
        start = max(c[0] for c in covers.values())
        end = min(c[1] for c in covers.values())
        if len({c for c in covers.values()}) > 1:
            logger.warning("%s: series coverage differs; using intersection %s-%s", country, start, end)
    else:
        start, end = (q if isinstance(q, QuarterStamp) else QuarterStamp.parse(q) for q in range)
    if end < start:
        raise MissingQuarter(f"{country}: empty range {start}-{end}")

    stamps = quarter_range(start, end)
    series = {}
    for var in VARIABLES:
        missing = [q for q in stamps if q not in points[var]]
        if missing:
            shown = ", ".join(str(q) for q in missing[:5])
            raise MissingQuarter(f"{country}/{var}: missing {len(missing)} quarter(s): {shown}",
                                 missing=missing)
        vals = np.array([points[var][q] for q in stamps])
        series[var] = CountrySeries(country, var, tuple(stamps), vals)
    return CountryDataset(series["M1"], series["NGDP"], series["GOLD"])


def write_dataset_csv(datasets: Iterable[CountryDataset], path: str | Path) -> None:
    """Render datasets in the input CSV schema; floats use ``repr`` so reloads are exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ds in datasets:
            if ds.is_log:
                raise ValueError("refusing to write a log-transformed dataset")
            for i, q in enumerate(ds.stamps):
                w.writerow([q.to_date().isoformat(), ds.country,
                            repr(float(ds.m1.values[i])), repr(float(ds.ngdp.values[i])),
                            repr(float(ds.gold.values[i]))])


def simulate_country_dataset(country: str = "US", start: str = "1959Q1", end: str = "2022Q4",
                             seed: int = 0) -> CountryDataset:
    """Synthetic quarterly data following the quantity-of-prices relation.

    Nominal GDP grows geometrically with noise, gold follows a random walk in
    logs, and M1 tracks ``ngdp / gold`` with a spline-like gold effect. Intended
    for demos and tests when the published dataset is not available.
    """
    _check_country(country)
    rng = np.random.default_rng(seed)
    stamps = quarter_range(QuarterStamp.parse(start), QuarterStamp.parse(end))
    n = len(stamps)
    t = np.arange(n)
    log_ngdp = 6.0 + 0.016 * t + np.cumsum(rng.normal(0, 0.008, n))
    log_gold = 3.6 + np.cumsum(rng.normal(0.01, 0.06, n))
    gold_c = (log_gold - log_gold.mean()) / log_gold.std()
    log_m1 = (0.9 + 0.8 * log_ngdp - 0.25 * log_gold + 0.12 * np.sin(1.3 * gold_c)
              + rng.normal(0, 0.03, n))
    mk = lambda var, v: CountrySeries(country, var, tuple(stamps), np.exp(v))
    return CountryDataset(mk("M1", log_m1), mk("NGDP", log_ngdp), mk("GOLD", log_gold))
