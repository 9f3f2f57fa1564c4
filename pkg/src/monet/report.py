"""Pipeline report model and its CSV / Markdown / JSON renderings."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

SCHEMA_VERSION = "1.0"
STATUSES = ("ok", "failed", "skipped")
STAGE_ORDER = ("load", "log_views", "direction", "reset", "distfit", "bglm", "metrics",
               "ml", "stacking", "gate", "provenance")

# markdown column headings for tables mirroring the published layouts
HEADINGS = {
    ("direction", "verdicts"): {"pair": "Variables", "log_fit_ratio": "Log-fit ratio",
                                "elpd_x_to_y": "ELPD-LOO (y = f(x))",
                                "elpd_y_to_x": "ELPD-LOO (x = f(y))", "se_diff": "SE of difference",
                                "verdict": "Verdict"},
    ("reset", "mean_p"): {"model": "Model", "squares": "Squares", "cubes": "Cubes",
                          "both": "Squares and cubes"},
    ("distfit", "fits"): {"variable": "Variable", "family": "Distribution", "param1": "Parameter 1",
                          "param2": "Parameter 2", "bic": "BIC", "rank": "Rank"},
    ("metrics", "performance"): {"statistic": "Statistic", "value": "Value"},
}


def _clean(v):
    """JSON-safe scalar: NaN and infinities become None, numpy scalars become Python ones."""
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, int):
        return int(v)
    if hasattr(v, "item"):
        v = v.item()
        if isinstance(v, (bool, int, str)):
            return v
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class Stage:
    name: str
    status: str = "ok"
    reason: str = ""
    tables: dict = field(default_factory=dict)  # table name -> list of row dicts

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad stage status {self.status!r}")

    def add(self, table: str, rows: list[dict]):
        cols = list(dict.fromkeys(k for r in rows for k in r))
        self.tables[table] = [{k: _clean(r.get(k)) for k in cols} for r in rows]

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "reason": self.reason,
                "tables": self.tables}


@dataclass
class PipelineReport:
    country: str
    stages: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def stage(self, name: str) -> Optional[Stage]:
        for s in self.stages:
            if s.name == name:
                return s
        return None

    def table(self, stage: str, table: str) -> list[dict]:
        return self.stage(stage).tables[table]

    @property
    def failed(self) -> list[str]:
        return [s.name for s in self.stages if s.status == "failed"]

    def as_dict(self) -> dict:
        return {"schema_version": self.schema_version, "country": self.country,
                "stages": [s.as_dict() for s in self.stages],
                "provenance": {k: _clean(v) for k, v in self.provenance.items()}}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineReport":
        stages = [Stage(s["name"], s["status"], s.get("reason", ""), s.get("tables", {}))
                  for s in d["stages"]]
        return cls(d["country"], stages, dict(d.get("provenance", {})), d["schema_version"])

    def __eq__(self, other):
        return isinstance(other, PipelineReport) and self.as_dict() == other.as_dict()


def load_schema() -> dict:
    text = resources.files("monet").joinpath("schema/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: PipelineReport | dict) -> None:
    d = report.as_dict() if isinstance(report, PipelineReport) else report
    jsonschema.validate(d, load_schema())


# ---------------------------------------------------------------------------
# CSV

_NULL = r"\N"


def _column_type(values) -> str:
    kinds = {type(v) for v in values if v is not None}
    if not kinds:
        return "null"
    if kinds == {bool}:
        return "bool"
    if kinds == {int}:
        return "int"
    if kinds <= {int, float}:
        return "float"
    if kinds == {str}:
        return "str"
    return "json"


def _encode(v, kind: str) -> str:
    if v is None:
        return _NULL
    if kind == "json":
        return json.dumps(v)
    if kind == "float":
        return repr(float(v))
    return str(v)


def _decode(text: str, kind: str):
    if text == _NULL:
        return None
    if kind == "json":
        return json.loads(text)
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    if kind == "bool":
        return text == "True"
    return text


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def render_csv(report: PipelineReport, out: Path) -> list[Path]:
    """One CSV per table plus ``stages.csv``, ``columns.csv`` and ``provenance.csv``."""
    out.mkdir(parents=True, exist_ok=True)
    written, stage_rows, col_rows = [], [], []
    for s in report.stages:
        stage_rows.append([s.name, s.status, s.reason, ";".join(s.tables)])
        for tname, rows in s.tables.items():
            cols = list(dict.fromkeys(k for r in rows for k in r))
            kinds = {c: _column_type([r.get(c) for r in rows]) for c in cols}
            col_rows.extend([s.name, tname, c, kinds[c]] for c in cols)
            p = out / f"{s.name}__{tname}.csv"
            _write_csv(p, cols, [[_encode(r.get(c), kinds[c]) for c in cols] for r in rows])
            written.append(p)
    _write_csv(out / "stages.csv", ["stage", "status", "reason", "tables"], stage_rows)
    _write_csv(out / "columns.csv", ["stage", "table", "column", "type"], col_rows)
    prov = report.as_dict()["provenance"]
    _write_csv(out / "provenance.csv", ["key", "value", "type"],
               [[k, _encode(v, _column_type([v])), _column_type([v])] for k, v in prov.items()]
               + [["__country__", report.country, "str"],
                  ["__schema_version__", report.schema_version, "str"]])
    return written + [out / "stages.csv", out / "columns.csv", out / "provenance.csv"]


def load_csv_report(directory) -> PipelineReport:
    d = Path(directory)
    _, col_rows = _read_csv(d / "columns.csv")
    kinds: dict = {}
    for stage, table, col, kind in col_rows:
        kinds.setdefault((stage, table), {})[col] = kind
    _, prov_rows = _read_csv(d / "provenance.csv")
    prov, country, version = {}, None, SCHEMA_VERSION
    for key, value, kind in prov_rows:
        if key == "__country__":
            country = value
        elif key == "__schema_version__":
            version = value
        else:
            prov[key] = _decode(value, kind)
    stages = []
    _, stage_rows = _read_csv(d / "stages.csv")
    for name, status, reason, tables in stage_rows:
        st = Stage(name, status, reason)
        for tname in filter(None, tables.split(";")):
            header, rows = _read_csv(d / f"{name}__{tname}.csv")
            k = kinds.get((name, tname), {})
            st.tables[tname] = [
                {c: _decode(v, k.get(c, "str")) for c, v in zip(header, row)} for row in rows]
        stages.append(st)
    return PipelineReport(country, stages, prov, version)


# ---------------------------------------------------------------------------
# Markdown

def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        if v == 0 or 1e-3 <= abs(v) < 1e6:
            return f"{v:.4f}".rstrip("0").rstrip(".")
        return f"{v:.4g}"
    return str(v).replace("|", "\\|")


def markdown_table(stage: str, table: str, rows: list[dict]) -> str:
    heads = HEADINGS.get((stage, table), {})
    cols = list(heads) if heads else list(dict.fromkeys(k for r in rows for k in r))
    titles = [heads.get(c, c) for c in cols]
    lines = ["| " + " | ".join(titles) + " |", "|" + "|".join(["---"] * len(cols)) + "|"]
    for r in rows:
        lines.append("| " + " | ".join(_fmt(r.get(c)) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def render_markdown(report: PipelineReport, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for s in report.stages:
        if s.status != "ok":
            p = out / f"{s.name}.md"
            p.write_text(f"# {s.name}\n\nStage {s.status}: {s.reason}\n", encoding="utf-8")
            written.append(p)
            continue
        for tname, rows in s.tables.items():
            p = out / f"{s.name}__{tname}.md"
            p.write_text(f"# {report.country}: {s.name} / {tname}\n\n"
                         + markdown_table(s.name, tname, rows), encoding="utf-8")
            written.append(p)
    return written


def render_report(report: PipelineReport, fmt: str, out_dir) -> list[Path]:
    """Write ``report`` as ``csv``, ``markdown`` or ``json`` under ``out_dir``."""
    out = Path(out_dir)
    if fmt == "csv":
        return render_csv(report, out)
    if fmt in ("markdown", "md"):
        return render_markdown(report, out)
    if fmt in ("json", "structured-json"):
        validate_report(report)
        out.mkdir(parents=True, exist_ok=True)
        p = out / f"report_{report.country}.json"
        p.write_text(report.to_json(), encoding="utf-8")
        return [p]
    raise ValueError(f"unknown report format {fmt!r}")


def load_json_report(path) -> PipelineReport:
    return PipelineReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
