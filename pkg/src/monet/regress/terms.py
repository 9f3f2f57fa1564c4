"""Regressor terms and model specifications."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import DomainError, SupportError
from .splines import SplineBasis, natural_spline_basis

FAMILIES = ("gaussian", "gamma")
LINKS = ("identity", "log")
TERM_KINDS = ("raw", "log", "spline", "weibull")


def weibull_transform(x, shape: float, scale: float) -> np.ndarray:
    """Probability integral transform through a Weibull(shape, scale) CDF."""
    x = np.asarray(x, dtype=float)
    if shape <= 0 or scale <= 0:
        raise DomainError("Weibull shape and scale must be positive")
    if np.any(x <= 0):
        raise DomainError("weibull_transform requires positive x")
    return -np.expm1(-((x / scale) ** shape))


def weibull_quantile(u, shape: float, scale: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return scale * (-np.log1p(-u)) ** (1.0 / shape)


@dataclass(frozen=True)
class Term:
    kind: str
    variable: str
    df: int = 5
    shape: Optional[float] = None
    scale: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")

    @property
    def label(self) -> str:
        v = _pretty(self.variable)
        if self.kind == "raw":
            return v
        if self.kind == "log":
            return f"log({v})"
        if self.kind == "spline":
            return f"ns({v}, df={self.df})"
        if self.shape is None:
            return f"weibull({v})"
        return f"weibull({v}, shape={self.shape:.6g}, scale={self.scale:.6g})"

    @property
    def width(self) -> int:
        return self.df if self.kind == "spline" else 1

    def column_names(self) -> list[str]:
        if self.kind == "spline":
            return [f"{self.label}_{i}" for i in range(1, self.df + 1)]
        return [self.label]


def _pretty(var: str) -> str:
    v = var.lower()
    if v.startswith("log_"):
        return f"log({_pretty(v[4:])})"
    return {"m1": "M1", "ngdp": "NGDP", "prices": "Prices", "gold": "Gold"}.get(v, var)


_TERM_RE = re.compile(r"^(?P<fn>[a-z_]+)\((?P<args>.*)\)$", re.I)


def parse_term(text: str) -> Term:
    """Parse ``gold``, ``log(ngdp)``, ``ns(gold, df=5)`` or ``weibull(log_gold, shape=.., scale=..)``."""
    text = text.strip().replace(" ", "")
    m = _TERM_RE.match(text)
    if not m:
        return Term("raw", text.lower())
    fn, args = m.group("fn").lower(), m.group("args")
    parts = [a for a in args.split(",") if a]
    if not parts:
        raise ValueError(f"term {text!r} has no variable")
    var = parts[0]
    inner = _TERM_RE.match(var)
    if inner and inner.group("fn").lower() == "log":
        var = "log_" + inner.group("args").lower()
    var = var.lower()
    kw = {}
    for i, a in enumerate(parts[1:]):
        if "=" in a:
            k, v = a.split("=", 1)
            kw[k.lower()] = float(v)
        elif fn == "ns" and i == 0:
            kw["df"] = float(a)
        else:
            raise ValueError(f"cannot parse argument {a!r} in {text!r}")
    if fn == "log":
        return Term("log", var)
    if fn == "ns":
        return Term("spline", var, df=int(kw.get("df", 5)))
    if fn == "weibull":
        return Term("weibull", var, shape=kw.get("shape"), scale=kw.get("scale"))
    raise ValueError(f"unknown term function {fn!r}")


def parse_terms(text: str) -> tuple[Term, ...]:
    depth, buf, out = 0, "", []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+;" and depth == 0 or ch == "," and depth == 0:
            out.append(buf)
            buf = ""
        else:
            buf += ch
    out.append(buf)
    return tuple(parse_term(t) for t in out if t.strip())


@dataclass(frozen=True)
class GlmSpec:
    family: str = "gaussian"
    link: str = "identity"
    response: str = "log_m1"
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}")
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def parse(cls, family: str, link: str, response: str, terms: str) -> "GlmSpec":
        return cls(family.lower(), link.lower(), response.lower(), parse_terms(terms))

    @property
    def formula(self) -> str:
        return f"{_pretty(self.response)} ~ " + " + ".join(t.label for t in self.terms)

    def as_dict(self) -> dict:
        return {"family": self.family, "link": self.link, "response": self.response,
                "terms": [t.label for t in self.terms]}


@dataclass
class Design:
    """Transformed regressors (no intercept column) plus what is needed to rebuild them."""

    X: np.ndarray
    columns: list[str]
    groups: dict[str, list[int]]
    terms: tuple[Term, ...]
    splines: dict[int, SplineBasis] = field(default_factory=dict)

    def transform(self, data) -> np.ndarray:
        """Rebuild the design for new data with the fitted knots and Weibull parameters."""
        cols = []
        for i, term in enumerate(self.terms):
            x = _column(data, term.variable)
            if term.kind == "spline":
                cols.append(self.splines[i].evaluate(x))
            else:
                cols.append(_simple(term, x)[:, None])
        return np.hstack(cols) if cols else np.zeros((len(x), 0))


def _column(data, name: str) -> np.ndarray:
    if hasattr(data, "column"):
        return np.asarray(data.column(name), dtype=float)
    if name in data:
        return np.asarray(data[name], dtype=float)
    if name.startswith("log_") and name[4:] in data:
        return np.log(np.asarray(data[name[4:]], dtype=float))
    raise KeyError(name)


def _simple(term: Term, x: np.ndarray) -> np.ndarray:
    if term.kind == "raw":
        return x
    if term.kind == "log":
        if np.any(x <= 0):
            raise SupportError(f"log term on nonpositive {term.variable}")
        return np.log(x)
    return weibull_transform(x, term.shape, term.scale)


def build_design(data, terms, fit_weibull=None) -> Design:
    """Evaluate ``terms`` on ``data`` (a CountryDataset or mapping of arrays).

    Weibull terms lacking parameters are completed with ``fit_weibull(x)``
    returning (shape, scale).
    """
    cols, names, groups, splines, done = [], [], {}, {}, []
    for i, term in enumerate(terms):
        x = _column(data, term.variable)
        if term.kind == "spline":
            sb = natural_spline_basis(x, term.df)
            splines[i] = sb
            block = sb.basis
        else:
            if term.kind == "weibull" and term.shape is None:
                if fit_weibull is None:
                    raise ValueError(f"{term.label} needs shape/scale or a fitter")
                shape, scale = fit_weibull(x)
                term = replace(term, shape=float(shape), scale=float(scale))
            block = _simple(term, x)[:, None]
        done.append(term)
        start = sum(c.shape[1] for c in cols)
        cols.append(block)
        groups[term.label] = list(range(start, start + block.shape[1]))
        names.extend(term.column_names())
    X = np.hstack(cols) if cols else np.zeros((0, 0))
    return Design(X, names, groups, tuple(done), splines)
