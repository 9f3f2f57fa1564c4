"""Per-country run configuration, loadable from YAML or JSON."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .dataset import COUNTRIES, DEFAULT_RANGES
from .errors import ConfigError, UnknownCountry
from .ml import CvPlan, ModelKind
from .regress.terms import GlmSpec
from .sampler import ChainConfig

DATA_DIR_ENV = "MONET_DATA_DIR"
DEFAULT_DATA_FILE = "monet_data.csv"

# final model of each country: (family, link, response, terms)
DEFAULT_SPECS = {
    "US": ("gamma", "log", "log_m1", "log(ngdp) + ns(gold, df=5)"),
    "CA": ("gamma", "log", "log_m1", "log(ngdp) + weibull(log_gold)"),
    "UK": ("gamma", "log", "log_m1", "log(ngdp) + ns(gold, df=5)"),
    "BR": ("gaussian", "log", "log_m1", "log(ngdp) + ns(gold, df=5)"),
}

ML_FEATURES = ("log_ngdp", "log_gold")
ML_TARGET = "log_m1"


@dataclass(frozen=True)
class SamplerSettings:
    chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    target_accept: float = 0.8
    max_tree_depth: int = 10

    def chain_config(self, seed: int) -> ChainConfig:
        return ChainConfig(self.chains, self.warmup, self.draws, self.target_accept,
                           self.max_tree_depth, seed)


@dataclass(frozen=True)
class MlSettings:
    folds: int = 10
    repeats: int = 100
    test_fraction: float = 0.2
    n_trees: int = 500
    kinds: tuple = ("QRF", "BRNN", "SVMRadial", "CForest")
    grids: dict = field(default_factory=dict)  # kind -> list of parameter dicts

    def plan(self, seed: int) -> CvPlan:
        return CvPlan(self.folds, self.repeats, self.test_fraction, seed)


@dataclass(frozen=True)
class CountryConfig:
    country: str
    start: Optional[str] = None
    end: Optional[str] = None
    data_path: Optional[str] = None
    synthetic: bool = False  # simulate data instead of loading a file
    seed: int = 20240101
    sampler: SamplerSettings = SamplerSettings()
    reset_replicates: int = 1000
    family: Optional[str] = None
    link: Optional[str] = None
    response: Optional[str] = None
    terms: Optional[str] = None
    ml: MlSettings = MlSettings()
    output_dir: str = "reports"

    def __post_init__(self):
        code = str(self.country).upper()
        if code not in COUNTRIES:
            raise UnknownCountry(f"unknown country {self.country!r}; expected one of {COUNTRIES}")
        object.__setattr__(self, "country", code)
        if self.reset_replicates < 200:
            raise ConfigError("reset_replicates must be >= 200")
        for k in self.ml.kinds:
            ModelKind.parse(k)

    # -- defaults ---------------------------------------------------------
    def spec(self) -> GlmSpec:
        fam, link, resp, terms = DEFAULT_SPECS[self.country]
        return GlmSpec.parse(self.family or fam, self.link or link, self.response or resp,
                             self.terms or terms)

    def date_range(self) -> tuple[str, str]:
        lo, hi = DEFAULT_RANGES[self.country]
        return self.start or lo, self.end or hi

    def resolved_data_path(self) -> Optional[Path]:
        if self.synthetic:
            return None
        if self.data_path:
            p = Path(self.data_path)
            env = os.environ.get(DATA_DIR_ENV)
            if env and not p.is_absolute():
                return Path(env) / p
            return p
        env = os.environ.get(DATA_DIR_ENV)
        return Path(env or ".") / DEFAULT_DATA_FILE

    def filled_defaults(self) -> dict:
        """Every field left unset that a default filled, with the value used."""
        out = {}
        fam, link, resp, terms = DEFAULT_SPECS[self.country]
        lo, hi = DEFAULT_RANGES[self.country]
        for name, value in (("start", lo), ("end", hi), ("family", fam), ("link", link),
                            ("response", resp), ("terms", terms)):
            if getattr(self, name) is None:
                out[name] = value
        if self.data_path is None and not self.synthetic:
            out["data_path"] = str(self.resolved_data_path())
        out["ml_features"] = "+".join(ML_FEATURES)
        return out

    # -- serialisation ----------------------------------------------------
    def as_dict(self) -> dict:
        d = asdict(self)
        d["ml"]["kinds"] = list(self.ml.kinds)
        return d

    def config_hash(self) -> str:
        d = self.as_dict()
        d.pop("output_dir", None)
        d.pop("data_path", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "CountryConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        if "country" not in d:
            raise ConfigError("config needs a 'country'")
        try:
            if isinstance(d.get("sampler"), dict):
                d["sampler"] = SamplerSettings(**d["sampler"])
            if isinstance(d.get("ml"), dict):
                ml = dict(d["ml"])
                if "kinds" in ml:
                    ml["kinds"] = tuple(ml["kinds"])
                d["ml"] = MlSettings(**ml)
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "CountryConfig":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)
