"""Pipeline configuration: defaults, named profiles, ``key = value`` files, overrides."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Optional

from .astar import SearchParams
from .graphx import PROFILES, ExtractParams
from .metrics import MATCH_TARGETS
from .scoring import ScorerSpec


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    profile: Optional[str] = None
    # extraction
    threshold: float = 0.5
    d: int = 30
    epsilon: Optional[float] = None
    k: float = 1.5
    min_spur: int = 5
    # search
    base: float = 1.1
    hweight: float = 0.5
    connectivity: int = 8
    search_margin: Optional[int] = None
    max_expansions: int = 4_000_000
    # scoring
    scorer: str = "mean"
    q: float = 0.05
    command: str = ""
    patch_size: int = 256
    timeout: float = 30.0
    tau: float = 0.5
    # samples
    rho: float = 1.0
    # metrics
    R: float = 10.0
    m: tuple = field(default_factory=lambda: tuple(range(1, 11)))
    match: str = "all"
    max_pairs: Optional[int] = None
    seed: int = 0
    jobs: int = 1

    def extract_params(self) -> ExtractParams:
        search = SearchParams(self.base, self.hweight, self.connectivity, self.search_margin, self.max_expansions)
        return ExtractParams(self.threshold, self.d, self.epsilon, self.k, self.min_spur, search)

    def scorer_spec(self) -> ScorerSpec:
        return ScorerSpec(self.scorer, self.q, self.command, self.patch_size, self.timeout)

    def validate(self) -> "Config":
        try:
            self.extract_params()
            self.scorer_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.match not in MATCH_TARGETS:
            raise ConfigError(f"match must be one of {MATCH_TARGETS}")
        if self.R <= 0:
            raise ConfigError("R must be positive")
        if any(v < 0 for v in self.m) or not self.m:
            raise ConfigError("m must be a non-empty list of non-negative distances")
        if self.rho < 0:
            raise ConfigError("rho must be non-negative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}
_OPTIONAL_INT = {"search_margin", "max_pairs"}
_OPTIONAL_FLOAT = {"epsilon"}
_INT = {"d", "min_spur", "connectivity", "max_expansions", "patch_size", "jobs", "seed"}
_FLOAT = {"threshold", "k", "base", "hweight", "q", "timeout", "tau", "rho", "R"}


def parse_distances(text: str) -> tuple:
    """``"1..10"``, ``"1,3,5"`` or ``"3"``; integers stay integers."""
    text = text.strip()
    rng = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", text)
    if rng:
        lo, hi = int(rng.group(1)), int(rng.group(2))
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return tuple(range(lo, hi + 1))
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        v = float(tok)
        out.append(int(v) if v.is_integer() else v)
    return tuple(out)


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key == "m":
            return parse_distances(raw)
        if key in _OPTIONAL_INT:
            return None if raw.lower() in ("", "none") else int(raw)
        if key in _OPTIONAL_FLOAT:
            return None if raw.lower() in ("", "none", "auto") else float(raw)
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def read_config_file(path) -> list[tuple[str, str]]:
    items = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        items.append((key, value))
    return items


def build_config(path=None, overrides=()) -> Config:
    """Defaults < profile < config file < overrides; unknown keys are rejected."""
    items = list(read_config_file(path)) if path else []
    items += [(k, v) for k, v in overrides if v is not None]
    for key, _ in items:
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = Config()
    profile = None
    for key, value in items:
        if key == "profile":
            profile = value.strip()
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
        cfg.profile = profile
        for key, value in PROFILES[profile].items():
            setattr(cfg, key, value)
    for key, value in items:
        if key != "profile":
            setattr(cfg, key, _convert(key, value))
    return cfg.validate()
