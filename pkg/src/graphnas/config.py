"""Experiment manifest: one declarative file plus flag / environment overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ._io import derive_seed

ENV_PREFIX = "GRAPHNAS__"

# named sub-streams of the manifest-level seed
STREAMS = {"generate": 1, "split": 2, "search": 3, "train": 4, "featurize": 5, "augment": 6}


@dataclass
class GenerateConfig:
    n: int = 64
    degree_lo: float = 2.0
    degree_hi: float = 63.0
    degree_steps: int = 31
    p_steps: int = 193
    seeds_per_cell: int = 1
    augment_rounds: int = 0
    rewires_per_round: int = 16
    max_size: int | None = None


@dataclass
class SurrogateConfig:
    features: list | None = None  # None: every non-constant canonical feature
    k: int = 10
    criterion: str = "test"
    fixed_first_sweep: bool = True


@dataclass
class SearchSettings:
    epsilon: float = 0.01
    max_steps: int = 10
    max_proposals_per_step: int = 200
    mode: str = "MINIMIZE"
    start: str = "highest"  # highest | lowest | <graph id>
    seeds: int = 1
    bucket: int = 10


@dataclass
class TrainConfig:
    units_per_node: int = 1
    n_layers: int = 5
    epochs: int = 30
    lr: float = 0.05
    batch_size: int = 64
    momentum: float = 0.9
    weight_decay: float = 5e-4
    repeats: int = 1
    n_samples: int = 4000
    n_classes: int = 4
    clusters_per_class: int = 8
    dim: int = 2
    separation: float = 3.0
    noise: float = 0.35


@dataclass
class ExperimentManifest:
    seed: int = 0
    out: str = "runs/default"
    workers: int = 1
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    search: SearchSettings = field(default_factory=SearchSettings)
    train: TrainConfig = field(default_factory=TrainConfig)

    def stream(self, name: str) -> int:
        return derive_seed(self.seed, STREAMS[name])

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def validate(self):
        g = self.generate
        if g.n < 2:
            raise ValueError("generate.n: need at least 2 nodes")
        if not (2 <= g.degree_lo <= g.n - 1):
            raise ValueError(f"generate.degree_lo: must lie in [2, {g.n - 1}], got {g.degree_lo}")
        if not (g.degree_lo < g.degree_hi <= g.n - 1):
            raise ValueError(f"generate.degree_hi: must lie in ({g.degree_lo}, {g.n - 1}], got {g.degree_hi}")
        for name in ("degree_steps", "p_steps", "seeds_per_cell"):
            if getattr(g, name) < 1:
                raise ValueError(f"generate.{name}: must be >= 1")
        if self.search.mode not in ("MINIMIZE", "MAXIMIZE"):
            raise ValueError(f"search.mode: expected MINIMIZE or MAXIMIZE, got {self.search.mode}")
        if not (0 < self.search.epsilon < 1):
            raise ValueError("search.epsilon: must lie in (0, 1)")
        if self.surrogate.criterion not in ("test", "cv"):
            raise ValueError("surrogate.criterion: expected 'test' or 'cv'")


def _coerce(value: str, current):
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if current is None:
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return value
    return value


def _apply(obj, path: list, raw, from_text: bool):
    head = path[0]
    names = {f.name for f in dataclasses.fields(obj)}
    if head not in names:
        raise ValueError(f"{head}: unknown manifest field")
    cur = getattr(obj, head)
    if len(path) > 1:
        if not dataclasses.is_dataclass(cur):
            raise ValueError(f"{head}: not a section")
        _apply(cur, path[1:], raw, from_text)
        return
    setattr(obj, head, _coerce(raw, cur) if from_text else raw)


def _from_dict(doc: dict) -> ExperimentManifest:
    m = ExperimentManifest()
    for key, val in (doc or {}).items():
        if isinstance(val, dict):
            for sub, v in val.items():
                _apply(m, [key, sub], v, False)
        else:
            _apply(m, [key], val, False)
    return m


def load_manifest(path=None, overrides: dict | None = None, env=None) -> ExperimentManifest:
    """Read a YAML/JSON manifest, then apply ``GRAPHNAS__SECTION__FIELD`` env vars and flag overrides."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) if path else {}
    m = _from_dict(doc)
    env = os.environ if env is None else env
    for key, val in sorted(env.items()):
        if key.startswith(ENV_PREFIX):
            _apply(m, key[len(ENV_PREFIX) :].lower().split("__"), val, True)
    for key, val in (overrides or {}).items():
        if val is not None:
            _apply(m, key.split("."), val, False)
    m.validate()
    return m
