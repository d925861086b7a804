"""Experiment configuration (YAML)."""

from __future__ import annotations

import copy
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from ..errors import InvalidConfig


class ExperimentKind(enum.Enum):
    COVERAGE = "coverage"
    PURE_EXPLORE = "pure-explore"
    CONTEXTUAL = "contextual"
    LOWER_BOUND = "lower-bound"
    GAUSSIAN_BURNIN = "gaussian-burnin"


ALGORITHMS = {
    ExperimentKind.COVERAGE: ("coverage",),
    ExperimentKind.PURE_EXPLORE: ("rage-glm", "rage-glm-r", "passive", "rage-glm-2"),
    ExperimentKind.CONTEXTUAL: ("sup-logistic", "uniform"),
    ExperimentKind.LOWER_BOUND: ("transportation", "moderate-floor"),
    ExperimentKind.GAUSSIAN_BURNIN: ("gaussian-burnin",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    instance: dict
    algorithms: tuple
    seeds: tuple
    delta: float = 0.05
    epsilon: float = 0.5
    budget: float = 1e9
    out: str = "results/run"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.algorithms:
            raise InvalidConfig("algorithm list is empty")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS[self.kind]]
        if unknown:
            raise InvalidConfig(f"unknown algorithms for {self.kind.value}: {unknown}")
        if not self.seeds:
            raise InvalidConfig("seed list is empty")
        if not 0 < self.delta <= math.exp(-1):
            raise InvalidConfig("delta must lie in (0, 1/e]")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")

    @classmethod
    def from_dict(cls, raw, kind=None):
        if not isinstance(raw, dict):
            raise InvalidConfig("config must be a mapping")
        raw = copy.deepcopy(raw)
        name = raw.pop("kind", None) or kind
        if kind is not None and name != kind:
            raise InvalidConfig(f"config kind {name!r} does not match subcommand {kind!r}")
        try:
            k = ExperimentKind(name)
        except ValueError:
            raise InvalidConfig(f"unknown experiment kind {name!r}") from None
        known = {"instance", "algorithms", "seeds", "delta", "epsilon", "budget", "out", "options"}
        extra = set(raw) - known
        if extra:
            raise InvalidConfig(f"unknown config keys {sorted(extra)}")
        try:
            return cls(
                kind=k,
                instance=dict(raw.get("instance") or {}),
                algorithms=tuple(raw.get("algorithms") or ()),
                seeds=tuple(int(s) for s in raw.get("seeds") or ()),
                delta=float(raw.get("delta", 0.05)),
                epsilon=float(raw.get("epsilon", 0.5)),
                budget=float(raw.get("budget", 1e9)),
                out=str(raw.get("out", "results/run")),
                options=dict(raw.get("options") or {}),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None

    @classmethod
    def load(cls, path, kind=None):
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidConfig(f"cannot read config: {exc}") from None
        return cls.from_dict(raw, kind)

    def with_overrides(self, seed_offset=0, out=None):
        raw = self.to_dict()
        raw["seeds"] = [s + seed_offset for s in self.seeds]
        if out is not None:
            raw["out"] = out
        return ExperimentConfig.from_dict(raw)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "instance": self.instance,
            "algorithms": list(self.algorithms),
            "seeds": list(self.seeds),
            "delta": self.delta,
            "epsilon": self.epsilon,
            "budget": self.budget,
            "out": self.out,
            "options": self.options,
        }

    def config_hash(self):
        """Hash of the canonical config, excluding the output prefix."""
        raw = self.to_dict()
        raw.pop("out")
        blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
