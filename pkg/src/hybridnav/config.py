"""Run configuration shared by the command-line tools."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from hybridnav.classical import PlannerConfig
from hybridnav.hybrid import SwitchConfig
from hybridnav.learned import TrainConfig

SEED_ENV = "SOCNAV_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    eps: float = 1.0
    social_layer: bool = False
    id_episodes: int = 200
    ood_episodes: int = 30
    test_fraction: float = 0.2
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"master_seed": self.master_seed, "eps": self.eps,
                "social_layer": self.social_layer, "id_episodes": self.id_episodes,
                "ood_episodes": self.ood_episodes, "test_fraction": self.test_fraction,
                "planner": self.planner.to_dict(), "switch": self.switch.to_dict(),
                "train": self.train.to_dict(), "paths": dict(sorted(self.paths.items()))}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        if "planner" in d:
            kw["planner"] = PlannerConfig.from_dict(d.pop("planner"))
        if "switch" in d:
            kw["switch"] = SwitchConfig(**d.pop("switch"))
        if "train" in d:
            kw["train"] = TrainConfig.from_dict(d.pop("train"))
        return cls(**d, **kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def load_config(path: Path | str | None) -> RunConfig:
    """Config from a JSON file (missing keys take defaults); seed falls back to the env var."""
    data: dict[str, Any] = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    if "master_seed" not in data:
        data["master_seed"] = default_seed()
    return RunConfig.from_dict(data)
