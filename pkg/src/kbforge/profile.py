"""Per-attack descriptive statistics: min / lower-median / max feature profiles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow_data import AttackLabel, FlowRecord
from .forest_rank import ImportanceReport


@dataclass(frozen=True)
class FeatureProfile:
    feature: str
    min: float
    median: float
    max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.min) and math.isfinite(self.median) and math.isfinite(self.max)):
            raise ValueError(f"profile for {self.feature!r} has non-finite statistics")
        if not self.min <= self.median <= self.max:
            raise ValueError(
                f"profile for {self.feature!r} violates min <= median <= max: "
                f"{self.min}, {self.median}, {self.max}"
            )

    @property
    def is_constant(self) -> bool:
        return self.min == self.median == self.max


@dataclass(frozen=True)
class AttackProfile:
    attack: AttackLabel
    ranked_features: tuple[FeatureProfile, ...]
    k: int

    def __post_init__(self) -> None:
        names = [fp.feature for fp in self.ranked_features]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate features in profile for {self.attack.render()}")
        if len(self.ranked_features) > self.k:
            raise ValueError("ranked_features longer than k")

    def feature_names(self) -> tuple[str, ...]:
        return tuple(fp.feature for fp in self.ranked_features)

    def get(self, feature: str) -> FeatureProfile | None:
        for fp in self.ranked_features:
            if fp.feature == feature:
                return fp
        return None


def compute_profile(feature: str, values: list[float] | np.ndarray) -> FeatureProfile:
    """Exact min/max plus the lower median (an element of the data, never interpolated)."""
    array = np.asarray(values, dtype=np.float64)
    if array.size == 0:
        raise ValueError("cannot profile an empty value list")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"non-finite values passed for feature {feature!r}")
    mid = (array.size - 1) // 2
    median = float(np.partition(array, mid)[mid])
    return FeatureProfile(
        feature=feature,
        min=float(array.min()),
        median=median,
        max=float(array.max()),
    )


def build_attack_profile(
    records: list[FlowRecord],
    attack: AttackLabel,
    report: ImportanceReport,
    k: int = 10,
) -> AttackProfile:
    """Profile the top-k ranked features over records labeled with `attack` only."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = [r for r in records if r.label is attack]
    if not rows:
        raise ValueError(f"no records labeled {attack.render()}")
    top = report.ranking[:k]
    profiles = tuple(
        compute_profile(name, [r.features[name] for r in rows]) for name in top
    )
    return AttackProfile(attack=attack, ranked_features=profiles, k=k)


def profiles_to_json(profiles: list[AttackProfile] | tuple[AttackProfile, ...]) -> str:
    payload = [
        {
            "attack": p.attack.render(),
            "k": p.k,
            "features": [
                {"feature": fp.feature, "min": fp.min, "median": fp.median, "max": fp.max}
                for fp in p.ranked_features
            ],
        }
        for p in profiles
    ]
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def profiles_from_json(text: str) -> list[AttackProfile]:
    from .flow_data import canonicalize_label

    out = []
    for entry in json.loads(text):
        out.append(
            AttackProfile(
                attack=canonicalize_label(entry["attack"]),
                ranked_features=tuple(
                    FeatureProfile(
                        feature=f["feature"], min=f["min"], median=f["median"], max=f["max"]
                    )
                    for f in entry["features"]
                ),
                k=entry["k"],
            )
        )
    return out


def write_profiles(profiles: list[AttackProfile], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(profiles_to_json(profiles), encoding="utf-8")
