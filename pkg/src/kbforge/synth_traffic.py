"""Deterministic synthetic flow generator driven by attack feature profiles.

Profiled features jitter around the class median inside [min, max]; features a
class does not pin are drawn from per-feature background bands approximating
benign traffic. Background sampling mixes point masses at the band edges with
a uniform interior: aggregated IoT window features pile up at characteristic
exact values (42-byte minimum frames, pure-protocol windows), and those ties
are what keep any single feature from trivially separating the classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .flow_data import ATTACK_LABELS, FEATURES, AttackLabel, DatasetSummary, FlowRecord
from .canonical import REFERENCE_PROFILES
from .profile import AttackProfile


@dataclass(frozen=True)
class BackgroundBand:
    lo: float
    hi: float
    lo_mass: float = 0.0  # probability of drawing exactly lo
    hi_mass: float = 0.0  # probability of drawing exactly hi

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("background band lo > hi")
        if not 0.0 <= self.lo_mass + self.hi_mass <= 1.0:
            raise ValueError("edge masses must sum to at most 1")


_FLAG_AND_COUNT_FEATURES = (
    "FIN Flag Number",
    "SYN Flag Number",
    "RST Flag Number",
    "PSH Flag Number",
    "ACK Flag Number",
    "ECE Flag Number",
    "CWR Flag Number",
    "ACK Count",
    "SYN Count",
    "FIN Count",
    "URG Count",
    "RST Count",
)

#: Benign-plausible background bands. Flag and count features sit at zero;
#: protocol indicators are mostly-off with occasional pure-protocol windows;
#: size-like features straddle the small-packet regime the floods live in.
DEFAULT_BACKGROUND: dict[str, BackgroundBand] = {
    "Protocol Type": BackgroundBand(1.0, 17.0, lo_mass=0.40, hi_mass=0.15),
    "ICMP": BackgroundBand(0.0, 1.0, lo_mass=0.45, hi_mass=0.25),
    # No exact-1.0 mass for UDP: pure-UDP windows are treated as the attack's
    # own signature, which keeps the UDP indicator's exact-match constraint
    # unsatisfiable by the other classes.
    "UDP": BackgroundBand(0.0, 1.0, lo_mass=0.45, hi_mass=0.0),
    "TCP": BackgroundBand(0.0, 1.0, lo_mass=0.45, hi_mass=0.25),
    "HTTP": BackgroundBand(0.0, 1.0, lo_mass=0.70, hi_mass=0.05),
    "DNS": BackgroundBand(0.0, 1.0, lo_mass=0.70, hi_mass=0.05),
    "SSH": BackgroundBand(0.0, 1.0, lo_mass=0.70, hi_mass=0.05),
    "Min": BackgroundBand(42.0, 90.0, lo_mass=0.15),
    "Max": BackgroundBand(42.0, 300.0, lo_mass=0.55),
    "AVG": BackgroundBand(40.0, 200.0, lo_mass=0.55),
    "Tot size": BackgroundBand(42.0, 200.0, lo_mass=0.55),
    "Tot sum": BackgroundBand(60.0, 1200.0),
    "Magnitude": BackgroundBand(4.0, 10.0, hi_mass=0.15),
    "IAT": BackgroundBand(1e3, 1e6),
    "Rate": BackgroundBand(0.5, 5000.0),
    "Srate": BackgroundBand(0.5, 5000.0),
    "Header Length": BackgroundBand(40.0, 1200.0),
    "Flow Duration": BackgroundBand(0.0, 120.0, lo_mass=0.30),
    "Number": BackgroundBand(1.0, 50.0),
    "Std": BackgroundBand(0.0, 500.0),
    **{name: BackgroundBand(0.0, 0.0) for name in _FLAG_AND_COUNT_FEATURES},
}


@dataclass(frozen=True)
class SynthSpec:
    profiles: tuple[AttackProfile, ...]
    n_per_attack: int = 500
    jitter: float = 0.3
    seed: int = 0
    background: Mapping[str, BackgroundBand] = field(
        default_factory=lambda: dict(DEFAULT_BACKGROUND)
    )

    def __post_init__(self) -> None:
        if self.n_per_attack < 1:
            raise ValueError("n_per_attack must be >= 1")
        if not 0.0 <= self.jitter <= 1.0:
            raise ValueError("jitter must lie in [0, 1]")
        missing = set(FEATURES) - set(self.background)
        if missing:
            raise ValueError(f"background bands missing for: {sorted(missing)}")

    def profile_for(self, attack: AttackLabel) -> AttackProfile | None:
        for profile in self.profiles:
            if profile.attack is attack:
                return profile
        return None


def default_spec(n_per_attack: int = 500, jitter: float = 0.3, seed: int = 0) -> SynthSpec:
    """A SynthSpec over the bundled reference profiles and background bands."""
    return SynthSpec(
        profiles=tuple(REFERENCE_PROFILES.values()),
        n_per_attack=n_per_attack,
        jitter=jitter,
        seed=seed,
    )


def _flow_rng(spec: SynthSpec, attack: AttackLabel, index: int) -> np.random.Generator:
    ordinal = ATTACK_LABELS.index(attack) if attack in ATTACK_LABELS else 99
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((spec.seed, ordinal, index)))
    )


def generate_flow(spec: SynthSpec, attack: AttackLabel, index: int) -> FlowRecord:
    """Generate one labeled flow; a pure function of (spec, attack, index).

    Profiled features sample at ``median + jitter * u * min(median-min,
    max-median)`` with u ~ Uniform(-1, 1), clamped to [min, max]; a feature
    whose median sits at a range edge therefore stays pinned at the median.
    """
    profile = spec.profile_for(attack)
    if profile is None:
        raise ValueError(f"no profile for attack {attack.render()}")
    rng = _flow_rng(spec, attack, index)
    values: dict[str, float] = {}
    for name in FEATURES:
        fp = profile.get(name)
        if fp is not None:
            if fp.is_constant:
                values[name] = fp.median
            else:
                width = min(fp.median - fp.min, fp.max - fp.median)
                u = rng.uniform(-1.0, 1.0)
                value = fp.median + spec.jitter * u * width
                values[name] = float(min(max(value, fp.min), fp.max))
        else:
            band = spec.background[name]
            pick = rng.random()
            interior = rng.uniform(band.lo, band.hi)
            if pick < band.lo_mass:
                values[name] = band.lo
            elif pick > 1.0 - band.hi_mass:
                values[name] = band.hi
            else:
                values[name] = float(interior)
    return FlowRecord(features=values, label=attack)


def generate_dataset(spec: SynthSpec) -> tuple[list[FlowRecord], DatasetSummary]:
    """n_per_attack flows per profiled attack, in profile-then-index order."""
    records: list[FlowRecord] = []
    summary = DatasetSummary()
    for profile in spec.profiles:
        for index in range(spec.n_per_attack):
            record = generate_flow(spec, profile.attack, index)
            records.append(record)
            summary.record_count += 1
            summary.per_label_counts[profile.attack] += 1
    return records, summary
