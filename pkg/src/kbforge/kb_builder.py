"""Knowledge-base rendering: long/short text KBs, key feature sets, and the
structured constraint form consumed by the rule oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

from .canonical import LONG_KB_TEXT, SHORT_KB_TEXT
from .flow_data import ATTACK_LABELS, AttackLabel, canonicalize_label, display_name
from .profile import AttackProfile, FeatureProfile

#: min == median == max within this tolerance renders as a hard "Has to be" line.
CONSTANT_TOLERANCE = 1e-6


class KbVariant(Enum):
    LONG = "long"
    SHORT = "short"


class KbSource(Enum):
    CANONICAL = "canonical"
    GENERATED = "generated"


@dataclass(frozen=True)
class KnowledgeBase:
    variant: KbVariant
    entries: dict[AttackLabel, str]
    source: KbSource

    def __post_init__(self) -> None:
        for label, text in self.entries.items():
            if not text:
                raise ValueError(f"empty KB entry for {label.render()}")
            if "\r" in text:
                raise ValueError("KB entries must be LF-normalized")

    def combined_text(self) -> str:
        ordered = [self.entries[a] for a in ATTACK_LABELS if a in self.entries]
        joiner = "\n\n" if self.variant is KbVariant.LONG else "\n"
        return joiner.join(ordered)


def format_number(value: float) -> str:
    """Up to two fractional digits, trailing zero trimmed but one decimal kept."""
    text = f"{value:.2f}"
    if text.endswith("0"):
        text = text[:-1]
    return text


def _attack_display(attack: AttackLabel) -> str:
    # "DDoS-PSHACK_Flood" -> "DDoS PSHACK flood"
    name = attack.render()
    if name.endswith("_Flood"):
        return name[: -len("_Flood")].replace("-", " ") + " flood"
    return name


def render_long_kb(profiles: list[AttackProfile] | tuple[AttackProfile, ...]) -> KnowledgeBase:
    """Render detailed per-attack entries: one bullet per ranked feature."""
    if not profiles:
        raise ValueError("no profiles to render")
    entries: dict[AttackLabel, str] = {}
    for profile in profiles:
        if not profile.ranked_features:
            raise ValueError(f"profile for {profile.attack.render()} has no features")
        lines = [
            f"If the attack is {_attack_display(profile.attack)}, "
            "it should exhibit the following characteristics:"
        ]
        for fp in profile.ranked_features:
            shown = display_name(fp.feature)
            if fp.max - fp.min <= CONSTANT_TOLERANCE:
                lines.append(f"- {shown}: Has to be {format_number(fp.median)}.")
            else:
                lines.append(
                    f"- {shown}: Ranges from {format_number(fp.min)} to "
                    f"{format_number(fp.max)}, commonly at {format_number(fp.median)}."
                )
        entries[profile.attack] = "\n".join(lines)
    return KnowledgeBase(variant=KbVariant.LONG, entries=entries, source=KbSource.GENERATED)


# --------------------------------------------------------------------------
# Key feature sets and the short KB.
# --------------------------------------------------------------------------


class DescriptorKind(Enum):
    MUST_EQUAL = "must-equal"
    HIGH = "high"
    LOW = "low"
    ELEVATED = "elevated"
    RANGE = "range"
    TYPICAL = "typical"


@dataclass(frozen=True)
class Descriptor:
    kind: DescriptorKind
    values: tuple[float, ...] = ()

    def render(self, feature: str) -> str:
        shown = display_name(feature)
        if self.kind is DescriptorKind.MUST_EQUAL:
            return f"{shown} has to be {format_number(self.values[0])}"
        if self.kind is DescriptorKind.HIGH:
            return f"High {shown}"
        if self.kind is DescriptorKind.LOW:
            return f"Low {shown}"
        if self.kind is DescriptorKind.ELEVATED:
            return f"Elevated {shown}"
        if self.kind is DescriptorKind.RANGE:
            return (
                f"{shown} between {format_number(self.values[0])} "
                f"and {format_number(self.values[1])}"
            )
        return f"{shown} typically {format_number(self.values[0])}"


@dataclass(frozen=True)
class KeyFeatureSet:
    per_attack: dict[AttackLabel, tuple[tuple[str, Descriptor], ...]]


def _ranges_overlap_fully(a: FeatureProfile, b: FeatureProfile) -> bool:
    return (a.min >= b.min and a.max <= b.max) or (b.min >= a.min and b.max <= a.max)


def _separation(a: FeatureProfile, b: FeatureProfile) -> float:
    if _ranges_overlap_fully(a, b):
        return 0.0
    union = max(a.max, b.max) - min(a.min, b.min)
    if union <= 0.0:
        return 0.0
    mid_a = (a.min + a.max) / 2.0
    mid_b = (b.min + b.max) / 2.0
    return abs(mid_a - mid_b) / union


def derive_key_features(
    profiles: list[AttackProfile] | tuple[AttackProfile, ...], max_features: int = 3
) -> KeyFeatureSet:
    """Pick up to three features per attack whose ranges separate it best.

    Separation of a feature is the worst-case midpoint gap over the other
    attacks profiling the same feature, normalized by the union range width;
    fully nested ranges score zero, and features no other attack profiles
    cannot be compared so they also score zero. Ties fall back to profile
    rank order.
    """
    if len(profiles) < 2:
        raise ValueError("need at least two profiles to compare")
    per_attack: dict[AttackLabel, tuple[tuple[str, Descriptor], ...]] = {}
    for profile in profiles:
        others = [p for p in profiles if p.attack is not profile.attack]
        scored: list[tuple[float, int, str, FeatureProfile]] = []
        for rank, fp in enumerate(profile.ranked_features):
            rivals = [o.get(fp.feature) for o in others]
            rivals = [r for r in rivals if r is not None]
            score = min((_separation(fp, r) for r in rivals), default=0.0)
            scored.append((score, rank, fp.feature, fp))
        scored.sort(key=lambda item: (-item[0], item[1]))

        medians = {}
        for p in profiles:
            for fp in p.ranked_features:
                medians.setdefault(fp.feature, []).append(fp.median)

        keys = []
        for score, _rank, feature, fp in scored[:max_features]:
            if fp.max - fp.min <= CONSTANT_TOLERANCE:
                descriptor = Descriptor(DescriptorKind.MUST_EQUAL, (fp.median,))
            else:
                peers = sorted(medians[feature])
                center = peers[(len(peers) - 1) // 2]
                if len(peers) > 1 and fp.median > center:
                    descriptor = Descriptor(DescriptorKind.HIGH)
                elif len(peers) > 1 and fp.median < center:
                    descriptor = Descriptor(DescriptorKind.LOW)
                else:
                    descriptor = Descriptor(DescriptorKind.RANGE, (fp.min, fp.max))
            keys.append((feature, descriptor))
        per_attack[profile.attack] = tuple(keys)
    return KeyFeatureSet(per_attack=per_attack)


def render_short_kb(keys: KeyFeatureSet) -> KnowledgeBase:
    """One line per attack: label, then semicolon-joined key descriptors.

    Attacks without derived keys fall back to their bundled reference line so
    the short variant always covers all seven flood classes.
    """
    entries: dict[AttackLabel, str] = {}
    for attack in ATTACK_LABELS:
        derived = keys.per_attack.get(attack)
        if derived is not None:
            if not derived:
                raise ValueError(f"no key descriptors for {attack.render()}")
            body = "; ".join(desc.render(feature) for feature, desc in derived)
            entries[attack] = f"{attack.render()}: {body}."
        elif attack in SHORT_KB_TEXT:
            entries[attack] = SHORT_KB_TEXT[attack]
        else:
            raise ValueError(f"short KB entry missing for {attack.render()}")
    return KnowledgeBase(variant=KbVariant.SHORT, entries=entries, source=KbSource.GENERATED)


def canonical_kb(variant: KbVariant) -> KnowledgeBase:
    """The bundled reference KB texts, byte-for-byte."""
    text = LONG_KB_TEXT if variant is KbVariant.LONG else SHORT_KB_TEXT
    return KnowledgeBase(variant=variant, entries=dict(text), source=KbSource.CANONICAL)


# --------------------------------------------------------------------------
# Structured constraint form for the rule oracle.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MandatoryEquals:
    feature: str
    value: float
    tolerance: float = CONSTANT_TOLERANCE


@dataclass(frozen=True)
class InRange:
    feature: str
    lo: float
    hi: float


@dataclass(frozen=True)
class TypicalNear:
    feature: str
    value: float
    tolerance: float


Constraint = Union[MandatoryEquals, InRange, TypicalNear]


@dataclass(frozen=True)
class StructuredKb:
    per_attack: dict[AttackLabel, tuple[Constraint, ...]]

    def __post_init__(self) -> None:
        for label, constraints in self.per_attack.items():
            hard = [c for c in constraints if isinstance(c, (MandatoryEquals, InRange))]
            if not hard:
                raise ValueError(
                    f"{label.render()} needs at least one mandatory or range constraint"
                )


def structured_kb(profiles: list[AttackProfile] | tuple[AttackProfile, ...]) -> StructuredKb:
    """Mechanical profile-to-constraint translation.

    Pinned features (min == median == max) become exact-match constraints;
    ranged features get a range check plus a typical-value check at five
    percent of the range width.
    """
    if not profiles:
        raise ValueError("no profiles given")
    per_attack: dict[AttackLabel, tuple[Constraint, ...]] = {}
    for profile in profiles:
        constraints: list[Constraint] = []
        for fp in profile.ranked_features:
            if fp.max - fp.min <= CONSTANT_TOLERANCE:
                constraints.append(MandatoryEquals(fp.feature, fp.median))
            else:
                constraints.append(InRange(fp.feature, fp.min, fp.max))
                constraints.append(
                    TypicalNear(fp.feature, fp.median, 0.05 * (fp.max - fp.min))
                )
        per_attack[profile.attack] = tuple(constraints)
    return StructuredKb(per_attack=per_attack)


def structured_kb_to_json(kb: StructuredKb) -> str:
    payload = {}
    for label in ATTACK_LABELS:
        if label not in kb.per_attack:
            continue
        rows = []
        for c in kb.per_attack[label]:
            if isinstance(c, MandatoryEquals):
                rows.append(
                    {"feature": c.feature, "kind": "mandatory_equals",
                     "value": c.value, "tolerance": c.tolerance}
                )
            elif isinstance(c, InRange):
                rows.append({"feature": c.feature, "kind": "in_range", "lo": c.lo, "hi": c.hi})
            else:
                rows.append(
                    {"feature": c.feature, "kind": "typical_near",
                     "value": c.value, "tolerance": c.tolerance}
                )
        payload[label.render()] = rows
    return json.dumps(payload, indent=2) + "\n"


def structured_kb_from_json(text: str) -> StructuredKb:
    per_attack: dict[AttackLabel, tuple[Constraint, ...]] = {}
    for raw_label, rows in json.loads(text).items():
        constraints: list[Constraint] = []
        for row in rows:
            if row["kind"] == "mandatory_equals":
                constraints.append(
                    MandatoryEquals(row["feature"], row["value"], row["tolerance"])
                )
            elif row["kind"] == "in_range":
                constraints.append(InRange(row["feature"], row["lo"], row["hi"]))
            elif row["kind"] == "typical_near":
                constraints.append(TypicalNear(row["feature"], row["value"], row["tolerance"]))
            else:
                raise ValueError(f"unknown constraint kind: {row['kind']!r}")
        per_attack[canonicalize_label(raw_label)] = tuple(constraints)
    return StructuredKb(per_attack=per_attack)


def write_kb(kb: KnowledgeBase, root: str | Path) -> list[Path]:
    """Persist a KB as kb/<variant>/<label>.txt plus a combined file."""
    root = Path(root)
    directory = root / kb.variant.value
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for attack in ATTACK_LABELS:
        if attack not in kb.entries:
            continue
        path = directory / f"{attack.render()}.txt"
        path.write_text(kb.entries[attack] + "\n", encoding="utf-8")
        written.append(path)
    combined = directory / "combined.txt"
    combined.write_text(kb.combined_text() + "\n", encoding="utf-8")
    written.append(combined)
    return written
