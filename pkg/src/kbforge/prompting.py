"""Prompt construction for LLM-backed detection, and response-to-label parsing."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

from .canonical import PROFILED_FEATURES, REFERENCE_PROFILES
from .flow_data import ATTACK_LABELS, FEATURES, AttackLabel, FlowRecord, display_name
from .kb_builder import KbVariant, KnowledgeBase, format_number

#: The nine answer options, in fixed order. The corrected spelling "Unknown"
#: is offered; the parser below also accepts the "Unknow" variant.
LABEL_OPTIONS: tuple[AttackLabel, ...] = (*ATTACK_LABELS, AttackLabel.UNKNOWN, AttackLabel.NORMAL)

OPTION_LIST = ", ".join(label.render() for label in LABEL_OPTIONS)

INSTRUCTION = (
    "Based on the knowledge base, determine the most likely attack type from the "
    f"following list: {OPTION_LIST}. Answer with exactly one label."
)


class DescribeMode(Enum):
    NUMERIC = "numeric"
    QUALITATIVE = "qualitative"


@dataclass(frozen=True)
class QualitativeThresholds:
    """Cutoffs that turn raw feature values into High/Low/Elevated/Normal tags.

    Every tag function is total: any real value maps to exactly one tag.
    """

    rate_high_above: float = 100.0
    iat_low_below: float = 1e6
    iat_high_above: float = 1e7
    flag_elevated_at: float = 0.5

    @staticmethod
    def from_profiles(
        profiles=None, normal_iat_values: list[float] | None = None
    ) -> "QualitativeThresholds":
        """Derive cutoffs from attack profiles: rates are High above the
        cross-attack median of median rates; IAT is Low below the 25th
        percentile of normal traffic when samples are supplied."""
        profiles = list(profiles) if profiles is not None else list(REFERENCE_PROFILES.values())
        rate_medians = sorted(
            fp.median for p in profiles for fp in p.ranked_features if fp.feature in ("Rate", "Srate")
        )
        kwargs = {}
        if rate_medians:
            kwargs["rate_high_above"] = rate_medians[(len(rate_medians) - 1) // 2]
        if normal_iat_values:
            ordered = sorted(normal_iat_values)
            kwargs["iat_low_below"] = ordered[max(0, (len(ordered) - 1) // 4)]
        return QualitativeThresholds(**kwargs)

    def rate_tag(self, value: float) -> str:
        return "High" if value > self.rate_high_above else "Normal"

    def iat_tag(self, value: float) -> str:
        if value < self.iat_low_below:
            return "Low"
        if value > self.iat_high_above:
            return "High"
        return "Normal"

    def flag_tag(self, value: float) -> str:
        return "Elevated" if value >= self.flag_elevated_at else "Normal"


_PROTOCOL_NAMES = {1: "ICMP", 6: "TCP", 17: "UDP"}

_FLAG_ORDER = (
    ("SYN", "SYN Flag Number"),
    ("PSH", "PSH Flag Number"),
    ("ACK", "ACK Flag Number"),
    ("RST", "RST Flag Number"),
    ("FIN", "FIN Flag Number"),
)

#: Features listed in numeric mode: the ones the knowledge bases talk about,
#: in registry order.
KB_RELEVANT_FEATURES: tuple[str, ...] = tuple(
    name for name in FEATURES if name in PROFILED_FEATURES
)


def describe_flow(
    record: FlowRecord,
    mode: DescribeMode = DescribeMode.QUALITATIVE,
    thresholds: QualitativeThresholds = QualitativeThresholds(),
) -> str:
    """Render a record as the traffic-data block of a prompt."""
    if mode is DescribeMode.NUMERIC:
        lines = [
            f"- {display_name(name)}: {format_number(record.features[name])}"
            for name in KB_RELEVANT_FEATURES
        ]
        return "\n".join(lines)

    protocol_value = record.features["Protocol Type"]
    protocol = _PROTOCOL_NAMES.get(round(protocol_value), format_number(protocol_value))
    rate = record.features["Rate"]
    lines = [
        f"- Protocol Type: {protocol}",
        f"- Packet Rate: {format_number(rate)} packets/sec ({thresholds.rate_tag(rate)})",
        f"- Inter-Arrival Time (IAT): {thresholds.iat_tag(record.features['IAT'])}",
        "- TCP Flags:",
    ]
    for shown, feature in _FLAG_ORDER:
        lines.append(f"    - {shown}: {thresholds.flag_tag(record.features[feature])}")
    return "\n".join(lines)


def record_digest(record: FlowRecord) -> str:
    """Stable identity for a record's feature rendering.

    SHA-256 over "name=repr(value)" lines in registry order; the label does
    not participate. repr round-trips floats exactly, so equal renderings
    mean equal vectors.
    """
    body = "\n".join(f"{name}={record.features[name]!r}" for name in FEATURES)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Prompt:
    text: str
    kb_variant: KbVariant | None
    record_digest: str


def export_prompt(prompt: Prompt, path) -> None:
    """Write the prompt text to a file for auditing."""
    from pathlib import Path

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(prompt.text + "\n", encoding="utf-8")


def build_prompt(
    record: FlowRecord,
    kb: KnowledgeBase | None = None,
    mode: DescribeMode = DescribeMode.QUALITATIVE,
    thresholds: QualitativeThresholds = QualitativeThresholds(),
) -> Prompt:
    """KB section (if any) + traffic data + instruction with the option list."""
    sections = []
    if kb is not None:
        sections.append("Knowledge Base:\n" + kb.combined_text())
    sections.append("Network Traffic Data:\n" + describe_flow(record, mode, thresholds))
    sections.append(INSTRUCTION)
    return Prompt(
        text="\n\n".join(sections),
        kb_variant=kb.variant if kb is not None else None,
        record_digest=record_digest(record),
    )


def _label_pattern(label: AttackLabel) -> re.Pattern:
    if label is AttackLabel.UNKNOWN:
        return re.compile(r"\bunknown?\b", re.IGNORECASE)
    if label is AttackLabel.NORMAL:
        return re.compile(r"\bnormal\b", re.IGNORECASE)
    # "DDoS-SynonymousIP_Flood" -> optional DDoS prefix, separator-tolerant parts
    body = label.render().removeprefix("DDoS-").removesuffix("_Flood")
    compound = {"SynonymousIP": ["Synonymous", "IP"], "PSHACK": ["PSH", "ACK"], "RSTFIN": ["RST", "FIN"]}
    parts = compound.get(body, [re.escape(p) for p in re.split(r"[_\s-]+", body) if p])
    sep = r"[\s_\-]*"
    return re.compile(
        r"(?:ddos" + sep + r")?" + sep.join(parts) + sep + r"flood", re.IGNORECASE
    )


_LABEL_PATTERNS: tuple[tuple[AttackLabel, re.Pattern], ...] = tuple(
    (label, _label_pattern(label)) for label in LABEL_OPTIONS
)


def parse_response(text: str) -> AttackLabel:
    """Find canonical label mentions; earliest by position wins, none is Unknown."""
    best: tuple[int, int] | None = None
    best_label = AttackLabel.UNKNOWN
    for order, (label, pattern) in enumerate(_LABEL_PATTERNS):
        match = pattern.search(text)
        if match is None:
            continue
        key = (match.start(), order)
        if best is None or key < best:
            best = key
            best_label = label
    return best_label
