"""Detector backends behind one classify contract: a deterministic rule oracle
over structured constraints, an HTTP client for Ollama-style local LLM
endpoints, and a record/replay store for offline tests."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .flow_data import ATTACK_LABELS, AttackLabel, FlowRecord
from .kb_builder import InRange, KnowledgeBase, MandatoryEquals, StructuredKb, TypicalNear
from .prompting import DescribeMode, QualitativeThresholds, build_prompt, parse_response, record_digest


class DetectorError(Exception):
    """Base for all detector failures (distinct from an Unknown verdict)."""


class TransportError(DetectorError):
    """The endpoint could not be used; the classification never happened."""


class EndpointTimeout(TransportError):
    pass


class EndpointConnectionError(TransportError):
    pass


class EndpointStatusError(TransportError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"endpoint returned HTTP {status}")
        self.status = status
        self.body = body


class EndpointProtocolError(TransportError):
    """The endpoint answered, but not in the documented wire format."""


class ReplayMissError(DetectorError):
    """Replay store has no response for the requested record digest."""


@dataclass(frozen=True)
class DetectionResult:
    predicted: AttackLabel
    raw_response: str | None
    latency_ms: float
    backend_id: str

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency cannot be negative")


class Detector(Protocol):
    backend_id: str

    def classify(self, record: FlowRecord, kb=None) -> DetectionResult: ...


def classify(backend: Detector, record: FlowRecord, kb=None) -> DetectionResult:
    """Uniform entry point; model-content problems yield Unknown, transport
    problems raise."""
    return backend.classify(record, kb)


# ---------------------------------------------------------------------------
# Rule oracle.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleOracleConfig:
    min_score: float = 0.5
    mandatory_strict: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must lie in [0, 1]")


def _constraint_credit(record: FlowRecord, constraint) -> float:
    value = record.features[constraint.feature]
    if isinstance(constraint, MandatoryEquals):
        return 1.0 if abs(value - constraint.value) <= constraint.tolerance else 0.0
    if isinstance(constraint, InRange):
        return 1.0 if constraint.lo <= value <= constraint.hi else 0.0
    if isinstance(constraint, TypicalNear):
        delta = abs(value - constraint.value)
        if delta <= constraint.tolerance:
            return 1.0
        if delta <= 2.0 * constraint.tolerance:
            return 0.5  # near miss gets half credit
        return 0.0
    raise TypeError(f"unknown constraint type: {type(constraint)!r}")


def rule_oracle_scores(
    record: FlowRecord, kb: StructuredKb, config: RuleOracleConfig = RuleOracleConfig()
) -> dict[AttackLabel, float]:
    """Fraction of satisfied constraints per attack; a failed mandatory
    constraint zeroes the attack outright in strict mode."""
    scores: dict[AttackLabel, float] = {}
    for attack, constraints in kb.per_attack.items():
        if not constraints:
            continue
        credit = 0.0
        zeroed = False
        for constraint in constraints:
            c = _constraint_credit(record, constraint)
            if (
                config.mandatory_strict
                and isinstance(constraint, MandatoryEquals)
                and c == 0.0
            ):
                zeroed = True
                break
            credit += c
        scores[attack] = 0.0 if zeroed else credit / len(constraints)
    return scores


def rule_oracle_classify(
    record: FlowRecord, kb: StructuredKb, config: RuleOracleConfig = RuleOracleConfig()
) -> AttackLabel:
    """Deterministic argmax over constraint-satisfaction scores.

    Below min_score the verdict is Unknown; exact ties resolve in the fixed
    attack order (ICMP, UDP, TCP, PSHACK, SYN, RSTFIN, SynonymousIP).
    """
    if not kb.per_attack:
        raise ValueError("structured KB is empty")
    scores = rule_oracle_scores(record, kb, config)
    best_label = AttackLabel.UNKNOWN
    best_score = -1.0
    for attack in ATTACK_LABELS:
        score = scores.get(attack)
        if score is not None and score > best_score:
            best_score = score
            best_label = attack
    if best_score < config.min_score:
        return AttackLabel.UNKNOWN
    return best_label


class RuleOracleDetector:
    """Scores records against a structured KB; pure and thread-safe."""

    def __init__(self, kb: StructuredKb, config: RuleOracleConfig = RuleOracleConfig()):
        self.kb = kb
        self.config = config
        self.backend_id = "rule-oracle"

    def classify(self, record: FlowRecord, kb=None) -> DetectionResult:
        structured = kb if isinstance(kb, StructuredKb) else self.kb
        start = time.perf_counter()
        verdict = rule_oracle_classify(record, structured, self.config)
        latency = (time.perf_counter() - start) * 1000.0
        return DetectionResult(
            predicted=verdict, raw_response=None, latency_ms=latency,
            backend_id=self.backend_id,
        )


# ---------------------------------------------------------------------------
# LLM endpoint backend (Ollama-style generate API, or chat completions).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str = "http://localhost:11434"
    model_name: str = "llama3.1:8b"
    request_timeout_s: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    api: str = "generate"  # "generate" (Ollama) or "chat" (chat completions)
    max_in_flight: int = 4
    backoff_base_s: float = 0.25

    def __post_init__(self) -> None:
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.api not in ("generate", "chat"):
            raise ValueError("api must be 'generate' or 'chat'")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class LlmDetector:
    """POSTs prompts to a local-LLM endpoint and parses the reply to a label.

    Transient failures (timeouts, connection errors, 5xx) are retried with
    exponential backoff up to max_retries; other failures raise immediately.
    Concurrent classify calls are capped at max_in_flight requests.
    """

    def __init__(
        self,
        config: LlmEndpointConfig = LlmEndpointConfig(),
        mode: DescribeMode = DescribeMode.QUALITATIVE,
        thresholds: QualitativeThresholds = QualitativeThresholds(),
        session: requests.Session | None = None,
    ):
        self.config = config
        self.mode = mode
        self.thresholds = thresholds
        self.session = session or requests.Session()
        self.backend_id = f"llm:{config.model_name}"
        self._gate = threading.Semaphore(config.max_in_flight)

    def _request_once(self, prompt_text: str) -> tuple[str, float]:
        cfg = self.config
        if cfg.api == "generate":
            url = f"{cfg.base_url.rstrip('/')}/api/generate"
            body = {
                "model": cfg.model_name,
                "prompt": prompt_text,
                "stream": False,
                "options": {"temperature": cfg.temperature},
            }
        else:
            url = f"{cfg.base_url.rstrip('/')}/v1/chat/completions"
            body = {
                "model": cfg.model_name,
                "messages": [{"role": "user", "content": prompt_text}],
                "temperature": cfg.temperature,
            }
        start = time.perf_counter()
        try:
            response = self.session.post(url, json=body, timeout=cfg.request_timeout_s)
        except requests.Timeout as exc:
            raise EndpointTimeout(str(exc)) from exc
        except requests.ConnectionError as exc:
            raise EndpointConnectionError(str(exc)) from exc
        latency = (time.perf_counter() - start) * 1000.0
        if response.status_code != 200:
            raise EndpointStatusError(response.status_code, response.text[:500])
        try:
            payload = response.json()
            if cfg.api == "generate":
                text = payload["response"]
            else:
                text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointProtocolError(f"malformed response body: {exc}") from exc
        if not isinstance(text, str):
            raise EndpointProtocolError("response text field is not a string")
        return text, latency

    def _request_with_retries(self, prompt_text: str) -> tuple[str, float]:
        cfg = self.config
        last: TransportError | None = None
        for attempt in range(cfg.max_retries + 1):
            try:
                return self._request_once(prompt_text)
            except (EndpointTimeout, EndpointConnectionError) as exc:
                last = exc
            except EndpointStatusError as exc:
                if exc.status < 500:
                    raise  # client errors are not transient
                last = exc
            if attempt < cfg.max_retries:
                time.sleep(cfg.backoff_base_s * (2**attempt))
        assert last is not None
        raise last

    def classify(self, record: FlowRecord, kb: KnowledgeBase | None = None) -> DetectionResult:
        prompt = build_prompt(record, kb, self.mode, self.thresholds)
        with self._gate:
            text, latency = self._request_with_retries(prompt.text)
        return DetectionResult(
            predicted=parse_response(text),
            raw_response=text,
            latency_ms=latency,
            backend_id=self.backend_id,
        )


def llm_classify(
    record: FlowRecord,
    kb: KnowledgeBase | None,
    config: LlmEndpointConfig,
    mode: DescribeMode = DescribeMode.QUALITATIVE,
) -> DetectionResult:
    """One-shot convenience wrapper around LlmDetector."""
    return LlmDetector(config, mode=mode).classify(record, kb)


# ---------------------------------------------------------------------------
# Record / replay.
# ---------------------------------------------------------------------------


@dataclass
class ReplayStore:
    """JSON-lines store of {digest, response, label} rows, keyed by digest."""

    rows: dict[str, tuple[str | None, AttackLabel]] = field(default_factory=dict)

    def record(self, digest: str, response: str | None, label: AttackLabel) -> None:
        self.rows[digest] = (response, label)

    def get(self, digest: str) -> tuple[str | None, AttackLabel]:
        if digest not in self.rows:
            raise ReplayMissError(f"no stored response for digest {digest[:12]}...")
        return self.rows[digest]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for digest in sorted(self.rows):
                response, label = self.rows[digest]
                handle.write(
                    json.dumps(
                        {"digest": digest, "response": response, "label": label.render()}
                    )
                    + "\n"
                )

    @staticmethod
    def load(path: str | Path) -> "ReplayStore":
        from .flow_data import canonicalize_label

        store = ReplayStore()
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                store.rows[row["digest"]] = (
                    row.get("response"),
                    canonicalize_label(row["label"]),
                )
        return store


def replay_classify(digest: str, store: ReplayStore) -> DetectionResult:
    """Fail-closed lookup: a digest the store has never seen is an error."""
    start = time.perf_counter()
    response, label = store.get(digest)
    latency = (time.perf_counter() - start) * 1000.0
    return DetectionResult(
        predicted=label, raw_response=response, latency_ms=latency, backend_id="replay"
    )


class ReplayDetector:
    def __init__(self, store: ReplayStore):
        self.store = store
        self.backend_id = "replay"

    def classify(self, record: FlowRecord, kb=None) -> DetectionResult:
        return replay_classify(record_digest(record), self.store)


class RecordingDetector:
    """Wraps another backend and captures its verdicts for later replay."""

    def __init__(self, inner: Detector, store: ReplayStore):
        self.inner = inner
        self.store = store
        self.backend_id = inner.backend_id

    def classify(self, record: FlowRecord, kb=None) -> DetectionResult:
        result = self.inner.classify(record, kb)
        self.store.record(record_digest(record), result.raw_response, result.predicted)
        return result
