"""Command-line pipeline: rank, profile, kb build, synth, detect, eval, select.

All subcommands share one JSON config; flags override environment variables
(prefix KBFORGE_), which override the file. Artifacts land under
<out>/run-<config digest>/ so a re-run with identical config and seed
overwrites identical bytes, while a changed config gets a fresh directory.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

from . import canonical, detectors, evaluation, flow_data, forest_rank, kb_builder, profile as profile_mod
from . import prompting, synth_traffic


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG: dict = {
    "seed": 0,
    "out": "out",
    "k": 10,
    "data": {"synth": {"n_per_attack": 500, "jitter": 0.3}},
    "forest": {"num_trees": 100, "max_depth": 12, "min_samples_leaf": 5, "bootstrap": True},
    "kb": {"variant": "both", "source": "canonical"},
    "backend": {
        "kind": "rule-oracle",
        "llm": {
            "base_url": "http://localhost:11434",
            "model_name": "llama3.1:8b",
            "request_timeout_s": 60.0,
            "max_retries": 2,
            "temperature": 0.0,
            "api": "generate",
            "max_in_flight": 4,
        },
        "rule_oracle": {"min_score": 0.5, "mandatory_strict": True},
        "replay": {"store_dir": "replays"},
    },
    "eval": {
        "n_per_class": 500,
        "kb_configs": ["no_kb", "long_kb", "short_kb"],
        "best_effort": False,
        "mode": "qualitative",
        "workers": 1,
    },
}

#: KBFORGE_* environment variables -> dotted config keys.
ENV_KEYS = {
    "KBFORGE_SEED": ("seed", int),
    "KBFORGE_OUT": ("out", str),
    "KBFORGE_BACKEND": ("backend.kind", str),
    "KBFORGE_KB": ("kb.variant", str),
    "KBFORGE_KB_SOURCE": ("kb.source", str),
    "KBFORGE_N_PER_CLASS": ("eval.n_per_class", int),
    "KBFORGE_BASE_URL": ("backend.llm.base_url", str),
    "KBFORGE_MODEL": ("backend.llm.model_name", str),
}


def _set_path(config: dict, dotted: str, value) -> None:
    node = config
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def build_config(args: argparse.Namespace) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = _merge(config, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc

    for env, (dotted, cast) in ENV_KEYS.items():
        if env in os.environ:
            try:
                _set_path(config, dotted, cast(os.environ[env]))
            except ValueError as exc:
                raise ConfigError(f"bad value for {env}: {exc}") from exc

    flag_map = {
        "seed": "seed",
        "out": "out",
        "backend": "backend.kind",
        "kb_source": "kb.source",
        "n_per_class": "eval.n_per_class",
        "base_url": "backend.llm.base_url",
        "model": "backend.llm.model_name",
        "n_per_attack": "data.synth.n_per_attack",
        "jitter": "data.synth.jitter",
        "profiles": "profiles_path",
    }
    for attr, dotted in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set_path(config, dotted, value)
    if getattr(args, "kb", None) is not None:
        _set_path(config, "kb.variant", args.kb)
    if getattr(args, "dataset", None) is not None:
        config["data"] = {"dataset": {"path": args.dataset, "label_column": "label"}}
    if getattr(args, "synth", False):
        config["data"] = {"synth": dict(DEFAULT_CONFIG["data"]["synth"])}
        if getattr(args, "n_per_attack", None) is not None:
            config["data"]["synth"]["n_per_attack"] = args.n_per_attack
        if getattr(args, "jitter", None) is not None:
            config["data"]["synth"]["jitter"] = args.jitter

    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    data = config.get("data", {})
    sources = [key for key in ("synth", "dataset") if key in data]
    if len(sources) != 1:
        raise ConfigError("config must name exactly one data source (data.synth or data.dataset)")
    if "dataset" in data:
        path = Path(data["dataset"].get("path", ""))
        if not path.exists():
            raise ConfigError(f"dataset path does not exist: {path}")
    if config.get("profiles_path") and not Path(config["profiles_path"]).exists():
        raise ConfigError(f"profiles path does not exist: {config['profiles_path']}")
    if config["backend"]["kind"] not in ("rule-oracle", "llm", "replay"):
        raise ConfigError(f"unknown backend kind: {config['backend']['kind']!r}")
    if config["kb"]["variant"] not in ("long", "short", "both", "none"):
        raise ConfigError(f"unknown kb variant: {config['kb']['variant']!r}")
    if config["kb"]["source"] not in ("canonical", "generated"):
        raise ConfigError(f"unknown kb source: {config['kb']['source']!r}")
    for key in ("seed", "k"):
        if not isinstance(config[key], int):
            raise ConfigError(f"config {key!r} must be an integer")
    bad = [c for c in config["eval"]["kb_configs"] if c not in ("no_kb", "long_kb", "short_kb")]
    if bad:
        raise ConfigError(f"unknown eval kb_configs: {bad}")


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def artifact_dir(config: dict) -> Path:
    return Path(config["out"]) / f"run-{config_digest(config)}"


class RunLock:
    """Guards an artifact directory against concurrent CLI runs."""

    def __init__(self, directory: Path):
        self.path = directory / ".lock"
        self.fd: int | None = None

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"another run holds {self.path}; remove the file if that run crashed"
            ) from None
        return self

    def __exit__(self, *exc_info) -> None:
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# Data and pipeline helpers.
# ---------------------------------------------------------------------------


def _load_records(config: dict) -> list[flow_data.FlowRecord]:
    data = config["data"]
    if "synth" in data:
        spec = synth_traffic.default_spec(
            n_per_attack=int(data["synth"]["n_per_attack"]),
            jitter=float(data["synth"]["jitter"]),
            seed=int(config["seed"]),
        )
        records, _ = synth_traffic.generate_dataset(spec)
        return records
    dataset = data["dataset"]
    records, _ = flow_data.load_dataset(
        dataset["path"], label_column=dataset.get("label_column", "label")
    )
    return records


def _forest_params(config: dict) -> forest_rank.ForestParams:
    f = config["forest"]
    return forest_rank.ForestParams(
        num_trees=int(f["num_trees"]),
        max_depth=int(f["max_depth"]),
        min_samples_leaf=int(f["min_samples_leaf"]),
        bootstrap=bool(f["bootstrap"]),
    )


def _attacks_present(records) -> list[flow_data.AttackLabel]:
    present = {r.label for r in records if r.label in flow_data.ATTACK_LABELS}
    return [a for a in flow_data.ATTACK_LABELS if a in present]


def _rank_all(config: dict, records) -> dict[flow_data.AttackLabel, forest_rank.ImportanceReport]:
    params = _forest_params(config)
    reports = {}
    for attack in _attacks_present(records):
        reports[attack] = forest_rank.rank_features_for_attack(
            records, attack, params=params, seed=int(config["seed"])
        )
    if not reports:
        raise RuntimeError("no attack-labeled records to rank")
    return reports


def _build_profiles(config: dict, records) -> list[profile_mod.AttackProfile]:
    reports = _rank_all(config, records)
    return [
        profile_mod.build_attack_profile(records, attack, report, k=int(config["k"]))
        for attack, report in reports.items()
    ]


def _resolve_profiles(config: dict, records=None) -> list[profile_mod.AttackProfile]:
    profiles_path = config.get("profiles_path")
    if profiles_path:
        return profile_mod.profiles_from_json(
            Path(profiles_path).read_text(encoding="utf-8")
        )
    if config["kb"]["source"] == "canonical":
        return list(canonical.REFERENCE_PROFILES.values())
    if records is None:
        records = _load_records(config)
    return _build_profiles(config, records)


def _text_kb_for(config: dict, kb_config: evaluation.KbConfig, profiles):
    if kb_config is evaluation.KbConfig.NO_KB:
        return None
    variant = (
        kb_builder.KbVariant.LONG
        if kb_config is evaluation.KbConfig.LONG_KB
        else kb_builder.KbVariant.SHORT
    )
    if config["kb"]["source"] == "canonical":
        return kb_builder.canonical_kb(variant)
    if variant is kb_builder.KbVariant.LONG:
        return kb_builder.render_long_kb(profiles)
    return kb_builder.render_short_kb(kb_builder.derive_key_features(profiles))


def _make_backend(config: dict, kb_config: evaluation.KbConfig, profiles):
    kind = config["backend"]["kind"]
    if kind == "rule-oracle":
        oracle_cfg = detectors.RuleOracleConfig(
            min_score=float(config["backend"]["rule_oracle"]["min_score"]),
            mandatory_strict=bool(config["backend"]["rule_oracle"]["mandatory_strict"]),
        )
        return detectors.RuleOracleDetector(kb_builder.structured_kb(profiles), oracle_cfg), None
    if kind == "llm":
        llm = config["backend"]["llm"]
        llm_cfg = detectors.LlmEndpointConfig(
            base_url=llm["base_url"],
            model_name=llm["model_name"],
            request_timeout_s=float(llm["request_timeout_s"]),
            max_retries=int(llm["max_retries"]),
            temperature=float(llm["temperature"]),
            api=llm.get("api", "generate"),
            max_in_flight=int(llm.get("max_in_flight", 4)),
        )
        mode = (
            prompting.DescribeMode.NUMERIC
            if config["eval"]["mode"] == "numeric"
            else prompting.DescribeMode.QUALITATIVE
        )
        return detectors.LlmDetector(llm_cfg, mode=mode), _text_kb_for(config, kb_config, profiles)
    store_dir = Path(config["backend"]["replay"]["store_dir"])
    store_path = store_dir / f"{kb_config.value}.jsonl"
    if not store_path.exists():
        raise RuntimeError(f"replay store not found: {store_path}")
    return detectors.ReplayDetector(detectors.ReplayStore.load(store_path)), None


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def cmd_rank(config: dict, args: argparse.Namespace) -> Path:
    records = _load_records(config)
    reports = _rank_all(config, records)
    out = artifact_dir(config) / "rank"
    for attack, report in reports.items():
        stem = attack.render()
        forest_rank.write_report(report, out / f"importance_{stem}.json", out / f"importance_{stem}.csv")
    return out


def cmd_profile(config: dict, args: argparse.Namespace) -> Path:
    records = _load_records(config)
    profiles = _build_profiles(config, records)
    out = artifact_dir(config) / "profile"
    profile_mod.write_profiles(profiles, out / "profiles.json")
    return out


def cmd_kb_build(config: dict, args: argparse.Namespace) -> Path:
    variant = config["kb"]["variant"]
    out = artifact_dir(config) / "kb"
    profiles = _resolve_profiles(config)

    wants_long = variant in ("long", "both")
    wants_short = variant in ("short", "both")
    if config["kb"]["source"] == "canonical":
        if wants_long:
            kb_builder.write_kb(kb_builder.canonical_kb(kb_builder.KbVariant.LONG), out)
        if wants_short:
            kb_builder.write_kb(kb_builder.canonical_kb(kb_builder.KbVariant.SHORT), out)
    else:
        if wants_long:
            kb_builder.write_kb(kb_builder.render_long_kb(profiles), out)
        if wants_short:
            keys = kb_builder.derive_key_features(profiles)
            kb_builder.write_kb(kb_builder.render_short_kb(keys), out)
    structured = kb_builder.structured_kb(profiles)
    (out / "structured.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "structured.json").write_text(
        kb_builder.structured_kb_to_json(structured), encoding="utf-8"
    )
    return out


def cmd_synth(config: dict, args: argparse.Namespace) -> Path:
    data = config["data"]
    if "synth" not in data:
        raise ConfigError("synth subcommand needs a data.synth source")
    if config.get("profiles_path"):
        spec = synth_traffic.SynthSpec(
            profiles=tuple(_resolve_profiles(config)),
            n_per_attack=int(data["synth"]["n_per_attack"]),
            jitter=float(data["synth"]["jitter"]),
            seed=int(config["seed"]),
        )
    else:
        spec = synth_traffic.default_spec(
            n_per_attack=int(data["synth"]["n_per_attack"]),
            jitter=float(data["synth"]["jitter"]),
            seed=int(config["seed"]),
        )
    records, summary = synth_traffic.generate_dataset(spec)
    out = artifact_dir(config) / "synth"
    flow_data.write_dataset(records, out / "synth.csv")
    (out / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    return out


def cmd_detect(config: dict, args: argparse.Namespace) -> Path:
    if args.record:
        given = {k: float(v) for k, v in json.loads(args.record).items()}
        unknown = set(given) - set(flow_data.FEATURES)
        if unknown:
            raise ConfigError(f"unknown features in --record: {sorted(unknown)}")
        features = {name: given.get(name, 0.0) for name in flow_data.FEATURES}
        records = [flow_data.FlowRecord(features=features)]
    elif args.input:
        records, _ = flow_data.load_dataset(args.input, require_labels=False)
    else:
        records = _load_records(config)
    profiles = _resolve_profiles(config)
    kb_config = {
        "none": evaluation.KbConfig.NO_KB,
        "long": evaluation.KbConfig.LONG_KB,
        "short": evaluation.KbConfig.SHORT_KB,
        "both": evaluation.KbConfig.LONG_KB,
    }[config["kb"]["variant"]]
    backend, kb = _make_backend(config, kb_config, profiles)

    out = artifact_dir(config) / "detect"
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for record in records:
        result = backend.classify(record, kb)
        row = {
            "digest": prompting.record_digest(record),
            "true": record.label.render() if record.label else None,
            "predicted": result.predicted.render(),
            "latency_ms": round(result.latency_ms, 3),
            "backend_id": result.backend_id,
        }
        lines.append(json.dumps(row))
        print(json.dumps(row))
    (out / "results.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def cmd_eval(config: dict, args: argparse.Namespace) -> Path:
    records = _load_records(config)
    sample = flow_data.stratified_sample(
        records, n_per_class=int(config["eval"]["n_per_class"]), seed=int(config["seed"])
    )
    profiles = _resolve_profiles(config, records)
    grid = evaluation.EvaluationGrid()
    out = artifact_dir(config) / "eval"
    confusion_dir = out / "confusion"
    confusion_dir.mkdir(parents=True, exist_ok=True)

    for name in config["eval"]["kb_configs"]:
        kb_config = evaluation.KbConfig(name)
        backend, kb = _make_backend(config, kb_config, profiles)
        cm = evaluation.evaluate(
            backend,
            sample,
            kb,
            strict=not bool(config["eval"]["best_effort"]),
            workers=int(config["eval"].get("workers", 1)),
        )
        (confusion_dir / f"{backend.backend_id.replace(':', '_')}_{kb_config.value}.json").write_text(
            json.dumps(cm.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        per_class = evaluation.per_class_accuracy(cm)
        totals = {}
        for (true, _), n in cm.counts.items():
            totals[true] = totals.get(true, 0) + n
        for attack, acc in per_class.items():
            grid.set(attack, kb_config, backend.backend_id, evaluation.Cell(acc, totals[attack]))

    evaluation.write_grid_artifacts(grid, out)
    text, _, _ = evaluation.render_table(grid)
    print(text, end="")
    return out


def cmd_select(config: dict, args: argparse.Namespace) -> Path:
    if args.grid:
        grid = evaluation.EvaluationGrid.from_json(Path(args.grid).read_text(encoding="utf-8"))
    elif args.reference:
        grid = evaluation.grid_from_reference(canonical.REFERENCE_ACCURACY)
    else:
        default = artifact_dir(config) / "eval" / "grid.json"
        if not default.exists():
            raise ConfigError(f"no grid found at {default}; pass --grid or --reference")
        grid = evaluation.EvaluationGrid.from_json(default.read_text(encoding="utf-8"))

    out = artifact_dir(config) / "select"
    out.mkdir(parents=True, exist_ok=True)
    payload = {}
    for backend_id in grid.backends():
        best = evaluation.select_best_kb(grid, backend_id)
        payload[backend_id] = {
            attack.render(): cfg.value for attack, cfg in sorted(
                best.items(), key=lambda kv: kv[0].render()
            )
        }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    (out / "best_kb.json").write_text(text, encoding="utf-8")
    print(text, end="")
    return out


# ---------------------------------------------------------------------------
# Argument parsing and entry point.
# ---------------------------------------------------------------------------


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON run configuration")
    parser.add_argument("--seed", type=int, help="seed for all pseudo-random choices")
    parser.add_argument("--out", help="artifact output directory")
    parser.add_argument(
        "--backend", choices=["rule-oracle", "llm", "replay"], help="detector backend"
    )
    parser.add_argument("--kb", choices=["none", "long", "short", "both"], help="KB variant")
    parser.add_argument(
        "--kb-source", dest="kb_source", choices=["canonical", "generated"], help="KB source"
    )
    parser.add_argument("--n-per-class", dest="n_per_class", type=int, help="eval sample size per class")
    parser.add_argument("--base-url", dest="base_url", help="LLM endpoint base URL")
    parser.add_argument("--model", help="LLM model name")
    parser.add_argument("--synth", action="store_true", help="use the synthetic data source")
    parser.add_argument("--dataset", help="use a CSV dataset as the data source")
    parser.add_argument("--n-per-attack", dest="n_per_attack", type=int, help="synthetic flows per attack")
    parser.add_argument("--jitter", type=float, help="synthetic jitter in [0, 1]")
    parser.add_argument("--profiles", help="attack-profiles JSON to drive synth/kb instead of the bundled table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbforge",
        description="Rank flow features, build knowledge bases, and classify DDoS flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("rank", "rank features per attack with the forest regressor"),
        ("profile", "compute per-attack feature profiles from ranked features"),
        ("synth", "generate a synthetic labeled flow CSV"),
        ("eval", "run the detector grid across KB configurations"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)

    kb = sub.add_parser("kb", help="knowledge-base commands")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    build = kb_sub.add_parser("build", help="write long/short KB files")
    _add_common_flags(build)
    source = build.add_mutually_exclusive_group()
    source.add_argument("--canonical", action="store_true", help="use the bundled KB texts")
    source.add_argument("--generated", action="store_true", help="render KBs from the data")
    build.add_argument("--variant", choices=["long", "short", "both"], help="KB variant to build")

    detect = sub.add_parser("detect", help="classify one record or a CSV of records")
    _add_common_flags(detect)
    detect.add_argument("--input", help="CSV file of flows to classify")
    detect.add_argument(
        "--record",
        help="inline JSON object of feature values; unlisted registry features default to 0",
    )

    select = sub.add_parser("select", help="pick the best KB configuration per attack")
    _add_common_flags(select)
    select.add_argument("--grid", help="path to a grid.json produced by eval")
    select.add_argument(
        "--reference", action="store_true", help="use the bundled reference accuracy grid"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "kb":
            if getattr(args, "variant", None):
                args.kb = args.variant
            if getattr(args, "canonical", False):
                args.kb_source = "canonical"
            if getattr(args, "generated", False):
                args.kb_source = "generated"
        config = build_config(args)
    except ConfigError as exc:
        print(json.dumps({"error": {"kind": "config", "message": str(exc)}}), file=sys.stderr)
        return 2

    handlers = {
        "rank": cmd_rank,
        "profile": cmd_profile,
        "synth": cmd_synth,
        "detect": cmd_detect,
        "eval": cmd_eval,
        "select": cmd_select,
        "kb": cmd_kb_build,
    }
    try:
        directory = artifact_dir(config)
        with RunLock(directory):
            out = handlers[args.command](config, args)
        print(f"artifacts: {out}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(json.dumps({"error": {"kind": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report and exit nonzero
        print(
            json.dumps({"error": {"kind": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
