from __future__ import annotations

import json
from pathlib import Path

import pytest

from kbforge.cli import build_parser, main

GOLDEN_DIR = Path(__file__).parent / "goldens"


def run_cli(*argv: str) -> int:
    return main(list(argv))


def artifact_root(out_dir: Path) -> Path:
    runs = [p for p in out_dir.iterdir() if p.name.startswith("run-")]
    assert len(runs) == 1, f"expected one run dir, found {runs}"
    return runs[0]


def read_tree(root: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


class TestHelp:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        for name in ("rank", "profile", "kb", "synth", "detect", "eval", "select"):
            assert name in text

    def test_help_lists_documented_flags(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["eval", "--help"])
        text = capsys.readouterr().out
        for flag in ("--config", "--seed", "--out", "--backend", "--kb", "--kb-source",
                     "--n-per-class", "--base-url", "--model"):
            assert flag in text


class TestKbBuild:
    def test_canonical_long_matches_goldens(self, tmp_path):
        assert run_cli("kb", "build", "--canonical", "--variant", "long",
                       "--out", str(tmp_path)) == 0
        kb_dir = artifact_root(tmp_path) / "kb" / "long"
        for golden in (GOLDEN_DIR / "long").glob("*.txt"):
            assert (kb_dir / golden.name).read_bytes() == golden.read_bytes()

    def test_canonical_short_matches_golden(self, tmp_path):
        assert run_cli("kb", "build", "--canonical", "--variant", "short",
                       "--out", str(tmp_path)) == 0
        combined = artifact_root(tmp_path) / "kb" / "short" / "combined.txt"
        assert combined.read_bytes() == (GOLDEN_DIR / "short" / "combined.txt").read_bytes()

    def test_generated_build_runs(self, tmp_path):
        assert run_cli("kb", "build", "--generated", "--variant", "both", "--out", str(tmp_path),
                       "--n-per-attack", "60", "--seed", "3") == 0
        kb_dir = artifact_root(tmp_path) / "kb"
        assert (kb_dir / "long" / "DDoS-ICMP_Flood.txt").exists()
        assert (kb_dir / "short" / "combined.txt").exists()
        assert (kb_dir / "structured.json").exists()


class TestValidation:
    def test_missing_dataset_path_exit_2_no_artifacts(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("rank", "--dataset", str(tmp_path / "missing.csv"), "--out", str(out))
        assert code == 2
        report = json.loads(capsys.readouterr().err.strip().splitlines()[0])
        assert report["error"]["kind"] == "config"
        assert not out.exists()

    def test_bad_config_json_exit_2(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text("{not json", encoding="utf-8")
        assert run_cli("synth", "--config", str(config), "--out", str(tmp_path / "o")) == 2

    def test_unknown_backend_in_config_exit_2(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"backend": {"kind": "oracle9000"}}), encoding="utf-8")
        assert run_cli("synth", "--config", str(config), "--out", str(tmp_path / "o")) == 2


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ("rank",),
            ("profile",),
            ("kb", "build", "--generated", "--variant", "both"),
            ("synth",),
            ("eval", "--backend", "rule-oracle", "--n-per-class", "40"),
        ],
        ids=["rank", "profile", "kb-generated", "synth", "eval-rule-oracle"],
    )
    def test_two_runs_byte_identical(self, tmp_path, argv):
        common = ("--synth", "--n-per-attack", "60", "--seed", "11", "--jitter", "0.3")
        first_out = tmp_path / "a"
        second_out = tmp_path / "b"
        assert run_cli(*argv, *common, "--out", str(first_out)) == 0
        assert run_cli(*argv, *common, "--out", str(second_out)) == 0
        first = read_tree(artifact_root(first_out))
        second = read_tree(artifact_root(second_out))
        assert first.keys() == second.keys()
        assert first == second

    def test_rerun_same_out_dir_overwrites_identically(self, tmp_path):
        argv = ("synth", "--synth", "--n-per-attack", "25", "--seed", "4",
                "--out", str(tmp_path))
        assert run_cli(*argv) == 0
        before = read_tree(artifact_root(tmp_path))
        assert run_cli(*argv) == 0
        after = read_tree(artifact_root(tmp_path))
        assert before == after


class TestPipelines:
    def test_synth_round_trips_through_rank(self, tmp_path):
        assert run_cli("synth", "--n-per-attack", "50", "--seed", "2",
                       "--out", str(tmp_path / "s")) == 0
        csv_path = artifact_root(tmp_path / "s") / "synth" / "synth.csv"
        assert run_cli("rank", "--dataset", str(csv_path), "--out", str(tmp_path / "r"),
                       "--seed", "2") == 0
        rank_dir = artifact_root(tmp_path / "r") / "rank"
        reports = list(rank_dir.glob("importance_*.json"))
        assert len(reports) == 4

    def test_eval_rule_oracle_jitter_zero_all_cells_100(self, tmp_path, capsys):
        assert run_cli("eval", "--backend", "rule-oracle", "--synth",
                       "--n-per-attack", "30", "--jitter", "0.0",
                       "--n-per-class", "25", "--seed", "6", "--out", str(tmp_path)) == 0
        grid_json = json.loads(
            (artifact_root(tmp_path) / "eval" / "grid.json").read_text(encoding="utf-8")
        )
        assert grid_json["cells"], "grid should be populated"
        assert all(cell["accuracy"] == 1.0 for cell in grid_json["cells"])
        assert all(cell["n"] == 25 for cell in grid_json["cells"])

    def test_select_from_reference_grid(self, tmp_path, capsys):
        assert run_cli("select", "--reference", "--out", str(tmp_path)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["gemma2:9b"]["DDoS-UDP_Flood"] == "long_kb"
        assert payload["llama3.2:3b"]["DDoS-UDP_Flood"] == "short_kb"
        assert (artifact_root(tmp_path) / "select" / "best_kb.json").exists()

    def test_select_from_eval_grid_file(self, tmp_path):
        assert run_cli("eval", "--backend", "rule-oracle", "--synth", "--n-per-attack", "20",
                       "--jitter", "0.0", "--n-per-class", "15", "--seed", "1",
                       "--out", str(tmp_path)) == 0
        grid_path = artifact_root(tmp_path) / "eval" / "grid.json"
        assert run_cli("select", "--grid", str(grid_path), "--out", str(tmp_path / "sel")) == 0

    def test_profiles_json_feeds_synth_and_kb(self, tmp_path):
        assert run_cli("profile", "--synth", "--n-per-attack", "60", "--seed", "5",
                       "--out", str(tmp_path / "p")) == 0
        profiles = artifact_root(tmp_path / "p") / "profile" / "profiles.json"
        assert run_cli("synth", "--profiles", str(profiles), "--n-per-attack", "20",
                       "--seed", "5", "--out", str(tmp_path / "s")) == 0
        assert (artifact_root(tmp_path / "s") / "synth" / "synth.csv").exists()
        assert run_cli("kb", "build", "--generated", "--variant", "long",
                       "--profiles", str(profiles), "--out", str(tmp_path / "k")) == 0
        assert (artifact_root(tmp_path / "k") / "kb" / "long" / "combined.txt").exists()

    def test_detect_single_record(self, tmp_path, capsys):
        record = {"Protocol Type": 1.0, "ICMP": 1.0, "Min": 42.0, "Magnitude": 9.17,
                  "AVG": 42.0, "Tot sum": 441.0, "Max": 42.0, "Tot size": 42.0,
                  "IAT": 8.3e7}
        code = run_cli("detect", "--record", json.dumps(record), "--backend", "rule-oracle",
                       "--out", str(tmp_path))
        assert code == 0
        line = json.loads(capsys.readouterr().out.strip().splitlines()[0])
        assert line["predicted"] == "DDoS-ICMP_Flood"
        assert line["backend_id"] == "rule-oracle"

    def test_detect_rejects_unknown_feature(self, tmp_path):
        code = run_cli("detect", "--record", json.dumps({"nonsense": 1.0}),
                       "--backend", "rule-oracle", "--out", str(tmp_path))
        assert code == 2


class TestEnvAndLock:
    def test_env_override_applies(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KBFORGE_SEED", "99")
        monkeypatch.setenv("KBFORGE_OUT", str(tmp_path / "enved"))
        assert run_cli("synth", "--n-per-attack", "10") == 0
        assert (tmp_path / "enved").exists()

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KBFORGE_OUT", str(tmp_path / "enved"))
        assert run_cli("synth", "--n-per-attack", "10", "--out", str(tmp_path / "flagged")) == 0
        assert (tmp_path / "flagged").exists()
        assert not (tmp_path / "enved").exists()

    def test_lockfile_blocks_concurrent_run(self, tmp_path):
        import copy

        from kbforge.cli import DEFAULT_CONFIG, artifact_dir

        config = copy.deepcopy(DEFAULT_CONFIG)
        config["out"] = str(tmp_path)
        config["data"]["synth"]["n_per_attack"] = 10
        directory = artifact_dir(config)
        directory.mkdir(parents=True)
        (directory / ".lock").touch()
        code = run_cli("synth", "--n-per-attack", "10", "--out", str(tmp_path))
        assert code == 1
        (directory / ".lock").unlink()
        assert run_cli("synth", "--n-per-attack", "10", "--out", str(tmp_path)) == 0
