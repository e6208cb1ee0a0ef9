from __future__ import annotations

import pytest

from kbforge.canonical import REFERENCE_PROFILES
from kbforge.detectors import rule_oracle_classify
from kbforge.flow_data import FEATURES, AttackLabel
from kbforge.kb_builder import structured_kb
from kbforge.synth_traffic import (
    BackgroundBand,
    SynthSpec,
    default_spec,
    generate_dataset,
    generate_flow,
)


class TestBackgroundBand:
    def test_validation(self):
        with pytest.raises(ValueError):
            BackgroundBand(5.0, 1.0)
        with pytest.raises(ValueError):
            BackgroundBand(0.0, 1.0, lo_mass=0.7, hi_mass=0.7)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            default_spec(n_per_attack=0)
        with pytest.raises(ValueError):
            default_spec(jitter=1.5)

    def test_background_must_cover_registry(self):
        with pytest.raises(ValueError, match="background"):
            SynthSpec(
                profiles=tuple(REFERENCE_PROFILES.values()),
                background={"Min": BackgroundBand(0.0, 1.0)},
            )


class TestGenerateFlow:
    def test_jitter_zero_is_median_exact(self):
        spec = default_spec(jitter=0.0, seed=1)
        flow = generate_flow(spec, AttackLabel.ICMP_FLOOD, 0)
        assert flow.features["Protocol Type"] == 1.0
        assert flow.features["ICMP"] == 1.0
        assert flow.features["Min"] == 42.0
        assert flow.label is AttackLabel.ICMP_FLOOD

    def test_full_jitter_stays_inside_bounds(self):
        spec = default_spec(jitter=1.0, seed=2)
        profile = REFERENCE_PROFILES[AttackLabel.UDP_FLOOD]
        for index in range(200):
            flow = generate_flow(spec, AttackLabel.UDP_FLOOD, index)
            for fp in profile.ranked_features:
                assert fp.min <= flow.features[fp.feature] <= fp.max

    def test_deterministic_in_seed_attack_index(self):
        spec = default_spec(jitter=0.4, seed=9)
        a = generate_flow(spec, AttackLabel.TCP_FLOOD, 17)
        b = generate_flow(spec, AttackLabel.TCP_FLOOD, 17)
        assert a == b
        c = generate_flow(spec, AttackLabel.TCP_FLOOD, 18)
        assert a != c

    def test_unprofiled_attack_rejected(self):
        spec = default_spec()
        with pytest.raises(ValueError, match="no profile"):
            generate_flow(spec, AttackLabel.SYN_FLOOD, 0)

    def test_background_respects_bands(self):
        spec = default_spec(jitter=0.3, seed=5)
        band = spec.background["Header Length"]
        for index in range(100):
            flow = generate_flow(spec, AttackLabel.ICMP_FLOOD, index)
            assert band.lo <= flow.features["Header Length"] <= band.hi

    def test_all_values_finite(self):
        spec = default_spec(jitter=1.0, seed=3)
        flow = generate_flow(spec, AttackLabel.PSHACK_FLOOD, 0)
        assert all(name in flow.features for name in FEATURES)


class TestGenerateDataset:
    def test_counts(self):
        records, summary = generate_dataset(default_spec(n_per_attack=200, seed=4))
        assert summary.record_count == 800
        assert all(count == 200 for count in summary.per_label_counts.values())
        assert len(records) == 800

    def test_single_median_exact_record_per_attack(self):
        records, _ = generate_dataset(default_spec(n_per_attack=1, jitter=0.0, seed=0))
        assert len(records) == 4
        by_label = {r.label: r for r in records}
        assert by_label[AttackLabel.UDP_FLOOD].features["Rate"] == 7480.80

    def test_pure_function_of_spec(self):
        spec = default_spec(n_per_attack=25, jitter=0.6, seed=11)
        first, _ = generate_dataset(spec)
        second, _ = generate_dataset(spec)
        assert first == second

    def test_jitter_zero_oracle_round_trip(self):
        records, _ = generate_dataset(default_spec(n_per_attack=50, jitter=0.0, seed=6))
        kb = structured_kb(tuple(REFERENCE_PROFILES.values()))
        for record in records:
            assert rule_oracle_classify(record, kb) is record.label

    def test_csv_round_trip_matches_ingest_schema(self, tmp_path):
        from kbforge.flow_data import load_dataset, write_dataset

        records, _ = generate_dataset(default_spec(n_per_attack=10, jitter=0.5, seed=8))
        path = tmp_path / "synth.csv"
        write_dataset(records, path)
        loaded, summary = load_dataset(path)
        assert summary.record_count == 40
        assert loaded == records
