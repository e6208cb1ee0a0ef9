from __future__ import annotations

import numpy as np
import pytest

from kbforge.canonical import REFERENCE_ACCURACY, REFERENCE_PROFILES
from kbforge.detectors import RuleOracleDetector, TransportError
from kbforge.evaluation import (
    Cell,
    ConfusionMatrix,
    EvaluationError,
    EvaluationGrid,
    KbConfig,
    accuracy,
    evaluate,
    grid_from_reference,
    per_class_accuracy,
    render_table,
    select_best_kb,
)
from kbforge.flow_data import ATTACK_LABELS, AttackLabel
from kbforge.kb_builder import structured_kb
from kbforge.synth_traffic import default_spec, generate_dataset

from conftest import make_record

ICMP = AttackLabel.ICMP_FLOOD
UDP = AttackLabel.UDP_FLOOD
TCP = AttackLabel.TCP_FLOOD
PSHACK = AttackLabel.PSHACK_FLOOD


def cm_of(*pairs):
    cm = ConfusionMatrix()
    for true, predicted in pairs:
        cm.add(true, predicted)
    return cm


class TestAccuracy:
    def test_hand_counted_two_thirds(self):
        cm = cm_of((ICMP, ICMP), (ICMP, UDP), (ICMP, ICMP))
        assert accuracy(cm) == pytest.approx(2 / 3)

    def test_all_correct(self):
        cm = cm_of((ICMP, ICMP), (UDP, UDP))
        assert accuracy(cm) == 1.0

    def test_fraction_formats_as_table_percentage(self):
        grid = EvaluationGrid()
        grid.set(ICMP, KbConfig.NO_KB, "m", Cell(0.978, 500))
        text, _, _ = render_table(grid)
        assert "97.80%" in text

    def test_empty_matrix_rejected(self):
        with pytest.raises(EvaluationError):
            accuracy(ConfusionMatrix())

    def test_accuracy_one_iff_diagonal(self):
        diag = cm_of((ICMP, ICMP), (UDP, UDP))
        off = cm_of((ICMP, ICMP), (UDP, ICMP))
        assert accuracy(diag) == 1.0
        assert accuracy(off) < 1.0


class TestPerClassAccuracy:
    def test_diagonal_only(self):
        cm = cm_of((ICMP, ICMP), (UDP, UDP), (UDP, UDP))
        assert per_class_accuracy(cm) == {ICMP: 1.0, UDP: 1.0}

    def test_partial(self):
        pairs = [(ICMP, ICMP)] * 489 + [(ICMP, UDP)] * 11
        cm = cm_of(*pairs)
        assert per_class_accuracy(cm)[ICMP] == pytest.approx(0.978)

    def test_absent_class_omitted(self):
        cm = cm_of((ICMP, ICMP))
        assert TCP not in per_class_accuracy(cm)

    def test_overall_is_weighted_mean_of_per_class(self):
        rng = np.random.Generator(np.random.PCG64(0))
        labels = [*ATTACK_LABELS, AttackLabel.NORMAL, AttackLabel.UNKNOWN]
        for _ in range(100):
            cm = ConfusionMatrix()
            for true in labels:
                for predicted in labels:
                    cm.add(true, predicted, int(rng.integers(0, 40)))
            per_class = per_class_accuracy(cm)
            weights = {}
            for (true, _), n in cm.counts.items():
                weights[true] = weights.get(true, 0) + n
            weighted = sum(per_class[c] * weights[c] for c in per_class) / cm.total
            assert abs(accuracy(cm) - weighted) < 1e-12


class TestEvaluate:
    def test_rule_oracle_on_jitter_zero_is_diagonal(self):
        records, _ = generate_dataset(default_spec(n_per_attack=30, jitter=0.0, seed=2))
        backend = RuleOracleDetector(structured_kb(tuple(REFERENCE_PROFILES.values())))
        cm = evaluate(backend, records)
        assert accuracy(cm) == 1.0
        assert all(true is predicted for (true, predicted) in cm.counts)

    def test_all_normal_responses_zero_diagonal(self):
        class AlwaysNormal:
            backend_id = "stub"

            def classify(self, record, kb=None):
                from kbforge.detectors import DetectionResult

                return DetectionResult(AttackLabel.NORMAL, None, 0.0, "stub")

        records, _ = generate_dataset(default_spec(n_per_attack=5, jitter=0.0, seed=1))
        cm = evaluate(AlwaysNormal(), records)
        assert accuracy(cm) == 0.0

    def test_empty_record_list(self):
        backend = RuleOracleDetector(structured_kb(tuple(REFERENCE_PROFILES.values())))
        cm = evaluate(backend, [])
        assert cm.total == 0

    def test_unlabeled_record_rejected(self):
        backend = RuleOracleDetector(structured_kb(tuple(REFERENCE_PROFILES.values())))
        with pytest.raises(EvaluationError):
            evaluate(backend, [make_record(None)])

    def test_strict_aborts_on_transport_error_best_effort_counts(self):
        class Flaky:
            backend_id = "flaky"

            def __init__(self):
                self.calls = 0

            def classify(self, record, kb=None):
                from kbforge.detectors import DetectionResult, EndpointTimeout

                self.calls += 1
                if self.calls == 1:
                    raise EndpointTimeout("slow")
                return DetectionResult(record.label, None, 0.0, "flaky")

        records, _ = generate_dataset(default_spec(n_per_attack=2, jitter=0.0, seed=3))
        with pytest.raises(TransportError):
            evaluate(Flaky(), records, strict=True)
        cm = evaluate(Flaky(), records, strict=False)
        assert cm.error_count == 1
        assert cm.total == len(records) - 1

    def test_worker_count_does_not_change_counts(self):
        records, _ = generate_dataset(default_spec(n_per_attack=20, jitter=0.3, seed=4))
        backend = RuleOracleDetector(structured_kb(tuple(REFERENCE_PROFILES.values())))
        sequential = evaluate(backend, records, workers=1)
        threaded = evaluate(backend, records, workers=4)
        assert sequential.counts == threaded.counts


class TestGrid:
    def test_json_round_trip_lossless(self):
        grid = grid_from_reference(REFERENCE_ACCURACY)
        again = EvaluationGrid.from_json(grid.to_json())
        assert again.cells == grid.cells
        assert EvaluationGrid.from_json(again.to_json()).to_json() == grid.to_json()

    def test_render_layout(self):
        grid = grid_from_reference({"m": REFERENCE_ACCURACY["llama3.1:8b"]})
        text, csv_text, json_text = render_table(grid)
        lines = text.strip().split("\n")
        assert len(lines) == 2 + 4  # header, divider, four attack rows
        assert lines[0].startswith("Attack Type")
        assert "100.00%" in text
        assert csv_text.splitlines()[0] == "attack,kb_config,backend_id,accuracy,n"

    def test_empty_grid_rejected(self):
        with pytest.raises(EvaluationError):
            render_table(EvaluationGrid())
        with pytest.raises(EvaluationError):
            select_best_kb(EvaluationGrid(), "m")


class TestSelectBestKb:
    def test_reference_rows(self):
        grid = grid_from_reference(REFERENCE_ACCURACY)
        gemma = select_best_kb(grid, "gemma2:9b")
        assert gemma[UDP] is KbConfig.LONG_KB
        llama_small = select_best_kb(grid, "llama3.2:3b")
        assert llama_small[UDP] is KbConfig.SHORT_KB

    def test_tie_prefers_short_then_long(self):
        grid = EvaluationGrid()
        for config in KbConfig:
            grid.set(ICMP, config, "m", Cell(0.5, 10))
        assert select_best_kb(grid, "m")[ICMP] is KbConfig.SHORT_KB
        grid2 = EvaluationGrid()
        grid2.set(ICMP, KbConfig.NO_KB, "m", Cell(0.5, 10))
        grid2.set(ICMP, KbConfig.LONG_KB, "m", Cell(0.5, 10))
        assert select_best_kb(grid2, "m")[ICMP] is KbConfig.LONG_KB

    def test_argmax_invariant_under_positive_scaling(self):
        grid = grid_from_reference(REFERENCE_ACCURACY)
        scaled = EvaluationGrid()
        for (attack, config, backend), cell in grid.cells.items():
            scaled.set(attack, config, backend, Cell(cell.accuracy * 0.5, cell.n))
        for backend in grid.backends():
            assert select_best_kb(grid, backend) == select_best_kb(scaled, backend)
