import csv
import io

import pytest
from hypothesis import given, settings, strategies as st

from signilp import bench, factext, signscene, task
from signilp.bench import (EvalItem, ExperimentConfig, InsufficientData, MalformedCSV, curve_csv, learning_curve,
                           plot, predictions_csv, recount, robustness_csv, robustness_eval, split, summarize)


def small_config(**kw):
    base = dict(engines=["mil", "mdie"], train_sizes=[1, 2], repeats=4, seed=0)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def curve(base_task):
    bk, pos, neg, _ = base_task
    return learning_curve(small_config(), bk, task.examples_for(pos, neg))


class TestSplit:
    def test_counts_and_disjointness(self):
        pos = [f"p{i}" for i in range(10)]
        neg = [f"n{i}" for i in range(10)]
        tp, tn, test = split(pos, neg, 3, 1)
        assert len(tp) == len(tn) == 3
        assert not (set(tp) | set(tn)) & {i for i, _ in test}
        assert len(test) == 14

    def test_larger_sizes_extend_smaller_ones(self):
        pos = [f"p{i}" for i in range(10)]
        neg = [f"n{i}" for i in range(10)]
        a = split(pos, neg, 2, 9)
        b = split(pos, neg, 4, 9)
        assert b[0][:2] == a[0] and b[1][:2] == a[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8), st.integers(9, 15), st.integers(9, 15))
def test_sampling_correctness(seed, n, npos, nneg):
    pos = [f"p{i}" for i in range(npos)]
    neg = [f"n{i}" for i in range(nneg)]
    tp, tn, test = split(pos, neg, n, seed)
    assert len(set(tp)) == n and set(tp) <= set(pos)
    assert len(set(tn)) == n and set(tn) <= set(neg)
    test_ids = [i for i, _ in test]
    assert not set(test_ids) & (set(tp) | set(tn))
    assert len(test_ids) == npos + nneg - 2 * n


class TestCurve:
    def test_results_sorted_and_complete(self, curve):
        keys = [(r.engine, r.train_size, r.repeat_index) for r in curve]
        assert keys == sorted(keys) and len(keys) == 2 * 2 * 4

    def test_mil_is_perfect_from_one_example(self, curve):
        assert all(r.accuracy == 1.0 for r in curve if r.engine == "mil")

    def test_accuracy_matches_prediction_recount(self, curve):
        again = recount(predictions_csv(curve))
        for r in curve:
            assert again[(r.engine, r.train_size, r.repeat_index)] == pytest.approx(r.accuracy)

    def test_csv_layout(self, curve):
        rows = list(csv.reader(io.StringIO(curve_csv(curve))))
        assert rows[0] == bench.CURVE_COLUMNS
        assert ["baseline", "1", "mean", "0.500000", "", "", ""] in rows
        means = [r for r in rows if r[2] == "mean" and r[0] == "mil"]
        assert [r[3] for r in means] == ["1.000000", "1.000000"]
        assert all(r[4] == "0.000000" for r in rows[1:17])

    def test_reproducible_bytes(self, base_task, curve):
        bk, pos, neg, _ = base_task
        again = learning_curve(small_config(), bk, task.examples_for(pos, neg))
        assert curve_csv(again) == curve_csv(curve)

    def test_parallel_matches_serial(self, base_task, curve):
        bk, pos, neg, _ = base_task
        par = learning_curve(small_config(workers=2), bk, task.examples_for(pos, neg))
        assert curve_csv(par) == curve_csv(curve)

    def test_insufficient_data(self, base_task):
        bk, pos, neg, _ = base_task
        with pytest.raises(InsufficientData):
            learning_curve(small_config(train_sizes=[20]), bk, task.examples_for(pos, neg))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(repeats=0)
        with pytest.raises(ValueError):
            ExperimentConfig(train_sizes=[0])
        with pytest.raises(ValueError):
            ExperimentConfig(engines=["cnn"])

    def test_timeout_is_recorded_as_baseline(self, base_task):
        bk, pos, neg, _ = base_task
        cfg = small_config(engines=["mdie"], train_sizes=[8], repeats=1,
                           settings=task.LearnerSettings(timeout=0.0))
        (r,) = learning_curve(cfg, bk, task.examples_for(pos, neg))
        assert r.timed_out and r.accuracy == 0.5

    def test_summary_uses_population_std(self):
        rs = [bench.RunResult("mil", 1, i, a, "", 0.0) for i, a in enumerate([1.0, 0.5])]
        assert summarize(rs)[("mil", 1)][:2] == (0.75, 0.25)


class TestRobustness:
    def test_rule_on_clean_and_attacked_items(self, stop_rule):
        variants = {}
        for v in ("base", "rp2_graffiti"):
            items = signscene.generate_dataset(signscene.DatasetConfig(positives=4, negatives=4, variant=v), 3)
            variants[v] = [EvalItem(it.spec.sign_id, it.label == "stop",
                                    task.build_bk([factext.extract(it.raster, it.spec.sign_id)]), it.occlusion)
                           for it in items]
        rows = robustness_eval(stop_rule, variants, max_occlusion=0.4)
        assert [r["variant"] for r in rows] == ["base", "rp2_graffiti"]
        assert all(r["accuracy"] == 1.0 and r["items"] == 8 for r in rows)
        assert robustness_csv(rows).splitlines()[0] == "variant,items,excluded,correct,accuracy"

    def test_excluded_items_are_counted(self, stop_rule):
        item = EvalItem("x", True, task.build_bk([]), occlusion=0.9)
        (row,) = robustness_eval(stop_rule, {"rp2_art": [item]}, max_occlusion=0.4)
        assert row["excluded"] == 1 and row["items"] == 0

    def test_empty_dataset(self, stop_rule):
        assert robustness_eval(stop_rule, {}) == []

    def test_empty_hypothesis(self):
        with pytest.raises(ValueError):
            robustness_eval([], {})


class TestPlot:
    def test_two_engines_three_lines(self, curve):
        svg = plot(curve_csv(curve))
        assert svg.startswith("<svg") and svg.count("<polyline") == 3

    def test_byte_identical(self, curve):
        text = curve_csv(curve)
        assert plot(text) == plot(text)

    @pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "engine,n,repeat,accuracy\nmil,1,0,1.0\n",
                                      "engine,n,repeat,accuracy\nmil,x,mean,1.0\n"])
    def test_malformed(self, text):
        with pytest.raises(MalformedCSV):
            plot(text)
