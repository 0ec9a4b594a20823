import csv
import json

import numpy as np
import pytest

from ivdag.benchmark import (
    Battery,
    CSV_COLUMNS,
    naive_direct_effects,
    run_benchmark,
    standard_batteries,
)
from ivdag.graphs import HypothesisSet
from ivdag.peeling import peel
from ivdag.simulate import gen_random, sample


def tiny_run(**kw):
    defaults = dict(suite="random", n=300, reps=2, seed=11, mode="recovery", workers=1)
    defaults.update(kw)
    return run_benchmark(**defaults)


class TestRunBenchmark:
    def test_deterministic_given_seed(self):
        r1 = tiny_run()
        r2 = tiny_run()
        assert r1.to_dict() == r2.to_dict()

    def test_workers_do_not_change_results(self):
        r1 = tiny_run()
        r2 = tiny_run(workers=2)
        assert r1.to_dict() == r2.to_dict()

    def test_aggregate_is_mean_of_rows(self):
        r = tiny_run(reps=3)
        vals = [row["tpr"] for row in r.rows]
        assert r.aggregate["tpr"] == pytest.approx(np.mean(vals))

    def test_batteries_add_columns(self):
        bats = (Battery("one", HypothesisSet.from_edges([(1, 6)])),)
        r = tiny_run(batteries=bats)
        assert all("reject_one" in row for row in r.rows)
        assert 0.0 <= r.aggregate["reject_one"] <= 1.0

    def test_naive_baseline_columns(self):
        r = tiny_run(naive_baseline=True)
        assert "naive_mean_ad" in r.rows[0]

    def test_failures_recorded_not_fatal(self, monkeypatch):
        import ivdag.benchmark as bench
        real = bench.peel
        calls = {"k": 0}

        def flaky(data, params=None):
            calls["k"] += 1
            if calls["k"] == 2:
                raise RuntimeError("synthetic failure")
            return real(data, params)

        monkeypatch.setattr(bench, "peel", flaky)
        r = tiny_run(reps=2, workers=1)
        assert r.failures == 1
        assert any("synthetic failure" in row["error"] for row in r.rows)

    def test_fix_graph_reuses_model(self):
        r = tiny_run(fix_graph=True, reps=2)
        assert r.failures == 0

    def test_rejects_bad_reps(self):
        with pytest.raises(ValueError):
            tiny_run(reps=0)

    def test_csv_layout(self, tmp_path):
        r = tiny_run(reps=2, naive_baseline=True)
        path = tmp_path / "report.csv"
        r.write_csv(path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert tuple(rows[0].keys())[:len(CSV_COLUMNS)] == CSV_COLUMNS
        assert rows[-1]["rep"] == "aggregate"
        assert len(rows) == 3


class TestStandardBatteries:
    def test_hub_has_size_and_power(self):
        names = [b.name for b in standard_batteries("hub")]
        assert names == ["size_1", "size_3", "size_5", "power_1", "power_3", "power_5"]

    def test_random_sizes_only(self):
        names = [b.name for b in standard_batteries("random")]
        assert names == ["size_1", "size_3", "size_5"]

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            standard_batteries("grid")


class TestNaiveBaseline:
    def test_ols_coefficients(self):
        spec = gen_random(3, p=6, q=15, r=1)
        data = sample(spec, 400)
        arg = peel(data)
        u = naive_direct_effects(data, arg)
        anc = arg.eplus.parents_map()
        for j in range(1, 7):
            if not anc[j]:
                assert np.count_nonzero(u[:, j - 1]) == 0
                continue
            ancestors = sorted(anc[j])
            design = np.vstack([data.y[[k - 1 for k in ancestors]], data.x]).T
            coef, *_ = np.linalg.lstsq(design, data.y[j - 1], rcond=None)
            for pos, k in enumerate(ancestors):
                assert u[k - 1, j - 1] == pytest.approx(coef[pos])
