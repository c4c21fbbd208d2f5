import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gatescape.landscape import (
    LandscapeConfig,
    centroid_distances,
    detect_clusters,
    epsilon_sweep,
    histogram,
    run_landscape,
    sample_initial,
    summarize,
)
from gatescape.optimize import RunRecord

SMALL = LandscapeConfig(system=1, gate="cnot", T=2.0, K=4, runs=6, master_seed=11, epsilon=0.1,
                        eps_acc=1e-2, max_iter=40)


def test_sample_initial_reproducible_and_independent():
    a = sample_initial(3, 7, 50)
    b = sample_initial(3, 7, 50)
    c = sample_initial(3, 8, 50)
    d = sample_initial(4, 7, 50)
    assert np.array_equal(a.flat(), b.flat())
    assert not np.array_equal(a.flat(), c.flat()) and not np.array_equal(a.flat(), d.flat())


def test_sample_initial_distribution():
    x = np.concatenate([sample_initial(0, i, 100).flat() for i in range(50)])
    assert x.min() >= 0 and x.max() < 1
    assert abs(x.mean() - 0.5) < 0.01
    assert abs(x.var() - 1 / 12) < 0.005
    s = sample_initial(0, 0, 100, symmetric=True)
    assert s.u.min() < -0.5 and s.u.max() <= 1 and np.all(s.w1 >= 0)


def test_config_validation():
    with pytest.raises(ValueError):
        LandscapeConfig(runs=0)
    with pytest.raises(ValueError):
        LandscapeConfig(init="nope")
    with pytest.raises(ValueError):
        LandscapeConfig(init="file")
    with pytest.raises(ValueError):
        LandscapeConfig(objective="fidelity")
    with pytest.raises(ValueError):
        LandscapeConfig(gate="cz")


def test_histogram_counts_sum():
    rng = np.random.default_rng(0)
    v = rng.normal(size=500)
    for bins in ("fd", 7):
        counts, edges = histogram(v, bins)
        assert counts.sum() == 500 and edges.size == counts.size + 1
        assert edges[0] == v.min() and edges[-1] == v.max()


def test_histogram_edge_cases():
    counts, edges = histogram([])
    assert counts.size == 0
    counts, edges = histogram([0.3, 0.3, 0.3])
    assert counts.tolist() == [3]
    with pytest.raises(ValueError):
        histogram([0.1, np.nan])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60))
def test_clusters_partition_values(values):
    clusters = detect_clusters(values)
    members = sorted(i for c in clusters for i in c.members)
    assert members == list(range(len(values)))
    for c in clusters:
        assert c.lo <= c.center <= c.hi
    assert all(a.hi < b.lo for a, b in zip(clusters, clusters[1:]))


def test_bimodal_synthetic_clusters():
    rng = np.random.default_rng(1)
    a = rng.normal(0.035, 5e-4, 180)
    b = rng.normal(0.0415, 5e-4, 20)
    ctrl_a = rng.normal(0.0, 0.1, (180, 5))
    ctrl_b = rng.normal(3.0, 0.1, (20, 5))
    values = np.concatenate([a, b])
    controls = np.vstack([ctrl_a, ctrl_b])
    clusters = detect_clusters(values, controls)
    assert len(clusters) == 2
    assert clusters[0].center == pytest.approx(0.035, abs=5e-4)
    assert clusters[1].center == pytest.approx(0.0415, abs=5e-4)
    assert sorted(clusters[1].members) == list(range(180, 200))
    d = centroid_distances(clusters)
    assert d[0, 1] > 5 * max(c.spread for c in clusters)


def test_unimodal_single_cluster():
    values = np.random.default_rng(2).normal(0.06, 0.002, 100)
    assert len(detect_clusters(values)) == 1


def test_minor_groups_are_not_peaks():
    values = np.concatenate([np.full(97, 0.03), np.full(3, 0.05)])
    major, minor = detect_clusters(values, min_fraction=0.05, with_minor=True)
    assert len(major) == 1 and len(minor) == 1 and len(minor[0].members) == 3
    assert len(detect_clusters(values)) == 2
    with pytest.raises(ValueError):
        detect_clusters(values, min_fraction=1.0)


def _fake_record(idx, value):
    return RunRecord(method="ingrape", config={}, seed=0, iterations=1, history=[value],
                     final_value=value, grad_norm=0.0, controls={"u": [value], "n1": [0.0], "n2": [0.0]},
                     termination="converged", extra={"run_index": idx})


def test_summary_consistency():
    recs = [_fake_record(i, v) for i, v in enumerate([0.05, 0.07, 0.06, float("nan")])]
    s = summarize(recs)
    assert s.failures == 1
    assert s.min == 0.05 == min(r.final_value for r in recs[:3])
    assert sum(s.counts) == 3
    assert s.min <= s.mean


def test_run_landscape_outputs(tmp_path):
    summary, records = run_landscape(SMALL, out_dir=tmp_path)
    assert len(records) == SMALL.runs
    assert sorted(p.name for p in (tmp_path / "runs").iterdir()) == [f"run_{i}.json" for i in range(6)]
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["min"] == min(r.final_value for r in records)
    with open(tmp_path / "histogram.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_left", "bin_right", "count"]
    assert sum(int(r[2]) for r in rows[1:]) == SMALL.runs
    for r in records:
        assert np.all(np.diff(r.history) < 0)


def test_run_landscape_jobs_invariant():
    s1, _ = run_landscape(SMALL, jobs=1)
    s3, _ = run_landscape(SMALL, jobs=3)
    assert json.dumps(s1.to_dict()) == json.dumps(s3.to_dict())


def test_failed_runs_are_recorded(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u,n1,n2\n0,1,1,1\n")  # wrong number of intervals for K=4
    cfg = SMALL.replace(init="file", init_file=str(bad), runs=2)
    summary, records = run_landscape(cfg)
    assert summary.failures == 2
    assert all(r.termination.startswith("error") for r in records)


def test_epsilon_sweep_writes_csv(tmp_path):
    rows = epsilon_sweep(SMALL.replace(max_iter=10), [0.0, 0.05], restarts=2, out_dir=tmp_path)
    assert [r["epsilon"] for r in rows] == [0.0, 0.05]
    assert all(r["best_value"] == min(r["values"]) for r in rows)
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "epsilon,best_value,iterations" and len(lines) == 3
    with pytest.raises(ValueError):
        epsilon_sweep(SMALL, [-0.1])


def test_runs_record_channel_distance():
    _, records = run_landscape(SMALL.replace(runs=2))
    for r in records:
        assert 0 <= r.extra["sd_value"] <= 1
