"""Multistart control-landscape experiments and their summaries."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .objectives import ObjectiveKind, evaluate
from .optimize import GrapeParams, RunRecord, ingrape_run
from .propagator import ControlGrid, ParamVector, reference_guess
from .qmodel import SystemKind, SystemSpec, build_generators, make_gate

INIT_SCHEMES = ("uniform_unit_cube", "symmetric", "reference_guess", "file")


@dataclass(frozen=True)
class LandscapeConfig:
    system: int = 3
    gate: str = "cnot"
    lambda_over_pi: float = 1.0
    objective: str = "grk-sd"
    T: float = 20.0
    K: int = 100
    epsilon: float = 0.1
    runs: int = 100
    master_seed: int = 0
    eps_acc: float = 2.5e-3
    max_iter: int = 5000
    segments: int = 20
    init: str = "uniform_unit_cube"
    init_file: str | None = None
    system_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("need at least one run")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init!r}")
        if self.init == "file" and not self.init_file:
            raise ValueError("init='file' needs init_file")
        ObjectiveKind(self.objective)
        self.gate_target()

    def system_spec(self) -> SystemSpec:
        return SystemSpec(kind=SystemKind(self.system), epsilon=self.epsilon, **self.system_params)

    def gate_target(self):
        return make_gate(self.gate, self.lambda_over_pi * math.pi)

    def grid(self) -> ControlGrid:
        return ControlGrid(self.T, self.K)

    def grape_params(self) -> GrapeParams:
        return GrapeParams(eps_acc=self.eps_acc, max_iter=self.max_iter, segments=self.segments)

    def replace(self, **kw) -> "LandscapeConfig":
        return LandscapeConfig(**{**asdict(self), **kw})


def _stream(master_seed: int, run_index: int) -> np.random.Generator:
    # Philox is counter-based; keying on (seed, index) makes each run's draws
    # independent of scheduling order.
    ss = np.random.SeedSequence([int(master_seed), int(run_index)])
    return np.random.Generator(np.random.Philox(ss))


def sample_initial(master_seed: int, run_index: int, K: int, symmetric: bool = False) -> ParamVector:
    x = _stream(master_seed, run_index).uniform(0.0, 1.0, size=3 * K)
    if symmetric:
        x[:K] = 2.0 * x[:K] - 1.0
    return ParamVector.from_flat(x)


def initial_params(cfg: LandscapeConfig, run_index: int) -> ParamVector:
    if cfg.init == "reference_guess":
        return reference_guess(cfg.grid())
    if cfg.init == "file":
        from .propagator import read_controls_csv

        f = read_controls_csv(cfg.init_file)
        return ParamVector(f.u, np.sqrt(f.n1), np.sqrt(f.n2))
    return sample_initial(cfg.master_seed, run_index, cfg.K, symmetric=cfg.init == "symmetric")


def single_run(cfg: LandscapeConfig, run_index: int) -> RunRecord:
    gen = build_generators(cfg.system_spec())
    g0 = initial_params(cfg, run_index)
    rec = ingrape_run(
        cfg.objective, gen, cfg.grid(), g0, cfg.gate_target(), cfg.grape_params(),
        config=asdict(cfg), seed=cfg.master_seed,
    )
    rec.extra["run_index"] = run_index
    if cfg.objective != ObjectiveKind.SD.value:
        # the state-based objectives do not bound the full channel distance; keep it for comparison
        rec.extra["sd_value"] = evaluate(ObjectiveKind.SD, gen, cfg.grid(), rec.control_vector(), cfg.gate_target())
    return rec


def _run_safe(args):
    cfg, idx = args
    try:
        return single_run(cfg, idx)
    except Exception as exc:  # individual failures are recorded, not fatal
        return RunRecord(
            method="ingrape", config=asdict(cfg), seed=cfg.master_seed, iterations=0,
            history=[], final_value=float("nan"), grad_norm=float("nan"),
            controls={"u": [], "n1": [], "n2": []}, termination=f"error: {exc!r}",
            extra={"run_index": idx},
        )


def histogram(values, bins="fd"):
    """Counts and edges; ``bins`` is a bin count or ``"fd"`` (Freedman-Diaconis)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    if not np.all(np.isfinite(values)):
        raise ValueError("histogram values must be finite")
    if values.min() == values.max():
        nb = 1 if bins == "fd" else int(bins)
        lo = values[0]
        return np.histogram(values, bins=nb, range=(lo - 0.5, lo + 0.5))
    counts, edges = np.histogram(values, bins=bins if bins != "fd" else "fd")
    return counts, edges


@dataclass
class Cluster:
    lo: float
    hi: float
    members: list
    center: float
    centroid: np.ndarray | None = None
    spread: float = 0.0


def detect_clusters(values, controls=None, gap_threshold: float = 0.15,
                    min_fraction: float = 0.0, with_minor: bool = False):
    """Split sorted values at every gap wider than ``gap_threshold`` times their range.

    ``controls`` (one flat control vector per value) adds per-cluster
    centroids and the RMS distance of members to their centroid. Groups
    holding fewer than ``min_fraction`` of all values are treated as
    outliers rather than peaks; they are dropped, or returned as a second
    list when ``with_minor`` is set.
    """
    if not 0.0 <= min_fraction < 1.0:
        raise ValueError("min_fraction must lie in [0, 1)")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return ([], []) if with_minor else []
    order = np.argsort(values, kind="stable")
    sv = values[order]
    span = sv[-1] - sv[0]
    cuts = []
    if span > 0:
        gaps = np.diff(sv)
        cuts = list(np.nonzero(gaps > gap_threshold * span)[0] + 1)
    clusters = []
    for part in np.split(np.arange(sv.size), cuts):
        idx = order[part].tolist()
        lo, hi = float(sv[part[0]]), float(sv[part[-1]])
        # the mean can round just outside [lo, hi] for identical members
        c = Cluster(lo, hi, idx, min(max(float(np.mean(values[idx])), lo), hi))
        if controls is not None:
            pts = np.asarray([controls[i] for i in idx], dtype=float)
            c.centroid = pts.mean(axis=0)
            c.spread = float(np.sqrt(np.mean(np.sum((pts - c.centroid) ** 2, axis=1))))
        clusters.append(c)
    major = [c for c in clusters if len(c.members) >= min_fraction * values.size]
    minor = [c for c in clusters if len(c.members) < min_fraction * values.size]
    return (major, minor) if with_minor else major


def centroid_distances(clusters) -> np.ndarray:
    n = len(clusters)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if clusters[i].centroid is not None and clusters[j].centroid is not None:
                d[i, j] = np.linalg.norm(clusters[i].centroid - clusters[j].centroid)
    return d


@dataclass
class LandscapeSummary:
    values: list
    counts: list
    edges: list
    min: float
    mean: float
    std: float
    clusters: list
    centroid_distance: list
    peak_count: int
    failures: int
    minor_clusters: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _cluster_dict(c, ok):
    return {
        "lo": c.lo, "hi": c.hi, "center": c.center, "size": len(c.members),
        "runs": [ok[i].extra.get("run_index", i) for i in c.members], "spread": c.spread,
    }


def summarize(records, bins="fd", gap_threshold: float = 0.15,
              min_fraction: float = 0.05) -> LandscapeSummary:
    ok = [r for r in records if np.isfinite(r.final_value)]
    values = np.array([r.final_value for r in ok])
    controls = [r.control_vector().flat() for r in ok]
    counts, edges = histogram(values, bins)
    clusters, minor = detect_clusters(values, controls, gap_threshold, min_fraction, with_minor=True)
    dist = centroid_distances(clusters)
    return LandscapeSummary(
        values=values.tolist(),
        counts=counts.tolist(),
        edges=edges.tolist(),
        min=float(values.min()) if values.size else math.nan,
        mean=float(values.mean()) if values.size else math.nan,
        std=float(values.std()) if values.size else math.nan,
        clusters=[_cluster_dict(c, ok) for c in clusters],
        centroid_distance=dist.tolist(),
        peak_count=len(clusters),
        failures=len(records) - len(ok),
        minor_clusters=[_cluster_dict(c, ok) for c in minor],
    )


def run_records(cfg: LandscapeConfig, jobs: int = 1):
    tasks = [(cfg, i) for i in range(cfg.runs)]
    if jobs <= 1:
        return [_run_safe(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_safe, tasks))


def write_outputs(out_dir, records, summary: LandscapeSummary):
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    for r in records:
        r.save(out / "runs" / f"run_{r.extra['run_index']}.json", deterministic=True)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=1)
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(summary.edges[:-1], summary.edges[1:], summary.counts):
            w.writerow([repr(lo), repr(hi), c])


def run_landscape(cfg: LandscapeConfig, jobs: int = 1, out_dir=None, bins="fd",
                  gap_threshold: float = 0.15, min_fraction: float = 0.05):
    """Run ``cfg.runs`` independent inGRAPE descents and summarize their final values."""
    records = run_records(cfg, jobs)
    summary = summarize(records, bins, gap_threshold, min_fraction)
    if out_dir is not None:
        write_outputs(out_dir, records, summary)
    return summary, records


def epsilon_sweep(cfg: LandscapeConfig, epsilons, restarts: int = 1, jobs: int = 1,
                  out_dir=None):
    """Best final value over ``restarts`` inGRAPE runs for every coupling strength."""
    eps = [float(e) for e in epsilons]
    if any(e < 0 for e in eps):
        raise ValueError("epsilon values must be non-negative")
    rows = []
    for e in eps:
        sub = cfg.replace(epsilon=e, runs=restarts)
        records = run_records(sub, jobs)
        good = [r for r in records if np.isfinite(r.final_value)]
        best = min(good, key=lambda r: r.final_value) if good else None
        rows.append({
            "epsilon": e,
            "best_value": best.final_value if best else math.nan,
            "iterations": best.iterations if best else 0,
            "values": [r.final_value for r in records],
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "best_value", "iterations"])
            for r in rows:
                w.writerow([repr(r["epsilon"]), repr(r["best_value"]), r["iterations"]])
    return rows


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
