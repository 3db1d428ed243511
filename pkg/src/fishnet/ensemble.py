"""Reproducible Monte Carlo campaigns over the event-driven simulator.

Replica ``i`` draws its strengths from ``SeedSequence(master_seed,
spawn_key=(i,))`` through a Philox generator, so every replica is a pure
function of ``(master_seed, i)``: campaigns can be extended or split across
any number of workers without changing a single number.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .mesh import FishnetTopology, build_topology
from .order_stats import weibull_scale
from .solver import BudgetExhaustedError, run_simulation
from .strength import StrengthDistribution, sample_strengths

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "GammaEstimate",
    "replica_seed",
    "run_replica",
    "run_ensemble",
    "empirical_cdf",
    "estimate_gamma",
    "benchmark_solver",
    "default_workers",
]

log = logging.getLogger(__name__)

THREADS_ENV = "FISHNET_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything that determines a campaign's numbers."""

    rows: int = 16
    gaps: int = 16
    length: float = 0.01
    area: float = 1.0
    modulus: float = 1.0
    kt_ratio: float = 0.1
    J: int = 20
    replicas: int = 1000
    master_seed: int = 20240917
    termination: float = 0.05

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.J < 1:
            raise ValueError("J must be >= 1")
        if self.kt_ratio == 0:
            raise ValueError("softening slope must be nonzero")

    def topology(self) -> FishnetTopology:
        return build_topology(self.rows, self.gaps, self.length, self.area, self.modulus)

    def to_dict(self) -> dict:
        return asdict(self)


def replica_seed(master_seed: int, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(i),))


@dataclass
class ReplicaResult:
    index: int
    sigma_max: float
    n_c: int
    trace_k: np.ndarray
    trace_ratio: np.ndarray
    trace_first: np.ndarray
    n_events: int
    solves: int


def run_replica(config: EnsembleConfig, i: int, topology: FishnetTopology | None = None,
                dist: StrengthDistribution | None = None) -> ReplicaResult:
    topology = topology or config.topology()
    s = sample_strengths(topology.n_links, replica_seed(config.master_seed, i), dist)
    rec = run_simulation(topology, s, config.kt_ratio, config.J, config.termination)
    k, ratio = rec.ratio_trace("max")
    _, first = rec.ratio_trace("first")
    c = rec.counters
    return ReplicaResult(i, rec.sigma_max, rec.n_c, k, ratio, first, rec.n_events,
                         c["factorizations"] + c["rank1"])


@dataclass
class EnsembleResult:
    """Per-replica outcomes in replica order plus campaign bookkeeping.

    Failed replicas (event budget exhausted) are listed in ``failures`` and
    carry NaN / -1 in the per-replica arrays.
    """

    config: EnsembleConfig
    sigma_max: np.ndarray
    n_c: np.ndarray
    traces: list
    first_traces: list
    failures: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> np.ndarray:
        return self.n_c >= 0

    def summary(self) -> dict:
        s = self.sigma_max[self.ok]
        n = self.n_c[self.ok]
        return {
            "replicas": int(len(self.sigma_max)),
            "failed": len(self.failures),
            "sigma_max_mean": float(s.mean()),
            "sigma_max_sd": float(s.std(ddof=1)) if len(s) > 1 else 0.0,
            "sigma_max_median": float(np.median(s)),
            "nc_mean": float(n.mean()),
            "nc_sd": float(n.std(ddof=1)) if len(n) > 1 else 0.0,
        }

    def empirical_cdf(self):
        return empirical_cdf(self.sigma_max[self.ok])

    def nc_histogram(self) -> tuple[np.ndarray, np.ndarray]:
        counts = np.bincount(self.n_c[self.ok])
        return np.arange(len(counts)), counts

    def head(self, n: int) -> "EnsembleResult":
        """The first ``n`` replicas, identical to a campaign run with ``replicas=n``."""
        if not 1 <= n <= len(self.sigma_max):
            raise ValueError(f"n must lie in [1, {len(self.sigma_max)}]")
        config = replace(self.config, replicas=n)
        failures = {i: m for i, m in self.failures.items() if i < n}
        return EnsembleResult(config, self.sigma_max[:n].copy(), self.n_c[:n].copy(),
                              self.traces[:n], self.first_traces[:n], failures, {})

    def trace_list(self, rule: str = "max") -> list:
        if rule == "max":
            return self.traces
        if rule == "first":
            return self.first_traces
        raise ValueError(f"unknown rule {rule!r}")

    def mean_ratio_trace(self, max_replicas: int | None = None, rule: str = "max"):
        """(k, mean ratio, replica count) over replicas reaching each k before the peak."""
        return _mean_trace(self.trace_list(rule), max_replicas)

    def write(self, outdir, manifest: dict | None = None) -> list[str]:
        """Write the campaign CSVs (and ``manifest.json``) into ``outdir``."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        files = []

        def table(name, header, rows):
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
            files.append(name)

        table("sigma_max.csv", ["replica", "sigma_max", "N_c"],
              [[i, _f(s), int(n)] for i, (s, n) in enumerate(zip(self.sigma_max, self.n_c))])
        k, cnt = self.nc_histogram()
        tot = cnt.sum()
        table("nc_hist.csv", ["k", "count", "frequency"],
              [[int(a), int(b), _f(b / tot)] for a, b in zip(k, cnt)])
        kk, mean, n = self.mean_ratio_trace()
        table("ratio_trace.csv", ["k", "mean_ratio", "replicas"],
              [[int(a), _f(b), int(c)] for a, b, c in zip(kk, mean, n)])
        x, p, wx, wy = self.empirical_cdf()
        table("ecdf_weibull.csv", ["x", "p", "weibull_x", "weibull_y"],
              [[_f(a), _f(b), _f(c), _f(d)] for a, b, c, d in zip(x, p, wx, wy)])
        if manifest is not None:
            manifest = dict(manifest, outputs=sorted(files))
            with open(out / "manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
            files.append("manifest.json")
        return files


def _f(v) -> str:
    return repr(float(v))


def _mean_trace(traces, max_replicas=None):
    use = traces if max_replicas is None else traces[:max_replicas]
    use = [t for t in use if t is not None]
    if not use:
        return np.zeros(0, int), np.zeros(0), np.zeros(0, int)
    K = max(int(k.max()) for k, _ in use)
    total = np.zeros(K + 1)
    count = np.zeros(K + 1, dtype=int)
    for k, r in use:
        total[k] += r
        count[k] += 1
    kk = np.flatnonzero(count)
    return kk, total[kk] / count[kk], count[kk]


def run_ensemble(config: EnsembleConfig, workers: int | None = None, start: int = 0,
                 dist: StrengthDistribution | None = None) -> EnsembleResult:
    """Run replicas ``start .. start + replicas - 1`` and aggregate in replica order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    topology = config.topology()
    n = config.replicas
    sigma = np.full(n, np.nan)
    nc = np.full(n, -1, dtype=np.int64)
    traces: list = [None] * n
    first: list = [None] * n
    failures = {}
    events = solves = 0

    def work(chunk):
        out = []
        for i in chunk:
            try:
                out.append(run_replica(config, start + i, topology, dist))
            except BudgetExhaustedError as exc:
                out.append((start + i, str(exc)))
        return out

    size = max(1, n // (4 * workers))
    chunks = [range(a, min(n, a + size)) for a in range(0, n, size)]
    t0 = time.perf_counter()
    if workers == 1:
        results = map(work, chunks)
        pool = None
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(work, chunks)
    try:
        for batch in results:
            for r in batch:
                if isinstance(r, tuple):
                    failures[r[0]] = r[1]
                    continue
                j = r.index - start
                sigma[j] = r.sigma_max
                nc[j] = r.n_c
                traces[j] = (r.trace_k, r.trace_ratio)
                first[j] = (r.trace_k, r.trace_first)
                events += r.n_events
                solves += r.solves
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.perf_counter() - t0
    stats = {"elapsed_s": elapsed, "events": events, "solves": solves,
             "events_per_s": events / elapsed if elapsed > 0 else float("inf"),
             "solves_per_s": solves / elapsed if elapsed > 0 else float("inf"),
             "workers": workers}
    if failures:
        log.warning("%d replica(s) failed: %s", len(failures), sorted(failures))
    log.info("ensemble: %d replicas, %.0f events/s", n, stats["events_per_s"])
    return EnsembleResult(config, sigma, nc, traces, first, failures, stats)


def empirical_cdf(values):
    """Sorted values with plotting positions ``(i - 0.5) / n`` and Weibull coordinates."""
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    if n < 2:
        raise ValueError("need at least two values")
    p = (np.arange(1, n + 1) - 0.5) / n
    wx, wy = weibull_scale(p, x)
    return x, p, wx, wy


@dataclass
class GammaEstimate:
    """Mean ``s_(m+1) / sigma_N`` on the 0-based order ``m`` with two fits.

    ``rational_c`` parameterizes ``N / (N - c m)``; ``linear`` is
    ``(slope, intercept)`` of ``intercept + slope m``.  Both fits weight each
    order by the number of replicas contributing to it.
    """

    N: int
    m: np.ndarray
    mean: np.ndarray
    count: np.ndarray
    rational_c: float
    rational_ssr: float
    linear: tuple
    linear_ssr: float

    def __call__(self, m):
        """Observed mean where available, rational fit elsewhere."""
        m = np.asarray(m)
        lookup = dict(zip(self.m.tolist(), self.mean.tolist()))
        fit = self.N / (self.N - self.rational_c * m.astype(float))
        return np.array([lookup.get(int(a), b) for a, b in zip(np.ravel(m), np.ravel(fit))]).reshape(m.shape)


def estimate_gamma(result, N: int | None = None, max_replicas: int = 32,
                   rule: str = "max") -> GammaEstimate:
    """Estimate the stress-to-order-statistic factor from prepeak ratio traces.

    ``result`` is an :class:`EnsembleResult` or a list of ``(k, ratio)``
    traces; ``rule`` picks which traces of an ensemble are used.
    """
    traces = result.trace_list(rule) if isinstance(result, EnsembleResult) else list(result)
    if N is None:
        if not isinstance(result, EnsembleResult):
            raise ValueError("N is required when passing raw traces")
        N = 2 * result.config.rows * result.config.gaps
    traces = [t for t in traces if t is not None][:max_replicas]
    if len(traces) < 10:
        raise ValueError("need ratio traces from at least 10 replicas")
    k, mean, count = _mean_trace(traces)
    if len(k) == 0:
        raise ValueError("no prepeak trace data")
    m = (k - 1).astype(float)
    w = count.astype(float)

    def ssr_rational(c):
        return float(np.sum(w * (N / (N - c * m) - mean) ** 2))

    upper = 0.999 * N / max(m.max(), 1.0)
    c = minimize_scalar(ssr_rational, bounds=(-upper, upper), method="bounded",
                        options={"xatol": 1e-10}).x
    if len(m) >= 2:
        slope, intercept = np.polyfit(m, mean, 1, w=np.sqrt(w))
    else:
        slope, intercept = 0.0, float(mean[0])
    lin_ssr = float(np.sum(w * (intercept + slope * m - mean) ** 2))
    return GammaEstimate(N, m.astype(int), mean, count, float(c), ssr_rational(c),
                         (float(slope), float(intercept)), lin_ssr)


def benchmark_solver(topology: FishnetTopology, replicas: int = 5, kt_ratio: float = 0.1,
                     J: int = 20, seed: int = 7) -> dict:
    """Event throughput of the rank-1 update path against refactorization per event."""
    strengths = [sample_strengths(topology.n_links, replica_seed(seed, i)) for i in range(replicas)]
    run_simulation(topology, strengths[0], kt_ratio, J, mode="update")  # compile
    out = {}
    for mode in ("update", "refactor"):
        events = 0
        t0 = time.perf_counter()
        for s in strengths:
            events += run_simulation(topology, s, kt_ratio, J, mode=mode).n_events
        dt = time.perf_counter() - t0
        out[mode] = events / dt
    out["speedup"] = out["update"] / out["refactor"]
    return out
