import os

import numpy as np
import pytest

from fishnet.ensemble import EnsembleConfig, run_ensemble
from fishnet.strength import StrengthDistribution, make_generator

# full-size campaign for the analytic-vs-empirical comparison; lower it for CI
FULL_REPLICAS = int(os.environ.get("FISHNET_ACCEPT_REPLICAS", "10000"))

_CAMPAIGNS = {}


def campaign(kt_ratio: float, replicas: int = 1000, **kw):
    """Default-net campaign shared across the session.

    Smaller requests are served from the head of a larger cached run; replica
    streams make the two identical.
    """
    key = (kt_ratio, tuple(sorted(kw.items())))
    have = _CAMPAIGNS.get(key)
    if have is None or len(have.sigma_max) < replicas:
        cfg = EnsembleConfig(kt_ratio=kt_ratio, replicas=replicas, **kw)
        have = run_ensemble(cfg)
        _CAMPAIGNS[key] = have
    return have if len(have.sigma_max) == replicas else have.head(replicas)


def sorted_order_statistic(N: int, k: int, trials: int, seed: int, chunk: int = 5000):
    """(k+1)-th smallest of N i.i.d. link strengths, by brute-force sorting.

    Uniforms are partitioned and the selected one is mapped through the
    (monotone) quantile function, which gives exactly the order statistic of
    the mapped draws.
    """
    dist = StrengthDistribution()
    rng = make_generator(seed)
    out = []
    left = trials
    while left:
        n = min(chunk, left)
        u = rng.random((n, N))
        out.append(np.partition(u, k, axis=1)[:, k])
        left -= n
    return dist.inverse_cdf(np.concatenate(out))


def sup_distance(sample, cdf):
    """Two-sided Kolmogorov distance between a sample and a CDF callable."""
    x = np.sort(sample)
    n = len(x)
    F = cdf(x)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(hi - F)), np.max(np.abs(F - lo))))


@pytest.fixture(scope="session")
def campaigns():
    return campaign


ACCEPTANCE_LINES = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
