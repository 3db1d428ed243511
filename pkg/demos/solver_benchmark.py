"""Rank-1 factor updates against refactoring at every event."""
from fishnet import build_topology
from fishnet.ensemble import benchmark_solver

for R in (8, 16, 24):
    b = benchmark_solver(build_topology(R, R), replicas=3)
    print(f"{2 * R * R:5d} links: {b['update']:9.0f} vs {b['refactor']:9.0f} events/s ({b['speedup']:.1f}x)")
