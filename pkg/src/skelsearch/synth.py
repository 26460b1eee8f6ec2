"""Deterministic synthetic graph generators for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import Graph


def random_connected_graph(n: int, extra_edges: int, seed: int,
                           weight_kind: str = "int", weight_high: float = 10.0) -> Graph:
    """Random spanning tree plus `extra_edges` distinct chords.

    weight_kind "int" draws integer weights in 1..weight_high (sums stay
    exact in float64); "float" draws uniform reals in [1, weight_high],
    which makes shortest paths unique almost surely.
    """
    if n < 1:
        raise ValueError("need at least one vertex")
    rng = np.random.default_rng([seed, 17])

    def draw_weight() -> float:
        if weight_kind == "int":
            return float(rng.integers(1, int(weight_high) + 1))
        if weight_kind == "float":
            return float(rng.uniform(1.0, weight_high))
        raise ValueError(f"unknown weight_kind {weight_kind!r}")

    edges: list[tuple[int, int, float]] = []
    used: set[tuple[int, int]] = set()
    order = rng.permutation(n)
    for i in range(1, n):
        a = int(order[i])
        b = int(order[rng.integers(i)])
        key = (min(a, b), max(a, b))
        used.add(key)
        edges.append((a, b, draw_weight()))
    attempts = 0
    max_extra = n * (n - 1) // 2 - len(used)
    target = min(extra_edges, max_extra)
    attempt_cap = 50 * (target + 1) + 1000
    while target > 0 and attempts < attempt_cap:
        attempts += 1
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key in used:
            continue
        used.add(key)
        edges.append((a, b, draw_weight()))
        target -= 1
    return Graph.from_edges(n, edges)


def power_law_graph(n: int, attach: int, seed: int,
                    weight_low: float = 1.0, weight_high: float = 10.0) -> Graph:
    """Preferential-attachment graph: each new vertex links to `attach`
    distinct earlier vertices picked proportionally to current degree.
    Weights are uniform reals in [weight_low, weight_high]."""
    if n < attach + 1:
        raise ValueError("need more vertices than attachments")
    rng = np.random.default_rng([seed, 23])
    edges: list[tuple[int, int, float]] = []
    # Repeated-vertex pool implements degree-proportional sampling.
    pool: list[int] = []
    for v in range(attach + 1):
        for u in range(v):
            edges.append((u, v, float(rng.uniform(weight_low, weight_high))))
            pool.extend((u, v))
    for v in range(attach + 1, n):
        chosen: set[int] = set()
        while len(chosen) < attach:
            pick = int(pool[rng.integers(len(pool))])
            chosen.add(pick)
        for u in sorted(chosen):
            edges.append((u, v, float(rng.uniform(weight_low, weight_high))))
            pool.extend((u, v))
    return Graph.from_edges(n, edges)


def two_clique_graph(clique_size: int, bridge_weight: float = 1.0,
                     weight: float = 1.0) -> Graph:
    """Two complete graphs joined by a single bridge edge."""
    edges = []
    for base in (0, clique_size):
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                edges.append((base + i, base + j, weight))
    edges.append((clique_size - 1, clique_size, bridge_weight))
    return Graph.from_edges(2 * clique_size, edges)


def grid_graph(rows: int, cols: int, seed: int | None = None,
               weight_high: float = 4.0) -> Graph:
    """Rows x cols lattice; seeded random integer weights, else unit."""
    rng = np.random.default_rng([seed, 31]) if seed is not None else None
    edges = []

    def w() -> float:
        return float(rng.integers(1, int(weight_high) + 1)) if rng is not None else 1.0

    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, w()))
            if r + 1 < rows:
                edges.append((v, v + cols, w()))
    return Graph.from_edges(rows * cols, edges)


def star_graph(leaves: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i, weight) for i in range(1, leaves + 1)])
