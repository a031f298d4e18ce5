"""Path-quality metrics and max-min fair throughput under shortest-path routing."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .shell import SPEED_OF_LIGHT_KM_S
from .topology import Topology

DEFAULT_CAPACITY_GBPS = 100.0
DELAY_BIN_MS = 1.0
THREADS_ENV = "LEOTOPO_THREADS"


class UnroutableFlow(ValueError):
    """A flow's endpoints are disconnected in the topology."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class EvalReport:
    avg_delay_ms: float
    avg_hops: float
    worst_hops: int
    pair_count: int
    disconnected_pairs: int
    delay_histogram: np.ndarray
    hop_histogram: np.ndarray
    delay_bin_ms: float = DELAY_BIN_MS
    floor_delay_ms: float | None = None
    max_delay_ms: float = 0.0

    @property
    def delay_stretch(self) -> float:
        if not self.floor_delay_ms:
            return float("nan")
        return self.avg_delay_ms / self.floor_delay_ms

    def as_row(self) -> dict:
        return {
            "avg_delay_ms": self.avg_delay_ms,
            "avg_hops": self.avg_hops,
            "worst_hops": self.worst_hops,
            "stretch": self.delay_stretch,
            "disconnected_pairs": self.disconnected_pairs,
        }


def _graph(t: Topology, weight: str = "instantaneous") -> csr_matrix:
    n = len(t.nodes)
    i, j, worst, inst = t.edge_arrays()
    w = inst if weight == "instantaneous" else worst
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([w, w])
    return csr_matrix((data, (rows, cols)), shape=(n, n))


def shortest_path_metrics(
    t: Topology,
    floor_delay_ms: float | None = None,
    weight: str = "instantaneous",
    chunk: int = 128,
    threads: int | None = None,
) -> EvalReport:
    """Average shortest-distance delay and shortest hop count over all pairs.

    Delay follows minimum-distance paths; hops follow minimum-hop paths
    (a separate unweighted search).  Ordered pairs of distinct satellites
    are averaged; disconnected pairs are excluded and counted.
    ``weight="worst_case"`` evaluates delay on orbit worst-case lengths.
    """
    n = len(t.nodes)
    if n == 0:
        raise ValueError("topology has no nodes")
    graph = _graph(t, weight)
    sources = [np.arange(s, min(s + chunk, n)) for s in range(0, n, chunk)]

    def work(src):
        dist = dijkstra(graph, directed=False, indices=src)
        hops = dijkstra(graph, directed=False, indices=src, unweighted=True)
        dist[np.arange(src.size), src] = np.inf
        hops[np.arange(src.size), src] = np.inf
        ok = np.isfinite(dist)
        d_ms = dist[ok] / SPEED_OF_LIGHT_KM_S * 1000.0
        h = hops[ok].astype(np.int64)
        return d_ms.sum(), h.sum(), int(ok.sum()), int(h.max(initial=0)), d_ms.max(initial=0.0), \
            np.bincount((d_ms // DELAY_BIN_MS).astype(np.int64)), np.bincount(h)

    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, sources))
    else:
        parts = [work(s) for s in sources]

    delay_sum = sum(p[0] for p in parts)
    hop_sum = sum(p[1] for p in parts)
    pairs = sum(p[2] for p in parts)
    worst = max((p[3] for p in parts), default=0)
    dmax = max((p[4] for p in parts), default=0.0)
    dh = _merge_hist([p[5] for p in parts])
    hh = _merge_hist([p[6] for p in parts])
    total = n * (n - 1)
    return EvalReport(
        avg_delay_ms=delay_sum / pairs if pairs else float("nan"),
        avg_hops=hop_sum / pairs if pairs else float("nan"),
        worst_hops=worst,
        pair_count=pairs,
        disconnected_pairs=total - pairs,
        delay_histogram=dh,
        hop_histogram=hh,
        floor_delay_ms=floor_delay_ms,
        max_delay_ms=dmax,
    )


def _merge_hist(hists) -> np.ndarray:
    size = max((h.size for h in hists), default=0)
    out = np.zeros(size, dtype=np.int64)
    for h in hists:
        out[: h.size] += h
    return out


# ---------------------------------------------------------------------------
# traffic and routing
# ---------------------------------------------------------------------------
@dataclass
class TrafficMatrix:
    flows: list[tuple[int, int, float]]
    rng_seed: int | None = None

    def __post_init__(self):
        for src, dst, demand in self.flows:
            if src == dst:
                raise ValueError(f"flow {src}->{dst} has identical endpoints")
            if not 0.5 <= demand <= 5.0:
                raise ValueError(f"demand {demand} outside [0.5, 5.0] Gbps")


def random_traffic_matrix(
    nodes, n_pairs: int, seed, mean_gbps: float = 2.75, sd_gbps: float = 0.75
) -> TrafficMatrix:
    """Distinct random source-destination pairs with truncated-Gaussian demands."""
    rng = np.random.default_rng(seed)
    nodes = list(nodes)
    if len(nodes) < 2:
        raise ValueError("need at least two nodes for a traffic matrix")
    flows = []
    seen = set()
    max_pairs = len(nodes) * (len(nodes) - 1) // 2
    if n_pairs > max_pairs:
        raise ValueError(f"cannot draw {n_pairs} distinct pairs from {len(nodes)} nodes")
    while len(flows) < n_pairs:
        a, b = rng.choice(len(nodes), size=2, replace=False)
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        demand = rng.normal(mean_gbps, sd_gbps)
        while not 0.5 <= demand <= 5.0:
            demand = rng.normal(mean_gbps, sd_gbps)
        flows.append((nodes[a], nodes[b], float(demand)))
    return TrafficMatrix(flows, seed if isinstance(seed, int) else None)


class PathRouter:
    """Single shortest-distance paths with deterministic tie-breaking.

    Among equal-length shortest paths (relative tolerance ``rtol``) the one
    whose node-id sequence is lexicographically smallest is returned.
    """

    def __init__(self, t: Topology, weight: str = "instantaneous", rtol: float = 1e-9):
        self.topology = t
        self.rtol = rtol
        self.index = {v: k for k, v in enumerate(t.nodes)}
        self.graph = _graph(t, weight)
        # node ids are sorted, so CSR column order is neighbour-id order
        self.graph.sort_indices()
        self._dist: dict[int, np.ndarray] = {}

    def distances_from(self, nodes) -> None:
        need = sorted({self.index[v] for v in nodes} - set(self._dist))
        if need:
            dist = dijkstra(self.graph, directed=False, indices=need)
            for k, row in zip(need, np.atleast_2d(dist)):
                self._dist[k] = row

    def path(self, src: int, dst: int) -> list[int]:
        s, d = self.index[src], self.index[dst]
        self.distances_from([dst])
        to_dst = self._dist[d]
        if not np.isfinite(to_dst[s]):
            raise UnroutableFlow(f"no path between {src} and {dst}")
        tol = self.rtol * max(to_dst[s], 1.0)
        indptr, indices, data = self.graph.indptr, self.graph.indices, self.graph.data
        path = [s]
        x = s
        while x != d:
            lo, hi = indptr[x], indptr[x + 1]
            for w, length in zip(indices[lo:hi], data[lo:hi]):
                if abs(length + to_dst[w] - to_dst[x]) <= tol:
                    x = int(w)
                    break
            else:  # numerical dead end; should not happen with a consistent tree
                raise RuntimeError(f"shortest-path reconstruction failed at {self.topology.nodes[x]}")
            path.append(x)
        return [self.topology.nodes[k] for k in path]


def _directed_flows(tm: TrafficMatrix) -> list[tuple[int, int, float]]:
    out = []
    for src, dst, demand in tm.flows:
        out.append((src, dst, demand))
        out.append((dst, src, demand))
    return out


@dataclass
class FlowAllocation:
    flows: list[tuple[int, int, float]]
    paths: list[list[int]]
    rates_gbps: np.ndarray
    link_loads_gbps: dict[tuple[int, int], float]
    flows_per_link: dict[tuple[int, int], int]
    capacity_gbps: float
    capped_at_demand: bool = False
    directed_pairs: bool = True
    notes: dict = field(default_factory=dict)

    @property
    def aggregate_gbps(self) -> float:
        return float(self.rates_gbps.sum())

    @property
    def aggregate_tbps(self) -> float:
        return self.aggregate_gbps / 1000.0


def water_fill(
    flow_links: list[list[int]],
    capacities: np.ndarray,
    caps: np.ndarray | None = None,
) -> np.ndarray:
    """Progressive filling for max-min fair rates.

    All unfrozen flows rise together; whenever a link saturates, every flow
    crossing it freezes.  ``caps`` optionally bounds each flow's rate (a
    flow reaching its cap freezes too).  Flows with no links are limited only
    by their cap (infinite when uncapped).
    """
    n_flows = len(flow_links)
    rates = np.zeros(n_flows)
    if n_flows == 0:
        return rates
    n_links = len(capacities)
    incidence = np.zeros((n_links, n_flows), dtype=bool)
    for f, links in enumerate(flow_links):
        incidence[links, f] = True
    remaining = np.asarray(capacities, dtype=float).copy()
    active = np.ones(n_flows, dtype=bool)
    cap = np.full(n_flows, np.inf) if caps is None else np.asarray(caps, dtype=float)
    while active.any():
        counts = incidence[:, active].sum(axis=1)
        used = counts > 0
        link_step = np.full(n_links, np.inf)
        link_step[used] = remaining[used] / counts[used]
        step = min(link_step.min(initial=np.inf), (cap[active] - rates[active]).min())
        if not np.isfinite(step):
            rates[active] = np.inf
            break
        rates[active] += step
        remaining -= step * counts
        saturated = used & (remaining <= 1e-9 * np.maximum(capacities, 1.0))
        frozen = incidence[saturated].any(axis=0) | (rates >= cap - 1e-12)
        newly = active & frozen
        if not newly.any():  # guard against round-off stalls
            newly = active & incidence[np.argmin(np.where(used, link_step, np.inf))]
        active &= ~newly
    return rates


def maxmin_throughput(
    t: Topology,
    tm: TrafficMatrix,
    link_capacity_gbps: float = DEFAULT_CAPACITY_GBPS,
    cap_at_demand: bool = False,
    router: PathRouter | None = None,
) -> FlowAllocation:
    """Max-min fair rates with every directed flow pinned to one shortest path.

    Each source-destination pair contributes two directed flows, one per
    direction.  Links are full duplex with ``link_capacity_gbps`` per
    direction.  Demands bound the rates only when ``cap_at_demand`` is set.
    """
    router = router or PathRouter(t)
    flows = _directed_flows(tm)
    router.distances_from({v for s, d, _ in flows for v in (s, d)})
    paths = [router.path(s, d) for s, d, _ in flows]
    link_ids: dict[tuple[int, int], int] = {}
    flow_links = []
    for p in paths:
        links = []
        for a, b in zip(p, p[1:]):
            links.append(link_ids.setdefault((a, b), len(link_ids)))
        flow_links.append(links)
    caps = np.array([d for _, _, d in flows]) if cap_at_demand else None
    rates = water_fill(flow_links, np.full(len(link_ids), link_capacity_gbps), caps)
    loads = dict.fromkeys(link_ids, 0.0)
    counts = dict.fromkeys(link_ids, 0)
    for p, r in zip(paths, rates):
        for a, b in zip(p, p[1:]):
            loads[(a, b)] += r
            counts[(a, b)] += 1
    return FlowAllocation(
        flows=flows,
        paths=paths,
        rates_gbps=rates,
        link_loads_gbps=loads,
        flows_per_link=counts,
        capacity_gbps=link_capacity_gbps,
        capped_at_demand=cap_at_demand,
        notes={"directed_flows_per_pair": 2, "demand_capped": cap_at_demand},
    )


def flows_per_link(t: Topology, tm: TrafficMatrix, router: PathRouter | None = None) -> dict[tuple[int, int], int]:
    """Routed-flow count on every directed link (zeros included)."""
    router = router or PathRouter(t)
    counts = {}
    for e in t.edges():
        a, b = e.key
        counts[(a, b)] = 0
        counts[(b, a)] = 0
    flows = _directed_flows(tm)
    if flows:
        router.distances_from({v for s, d, _ in flows for v in (s, d)})
    for s, d, _ in flows:
        p = router.path(s, d)
        for a, b in zip(p, p[1:]):
            counts[(a, b)] += 1
    return counts


def flows_per_link_histogram(counts: dict) -> np.ndarray:
    values = np.fromiter(counts.values(), dtype=np.int64, count=len(counts))
    return np.bincount(values) if values.size else np.zeros(1, dtype=np.int64)


@dataclass
class ThroughputPoint:
    pairs: int
    trial: int
    aggregate_tbps: float


def throughput_sweep(
    t: Topology,
    pair_counts,
    trials: int,
    seed: int = 0,
    link_capacity_gbps: float = DEFAULT_CAPACITY_GBPS,
    cap_at_demand: bool = False,
) -> tuple[list[tuple[int, float]], list[ThroughputPoint]]:
    """Mean aggregate throughput per pair count over seeded random trials.

    Trial ``k`` of pair count ``n`` uses traffic seed ``(seed, n, k)`` so
    different topologies see identical traffic.
    """
    if trials <= 0:
        return [], []
    router = PathRouter(t)
    series, points = [], []
    for n_pairs in pair_counts:
        values = []
        for trial in range(trials):
            tm = random_traffic_matrix(t.nodes, n_pairs, [seed, n_pairs, trial])
            alloc = maxmin_throughput(t, tm, link_capacity_gbps, cap_at_demand, router)
            values.append(alloc.aggregate_tbps)
            points.append(ThroughputPoint(n_pairs, trial, alloc.aggregate_tbps))
        series.append((n_pairs, float(np.mean(values))))
    return series, points
