"""Simulated-annealing topology search driven by O(1) surrogate objectives.

The search state is a degree-bounded subset of the stable candidate edges.
Each step proposes one candidate edge; when an endpoint is saturated a random
incident edge is dropped there (a swap).  Mean link length ``L``, long-range
fraction ``M`` and edge utilisation ``U`` are maintained from three running
accumulators, so scoring a proposal never touches the rest of the graph.
Only swaps can disconnect the graph, and only they pay for a reachability
search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .evaluation import EvalReport, shortest_path_metrics
from .shell import Snapshot, d_stab
from .stable import LONG_RANGE_SPAN, CandidateLinks
from .topology import InfeasibleDeployment, Provenance, Topology


class InfeasibleInput(InfeasibleDeployment):
    """Stable candidates cannot connect every active satellite."""

    def __init__(self, n_components: int, sizes: list[int]):
        super().__init__(
            f"stable candidates split the active satellites into {n_components} components "
            f"(sizes {sizes[:10]}{'...' if len(sizes) > 10 else ''})"
        )
        self.n_components = n_components
        self.sizes = sizes


@dataclass(frozen=True)
class SurrogateWeights:
    alpha_l: float
    alpha_m: float
    alpha_u: float

    def __post_init__(self):
        w = (self.alpha_l, self.alpha_m, self.alpha_u)
        if min(w) < 0 or max(w) == 0:
            raise ValueError("surrogate weights must be non-negative and not all zero")

    @classmethod
    def from_table(cls, alpha_l: float, alpha_u: float, alpha_m: float) -> SurrogateWeights:
        """Build from the (alpha_L, alpha_U, alpha_M) ordering used in parameter tables."""
        return cls(alpha_l=alpha_l, alpha_m=alpha_m, alpha_u=alpha_u)

    def as_table(self) -> tuple[float, float, float]:
        return (self.alpha_l, self.alpha_u, self.alpha_m)


LOW_DELAY = SurrogateWeights.from_table(4, 1, 1)
LOW_HOP = SurrogateWeights.from_table(1, 2, 5)
BALANCED = SurrogateWeights.from_table(5, 3, 2)
PRESETS = {"low-delay": LOW_DELAY, "low-hop": LOW_HOP, "balanced": BALANCED}


@dataclass(frozen=True)
class AnnealSchedule:
    t_initial: float = 1.0
    rho: float = 0.9995
    t_min: float = 1e-4
    iterations: int = 200_000
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not self.t_initial > self.t_min > 0.0:
            raise ValueError("need t_initial > t_min > 0")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass(frozen=True)
class SurrogateScore:
    sum_edge_length_km: float
    edge_count: int
    long_edge_count: int
    l_max_km: float
    e_max: int

    @property
    def mean_link_length_pct(self) -> float:
        if self.edge_count == 0:
            return 0.0
        return 100.0 * self.sum_edge_length_km / (self.edge_count * self.l_max_km)

    @property
    def long_range_fraction_pct(self) -> float:
        if self.edge_count == 0:
            return 0.0
        return 100.0 * self.long_edge_count / self.edge_count

    @property
    def edge_utilization_pct(self) -> float:
        return 100.0 * self.edge_count / self.e_max

    L = mean_link_length_pct
    M = long_range_fraction_pct
    U = edge_utilization_pct


def surrogate_score(t: Topology, degree_budget: int, l_max_km: float,
                    long_range_span: int = LONG_RANGE_SPAN) -> SurrogateScore:
    """Recompute the surrogate accumulators from scratch over ``t``."""
    edges = list(t.edges())
    return SurrogateScore(
        sum_edge_length_km=math.fsum(e.worst_case_km for e in edges),
        edge_count=len(edges),
        long_edge_count=sum(1 for e in edges if e.plane_span > long_range_span),
        l_max_km=l_max_km,
        e_max=(degree_budget * len(t.nodes)) // 2,
    )


def score_delta(before: SurrogateScore, after: SurrogateScore, w: SurrogateWeights) -> float:
    """Weighted improvement; positive favours the edit."""
    return (
        w.alpha_l * (before.L - after.L)
        + w.alpha_m * (after.M - before.M)
        + w.alpha_u * (after.U - before.U)
    )


def accept(delta: float, temperature: float, rng: np.random.Generator) -> bool:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta >= 0:
        return True
    return bool(rng.random() < math.exp(delta / temperature))


# ---------------------------------------------------------------------------
# compiled kernel
# ---------------------------------------------------------------------------
@numba.njit(cache=True)
def _surrogates(sum_len, n_edges, n_long, l_max, e_max):
    if n_edges == 0:
        return 0.0, 0.0, 100.0 * n_edges / e_max
    return (100.0 * sum_len / (n_edges * l_max),
            100.0 * n_long / n_edges,
            100.0 * n_edges / e_max)


@numba.njit(cache=True)
def _detach(adj_e, deg, v, e):
    d = deg[v]
    for k in range(d):
        if adj_e[v, k] == e:
            adj_e[v, k] = adj_e[v, d - 1]
            adj_e[v, d - 1] = -1
            deg[v] = d - 1
            return


@numba.njit(cache=True)
def _attach(adj_e, deg, v, e):
    adj_e[v, deg[v]] = e
    deg[v] += 1


@numba.njit(cache=True)
def _reachable(src, dst, ci, cj, adj_e, deg, stamp, mark, queue):
    if src == dst:
        return True
    mark[0] += 1
    m = mark[0]
    stamp[src] = m
    head = 0
    tail = 1
    queue[0] = src
    while head < tail:
        x = queue[head]
        head += 1
        for k in range(deg[x]):
            e = adj_e[x, k]
            y = ci[e] + cj[e] - x
            if stamp[y] != m:
                if y == dst:
                    return True
                stamp[y] = m
                queue[tail] = y
                tail += 1
    return False


@numba.njit(cache=True, nogil=True)
def _anneal_steps(ci, cj, length, is_long, in_topo, adj_e, deg, acc, temp,
                  budget, e_max, l_max, a_l, a_m, a_u, rho, t_min, rnd,
                  stamp, mark, queue, log_stride, log_offset, log):
    m = ci.size
    accepted_total = 0
    n_log = 0
    for it in range(rnd.shape[0]):
        accepted = False
        c = int(rnd[it, 0] * m)
        if c >= m:
            c = m - 1
        if not in_topo[c]:
            u = ci[c]
            v = cj[c]
            ru = -1
            rv = -1
            if deg[u] >= budget:
                ru = adj_e[u, min(int(rnd[it, 1] * deg[u]), deg[u] - 1)]
            if deg[v] >= budget:
                rv = adj_e[v, min(int(rnd[it, 2] * deg[v]), deg[v] - 1)]
            new_sum = acc[0] + length[c]
            new_n = acc[1] + 1.0
            new_long = acc[2] + (1.0 if is_long[c] else 0.0)
            if ru >= 0:
                new_sum -= length[ru]
                new_n -= 1.0
                new_long -= 1.0 if is_long[ru] else 0.0
            if rv >= 0:
                new_sum -= length[rv]
                new_n -= 1.0
                new_long -= 1.0 if is_long[rv] else 0.0
            l0, m0, u0 = _surrogates(acc[0], acc[1], acc[2], l_max, e_max)
            l1, m1, u1 = _surrogates(new_sum, new_n, new_long, l_max, e_max)
            delta = a_l * (l0 - l1) + a_m * (m1 - m0) + a_u * (u1 - u0)
            if delta >= 0.0 or rnd[it, 3] < math.exp(delta / temp[0]):
                # tentative apply
                for r in (ru, rv):
                    if r >= 0:
                        in_topo[r] = False
                        _detach(adj_e, deg, ci[r], r)
                        _detach(adj_e, deg, cj[r], r)
                in_topo[c] = True
                _attach(adj_e, deg, u, c)
                _attach(adj_e, deg, v, c)
                ok = True
                for r in (ru, rv):
                    if ok and r >= 0:
                        ok = _reachable(ci[r], cj[r], ci, cj, adj_e, deg, stamp, mark, queue)
                if ok:
                    accepted = True
                    acc[0] = new_sum
                    acc[1] = new_n
                    acc[2] = new_long
                else:
                    in_topo[c] = False
                    _detach(adj_e, deg, u, c)
                    _detach(adj_e, deg, v, c)
                    for r in (ru, rv):
                        if r >= 0:
                            in_topo[r] = True
                            _attach(adj_e, deg, ci[r], r)
                            _attach(adj_e, deg, cj[r], r)
        if accepted:
            accepted_total += 1
        if log_stride > 0 and (log_offset + it) % log_stride == 0 and n_log < log.shape[0]:
            lx, mx, ux = _surrogates(acc[0], acc[1], acc[2], l_max, e_max)
            log[n_log, 0] = log_offset + it
            log[n_log, 1] = temp[0]
            log[n_log, 2] = lx
            log[n_log, 3] = mx
            log[n_log, 4] = ux
            log[n_log, 5] = 1.0 if accepted else 0.0
            n_log += 1
        temp[0] = max(t_min, rho * temp[0])
    return accepted_total, n_log


@numba.njit(cache=True)
def _residual_fill(order, ci, cj, length, is_long, in_topo, adj_e, deg, acc, budget):
    added = 0
    for c in order:
        if in_topo[c]:
            continue
        u = ci[c]
        v = cj[c]
        if deg[u] < budget and deg[v] < budget:
            in_topo[c] = True
            _attach(adj_e, deg, u, c)
            _attach(adj_e, deg, v, c)
            acc[0] += length[c]
            acc[1] += 1.0
            acc[2] += 1.0 if is_long[c] else 0.0
            added += 1
    return added


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------
def candidate_components(candidates: CandidateLinks) -> tuple[int, np.ndarray]:
    n = len(candidates.snapshot)
    g = coo_matrix((np.ones(len(candidates)), (candidates.i, candidates.j)), shape=(n, n))
    return _cc(g, directed=False)


def _raise_if_disconnected(candidates: CandidateLinks) -> None:
    n_comp, labels = candidate_components(candidates)
    if n_comp > 1:
        sizes = sorted(np.bincount(labels).tolist(), reverse=True)
        raise InfeasibleInput(n_comp, sizes)


def random_spanning_tree(candidates: CandidateLinks, degree_budget: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Seeded random spanning tree over the candidates under the degree budget.

    Kruskal over a random edge order; if the budget blocks completion, a
    second shortest-first pass finishes it.  Returns candidate row numbers.
    """
    n = len(candidates.snapshot)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    deg = [0] * n
    chosen = []
    ci, cj = candidates.i.tolist(), candidates.j.tolist()
    for order in (rng.permutation(len(candidates)), _length_order(candidates)):
        for r in order.tolist():
            if len(chosen) == n - 1:
                break
            a, b = ci[r], cj[r]
            if deg[a] >= degree_budget or deg[b] >= degree_budget:
                continue
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                deg[a] += 1
                deg[b] += 1
                chosen.append(r)
    if len(chosen) != n - 1:
        roots = {find(v) for v in range(n)}
        raise InfeasibleInput(len(roots), [])
    return np.array(chosen, dtype=np.int64)


def _length_order(candidates: CandidateLinks) -> np.ndarray:
    ids = np.asarray(candidates.snapshot.ids)
    return np.lexsort((ids[candidates.j], ids[candidates.i], candidates.worst_km))


class Annealer:
    """Stateful annealing run; :func:`anneal` is the one-shot wrapper.

    Random draws come from a NumPy generator, four per iteration, so a run
    split into several :meth:`run` calls is identical to a single call.
    """

    def __init__(
        self,
        snapshot: Snapshot,
        candidates: CandidateLinks,
        degree_budget: int,
        weights: SurrogateWeights,
        schedule: AnnealSchedule,
        warm_start: Topology | None = None,
        long_range_span: int = LONG_RANGE_SPAN,
        start_temperature: float | None = None,
        l_max_km: float | None = None,
    ):
        if len(candidates) == 0:
            raise ValueError("annealing needs a non-empty candidate set")
        if degree_budget < 2:
            raise ValueError("degree_budget must be at least 2")
        _raise_if_disconnected(candidates)
        self.snapshot = snapshot
        self.candidates = candidates
        self.degree_budget = degree_budget
        self.weights = weights
        self.schedule = schedule
        self.long_range_span = long_range_span
        self.rng = np.random.default_rng(schedule.rng_seed)
        self.l_max_km = d_stab(snapshot.config) if l_max_km is None else l_max_km
        n = len(snapshot)
        self.e_max = (degree_budget * n) // 2
        self.ci = candidates.i.copy()
        self.cj = candidates.j.copy()
        self.length = candidates.worst_km.copy()
        self.is_long = candidates.span > long_range_span
        self.in_topo = np.zeros(len(candidates), dtype=np.bool_)
        self.adj_e = np.full((n, degree_budget), -1, dtype=np.int64)
        self.deg = np.zeros(n, dtype=np.int64)
        self.acc = np.zeros(3)
        self.temp = np.array([schedule.t_initial if start_temperature is None else start_temperature])
        self.iteration = 0
        self.accepted = 0
        self._stamp = np.zeros(n, dtype=np.int64)
        self._mark = np.zeros(1, dtype=np.int64)
        self._queue = np.zeros(n, dtype=np.int64)

        rows = self._warm_rows(warm_start) if warm_start is not None else \
            random_spanning_tree(candidates, degree_budget, self.rng)
        for r in rows.tolist():
            self._insert(r)
        if warm_start is not None and not self.topology().is_connected():
            raise InfeasibleDeployment("warm-start topology must be connected")

    def _warm_rows(self, warm: Topology) -> np.ndarray:
        lookup = self.candidates.lookup()
        rows = []
        for e in warm.edges():
            r = lookup.get(e.key)
            if r is None:
                raise ValueError(f"warm-start edge {e.key} is not a stable candidate")
            rows.append(r)
        return np.array(rows, dtype=np.int64)

    def _insert(self, r: int) -> None:
        a, b = self.ci[r], self.cj[r]
        if self.deg[a] >= self.degree_budget or self.deg[b] >= self.degree_budget:
            raise ValueError("initial topology exceeds the degree budget")
        self.in_topo[r] = True
        _attach(self.adj_e, self.deg, a, r)
        _attach(self.adj_e, self.deg, b, r)
        self.acc += (self.length[r], 1.0, 1.0 if self.is_long[r] else 0.0)

    @property
    def temperature(self) -> float:
        return float(self.temp[0])

    def run(self, iterations: int, log_stride: int = 0) -> np.ndarray:
        """Advance ``iterations`` proposals; returns sampled log rows
        (iteration, temperature, L, M, U, accepted)."""
        if iterations <= 0:
            return np.zeros((0, 6))
        rnd = self.rng.random((iterations, 4))
        n_log = 0 if log_stride <= 0 else iterations // log_stride + 1
        log = np.zeros((n_log, 6))
        w = self.weights
        sch = self.schedule
        accepted, used = _anneal_steps(
            self.ci, self.cj, self.length, self.is_long, self.in_topo, self.adj_e, self.deg,
            self.acc, self.temp, self.degree_budget, float(self.e_max), self.l_max_km,
            w.alpha_l, w.alpha_m, w.alpha_u, sch.rho, sch.t_min, rnd,
            self._stamp, self._mark, self._queue, log_stride, self.iteration, log,
        )
        self.iteration += iterations
        self.accepted += accepted
        return log[:used]

    def residual_fill(self) -> int:
        return int(_residual_fill(
            _length_order(self.candidates), self.ci, self.cj, self.length, self.is_long,
            self.in_topo, self.adj_e, self.deg, self.acc, self.degree_budget,
        ))

    def score(self) -> SurrogateScore:
        return SurrogateScore(float(self.acc[0]), int(round(self.acc[1])), int(round(self.acc[2])),
                              self.l_max_km, self.e_max)

    def recompute_score(self) -> SurrogateScore:
        rows = np.flatnonzero(self.in_topo)
        return SurrogateScore(math.fsum(self.length[rows].tolist()), int(rows.size),
                              int(self.is_long[rows].sum()), self.l_max_km, self.e_max)

    def edge_rows(self) -> np.ndarray:
        return np.flatnonzero(self.in_topo)

    def topology(self, provenance: Provenance = Provenance.SA) -> Topology:
        t = Topology(self.snapshot.ids, self.degree_budget, provenance, self.snapshot.label)
        for r in self.edge_rows().tolist():
            t.add_edge(self.candidates[r])
        return t


@dataclass
class AnnealResult:
    topology: Topology
    score: SurrogateScore
    log: np.ndarray = field(repr=False)
    accepted: int = 0


def anneal(
    snapshot: Snapshot,
    candidates: CandidateLinks,
    degree_budget: int,
    weights: SurrogateWeights,
    schedule: AnnealSchedule,
    warm_start: Topology | None = None,
    *,
    long_range_span: int = LONG_RANGE_SPAN,
    start_temperature: float | None = None,
    log_stride: int = 0,
    provenance: Provenance = Provenance.SA,
) -> AnnealResult:
    """Anneal for exactly ``schedule.iterations`` proposals, then fill spare
    degree with the shortest remaining stable links."""
    ann = Annealer(snapshot, candidates, degree_budget, weights, schedule, warm_start,
                   long_range_span, start_temperature)
    log = ann.run(schedule.iterations, log_stride)
    ann.residual_fill()
    return AnnealResult(ann.topology(provenance), ann.score(), log, ann.accepted)


def run_log_to_csv(log: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,temperature,L,M,U,accepted\n")
        for it, temp, l, m, u, acc in log:
            fh.write(f"{int(it)},{temp:.6g},{l:.6f},{m:.6f},{u:.6f},{int(acc)}\n")


# ---------------------------------------------------------------------------
# weight sweeps
# ---------------------------------------------------------------------------
@dataclass
class SweepResult:
    weights: SurrogateWeights
    topology: Topology = field(repr=False)
    report: EvalReport = field(repr=False)
    score: SurrogateScore

    @property
    def delay_ms(self) -> float:
        return self.report.avg_delay_ms

    @property
    def hops(self) -> float:
        return self.report.avg_hops


def weight_grid(values=(1, 2, 3, 4, 5)) -> list[SurrogateWeights]:
    """Every (alpha_L, alpha_U, alpha_M) combination of ``values``, table order."""
    return [SurrogateWeights.from_table(l, u, m) for l in values for u in values for m in values]


def pareto_sweep(
    snapshot: Snapshot,
    candidates: CandidateLinks,
    budget: int,
    weight_grid: list[SurrogateWeights],
    sched: AnnealSchedule,
) -> list[SweepResult]:
    """Anneal and evaluate one design per weight triple.

    Every run uses ``sched.rng_seed`` so designs differ only by weights.
    """
    out = []
    for w in weight_grid:
        res = anneal(snapshot, candidates, budget, w, sched)
        out.append(SweepResult(w, res.topology, shortest_path_metrics(res.topology), res.score))
    return out


def pareto_front(results: list[SweepResult]) -> list[SweepResult]:
    """Designs not dominated in (delay, hops), sorted by delay."""
    pts = sorted(results, key=lambda r: (r.delay_ms, r.hops))
    front = []
    best_hops = math.inf
    for r in pts:
        if r.hops < best_hops:
            front.append(r)
            best_hops = r.hops
    return front
