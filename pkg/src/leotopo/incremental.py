"""Day-to-day topology maintenance under node turnover.

Both updaters start by keeping every previous link that is still a stable
candidate (shortest first, under the degree budget), then repair
connectivity, then spend leftover degree: LSL reruns its inter-orbit pass,
SA anneals briefly from the repaired graph.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .annealing import AnnealSchedule, SurrogateWeights, anneal, _raise_if_disconnected
from .lsl import LslParams, add_inter_orbit_links
from .shell import Snapshot
from .stable import CandidateEdge, CandidateLinks, build_stable_link_set
from .topology import InfeasibleDeployment, Provenance, Topology, intra_plane_ring

logger = logging.getLogger(__name__)

ENDPOINT_REMOVED = "endpoint-removed"
INFEASIBLE_NOW = "infeasible-now"

DEFAULT_INCREMENTAL_ITERATIONS = 100_000


@dataclass
class DayTransition:
    prev_snapshot: Snapshot
    prev_topology: Topology
    next_snapshot: Snapshot
    next_candidates: CandidateLinks | None = None

    def __post_init__(self):
        if self.next_candidates is None:
            self.next_candidates = build_stable_link_set(self.next_snapshot)

    @property
    def prev(self) -> tuple[Snapshot, Topology]:
        return self.prev_snapshot, self.prev_topology


@dataclass(frozen=True)
class BreakageReport:
    selected_prev: int
    broken: int
    causes: dict = field(default_factory=dict)

    @property
    def breakage_rate_pct(self) -> float:
        return 0.0 if self.selected_prev == 0 else 100.0 * self.broken / self.selected_prev


def measure_breakage(tr: DayTransition) -> BreakageReport:
    """Count previous-day links that cannot be kept on the next day."""
    causes = Counter({ENDPOINT_REMOVED: 0, INFEASIBLE_NOW: 0})
    selected = 0
    for e in tr.prev_topology.edges():
        selected += 1
        a, b = e.key
        if a not in tr.next_snapshot or b not in tr.next_snapshot:
            causes[ENDPOINT_REMOVED] += 1
        elif (a, b) not in tr.next_candidates:
            causes[INFEASIBLE_NOW] += 1
    return BreakageReport(selected, sum(causes.values()), dict(causes))


def edge_churn(before: Topology, after: Topology) -> int:
    return len(before.edge_keys() ^ after.edge_keys())


# ---------------------------------------------------------------------------
# shared steps
# ---------------------------------------------------------------------------
def retain_feasible(tr: DayTransition, degree_budget: int | None,
                    provenance: Provenance = Provenance.INCREMENTAL) -> Topology:
    """Previous links still stable on the next day, added shortest first.

    Records are refreshed from the next day's candidates so instantaneous
    distances match the new snapshot.
    """
    snap = tr.next_snapshot
    t = Topology(snap.ids, degree_budget, provenance, snap.label)
    kept = []
    for e in tr.prev_topology.edges():
        a, b = e.key
        if a in snap and b in snap:
            fresh = tr.next_candidates.find(a, b)
            if fresh is not None:
                kept.append(fresh)
    kept.sort(key=lambda e: (e.worst_case_km, e.key))
    dropped = sum(1 for e in kept if not t.try_add(e))
    if dropped:
        logger.info("%s: %d feasible links dropped by the degree budget", snap.label, dropped)
    return t


def _evict_for(t: Topology, v: int, protected: set[tuple[int, int]]) -> bool:
    """Free one degree at ``v``; stale same-plane links go first, then the
    longest cross-plane link.  Returns False if nothing can be evicted."""
    options = [t.edge(v, w) for w in t.neighbors(v)]
    options = [e for e in options if e.key not in protected]
    if not options:
        return False
    victim = max(options, key=lambda e: (e.plane_span == 0, e.worst_case_km, e.key))
    logger.info("evicting %s (span %d, %.1f km) to make room at %d",
                victim.key, victim.plane_span, victim.worst_case_km, v)
    t.remove_edge(*victim.key)
    return True


def refresh_rings(t: Topology, snapshot: Snapshot, candidates: CandidateLinks) -> int:
    """Make sure every stable ring link of the new satellite set is present."""
    ring = intra_plane_ring(snapshot, candidates)
    protected = {e.key for e in ring}
    added = 0
    for e in ring:
        if t.has_edge(*e.key):
            continue
        for v in e.key:
            while t.spare(v) < 1:
                if not _evict_for(t, v, protected):
                    break
        if t.try_add(e):
            added += 1
    return added


def _still_connected_without(t: Topology, e: CandidateEdge) -> bool:
    a, b = e.key
    t.remove_edge(a, b)
    try:
        seen = {a}
        stack = [a]
        while stack:
            x = stack.pop()
            if x == b:
                return True
            for y in t.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False
    finally:
        t.add_edge(e)


def repair_connectivity(t: Topology, candidates: CandidateLinks) -> list[CandidateEdge]:
    """Attach smaller components to the largest via the shortest stable link.

    Links with spare degree at both ends are preferred.  If none exists, the
    shortest joining link is forced in by evicting, at each saturated end,
    the longest incident link whose loss keeps the graph no less connected.
    """
    snap = candidates.snapshot
    added = []
    while True:
        comps = t.connected_components()
        if len(comps) <= 1:
            return added
        label = np.zeros(len(snap), dtype=np.int64)
        for k, comp in enumerate(comps):
            for v in comp:
                label[snap.index_of(v)] = k
        li, lj = label[candidates.i], label[candidates.j]
        rows = np.flatnonzero((li == 0) != (lj == 0))
        if rows.size == 0:
            raise InfeasibleDeployment(
                f"no stable link joins {len(comps) - 1} component(s) to the largest"
            )
        rows = rows[np.argsort(candidates.worst_km[rows], kind="stable")]
        choice = None
        for r in rows.tolist():
            e = candidates[r]
            if t.fits(*e.key):
                choice = e
                break
        if choice is None:
            choice = _force_room(t, candidates, rows)
        t.add_edge(choice)
        added.append(choice)


def _force_room(t: Topology, candidates: CandidateLinks, rows) -> CandidateEdge:
    for r in rows.tolist():
        e = candidates[r]
        victims = []
        ok = True
        for v in e.key:
            if t.spare(v) >= 1:
                continue
            opts = sorted((t.edge(v, w) for w in t.neighbors(v)),
                          key=lambda x: (-x.worst_case_km, x.key))
            pick = next((x for x in opts if _still_connected_without(t, x)), None)
            if pick is None:
                ok = False
                break
            victims.append(pick)
        if ok:
            for x in victims:
                logger.info("repair evicts %s", x.key)
                t.remove_edge(*x.key)
            return e
    raise InfeasibleDeployment("connectivity repair cannot free degree for any joining link")


# ---------------------------------------------------------------------------
# updaters
# ---------------------------------------------------------------------------
def update_lsl(tr: DayTransition, params: LslParams) -> Topology:
    _check_provenance(tr.prev_topology, (Provenance.LSL, Provenance.INCREMENTAL))
    params.validate(tr.next_snapshot.config.num_planes)
    _raise_if_disconnected(tr.next_candidates)
    t = retain_feasible(tr, params.degree_budget)
    refresh_rings(t, tr.next_snapshot, tr.next_candidates)
    repair_connectivity(t, tr.next_candidates)
    add_inter_orbit_links(t, tr.next_snapshot, tr.next_candidates, params)
    return t


def update_sa(
    tr: DayTransition,
    w: SurrogateWeights,
    sched: AnnealSchedule,
    *,
    start_temperature: float | None = None,
) -> Topology:
    """Warm-started re-optimisation over the next day's candidates.

    The run follows ``sched`` from its initial temperature; pass
    ``start_temperature`` (e.g. ``sched.t_min``) for a near-greedy polish.
    A day with the same satellites and no broken link keeps the previous
    design untouched instead of annealing it again.
    """
    _check_provenance(tr.prev_topology, (Provenance.SA, Provenance.INCREMENTAL))
    budget = tr.prev_topology.degree_budget
    _raise_if_disconnected(tr.next_candidates)
    t = retain_feasible(tr, budget)
    if set(tr.prev_snapshot.ids) == set(tr.next_snapshot.ids) and t.num_edges == tr.prev_topology.num_edges:
        return t
    repair_connectivity(t, tr.next_candidates)
    result = anneal(tr.next_snapshot, tr.next_candidates, budget, w, sched, warm_start=t,
                    start_temperature=start_temperature, provenance=Provenance.INCREMENTAL)
    return result.topology


def _check_provenance(t: Topology, allowed: Sequence[Provenance]) -> None:
    if t.provenance not in allowed:
        raise ValueError(
            f"previous topology has provenance {t.provenance.value}; expected one of "
            + ", ".join(p.value for p in allowed)
        )


# ---------------------------------------------------------------------------
# multi-day driver
# ---------------------------------------------------------------------------
@dataclass
class DayResult:
    label: str
    topology: Topology
    breakage: BreakageReport | None
    recomputed: bool


def run_series(
    snapshots: Iterable[Snapshot],
    build: Callable[[Snapshot, CandidateLinks], Topology],
    update: Callable[[DayTransition], Topology] | None,
    realign_every: int = 0,
) -> Iterable[DayResult]:
    """Yield one result per day.

    Day one is built from scratch.  Later days use ``update`` (or ``build``
    when ``update`` is None, i.e. recompute daily); with ``realign_every=k``
    every k-th day is rebuilt from scratch instead.
    """
    prev_snap = prev_topo = None
    for day, snap in enumerate(snapshots):
        cand = build_stable_link_set(snap)
        breakage = None
        if prev_topo is not None:
            tr = DayTransition(prev_snap, prev_topo, snap, cand)
            breakage = measure_breakage(tr)
        fresh = prev_topo is None or update is None or (realign_every > 0 and day % realign_every == 0)
        if fresh:
            topo = build(snap, cand)
        else:
            topo = update(tr)
        yield DayResult(snap.label, topo, breakage, fresh)
        prev_snap, prev_topo = snap, topo
