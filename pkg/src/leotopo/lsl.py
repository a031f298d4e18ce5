"""Long-Short Links construction: plane rings plus cyclic multi-plane shortcuts."""
from __future__ import annotations

from dataclasses import dataclass

from .shell import Snapshot
from .stable import CandidateEdge, CandidateLinks
from .topology import Provenance, Topology, intra_plane_ring


@dataclass(frozen=True)
class LslParams:
    max_plane_span: int
    degree_budget: int = 4

    def validate(self, num_planes: int) -> None:
        if not 1 <= self.max_plane_span <= max(1, num_planes // 2):
            raise ValueError(
                f"max_plane_span must lie in [1, {num_planes // 2}] for {num_planes} planes"
            )
        if self.degree_budget < 2:
            raise ValueError("degree_budget must be at least 2")


def span_cycle(plane_index: int, max_span: int) -> list[int]:
    """Descending D..1 on even planes, ascending 1..D on odd planes."""
    desc = list(range(max_span, 0, -1))
    return desc if plane_index % 2 == 0 else desc[::-1]


def _options_by_plane(snapshot: Snapshot, candidates: CandidateLinks) -> list[dict[int, list]]:
    """Per satellite index: target plane -> [(worst_km, target_id, row)] sorted."""
    planes = snapshot.arrays()[0]
    ids = snapshot.ids
    out: list[dict[int, list]] = [dict() for _ in range(len(snapshot))]
    for row, (a, b, w) in enumerate(zip(candidates.i.tolist(), candidates.j.tolist(),
                                        candidates.worst_km.tolist())):
        out[a].setdefault(int(planes[b]), []).append((w, ids[b], row))
        out[b].setdefault(int(planes[a]), []).append((w, ids[a], row))
    for per_plane in out:
        for opts in per_plane.values():
            opts.sort()
    return out


def add_inter_orbit_links(
    t: Topology, snapshot: Snapshot, candidates: CandidateLinks, params: LslParams
) -> int:
    """Run the cyclic shortcut pass over ``t`` in place; returns links added.

    Planes are visited in RAAN order and satellites by anomaly.  Each
    satellite targets the plane ``d`` steps east, with ``d`` cycling through
    :func:`span_cycle`, and links to the closest (worst-case distance)
    stable candidate there that still has degree to spare.  An empty target
    plane consumes its turn in the cycle, and so does a target plane the
    satellite already links into; that keeps a rerun over an existing
    design from stacking a second link on the same turn.
    """
    n_planes = snapshot.config.num_planes
    members = snapshot.plane_members()
    options = _options_by_plane(snapshot, candidates)
    plane_of = {s.id: s.plane_index for s in snapshot.satellites}
    added = 0
    for p, sats in members.items():
        cycle = span_cycle(p, params.max_plane_span)
        for k, sat in enumerate(sats):
            q = (p + cycle[k % len(cycle)]) % n_planes
            if q == p or q not in members or t.spare(sat.id) < 1:
                continue
            if any(plane_of[w] == q for w in t.neighbors(sat.id)):
                continue
            for _, target, row in options[snapshot.index_of(sat.id)].get(q, ()):
                if t.spare(target) >= 1 and not t.has_edge(sat.id, target):
                    t.add_edge(candidates[row])
                    added += 1
                    break
    return added


def build_lsl(snapshot: Snapshot, candidates: CandidateLinks, params: LslParams) -> Topology:
    params.validate(snapshot.config.num_planes)
    t = Topology(snapshot.ids, params.degree_budget, Provenance.LSL, snapshot.label)
    for e in intra_plane_ring(snapshot, candidates):
        t.try_add(e)
    add_inter_orbit_links(t, snapshot, candidates, params)
    return t


def ring_edges(snapshot: Snapshot, candidates: CandidateLinks) -> list[CandidateEdge]:
    return intra_plane_ring(snapshot, candidates)
