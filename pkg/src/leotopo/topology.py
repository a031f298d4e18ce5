"""Degree-bounded ISL graph and the grid baselines."""
from __future__ import annotations

import csv
import enum
from collections import deque
from typing import Iterable, Iterator

import numpy as np

from .shell import Snapshot, d_stab, max_separations
from .stable import CandidateEdge, CandidateLinks, _plane_spans


class Provenance(str, enum.Enum):
    PLUS_GRID = "PlusGrid"
    THREE_ISL_GRID = "ThreeIslGrid"
    LSL = "LSL"
    SA = "SA"
    FLOOR = "Floor"
    INCREMENTAL = "Incremental"


class DegreeViolation(ValueError):
    """Adding the edge would push an endpoint past the degree budget."""

    def __init__(self, edge, saturated):
        super().__init__(f"edge {edge} exceeds degree budget at {sorted(saturated)}")
        self.edge = edge
        self.saturated = saturated


class InfeasibleDeployment(ValueError):
    """The requested construction cannot be realised on this snapshot."""


class Topology:
    """Undirected ISL graph over satellite ids.

    Each edge keeps its :class:`CandidateEdge` record so both the worst-case
    and the snapshot distance travel with the graph.  ``degree_budget=None``
    means unbounded (the theoretical floor).
    """

    def __init__(
        self,
        nodes: Iterable[int],
        degree_budget: int | None,
        provenance: Provenance = Provenance.INCREMENTAL,
        label: str = "",
    ):
        self.nodes = sorted(set(nodes))
        self.degree_budget = degree_budget
        self.provenance = Provenance(provenance)
        self.label = label
        self._adj: dict[int, set[int]] = {v: set() for v in self.nodes}
        self._edges: dict[tuple[int, int], CandidateEdge] = {}

    # -- basic queries -------------------------------------------------
    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def spare(self, v: int) -> float:
        if self.degree_budget is None:
            return float("inf")
        return self.degree_budget - len(self._adj[v])

    def neighbors(self, v: int) -> set[int]:
        return self._adj[v]

    def has_edge(self, a: int, b: int) -> bool:
        return _key(a, b) in self._edges

    def edge(self, a: int, b: int) -> CandidateEdge:
        return self._edges[_key(a, b)]

    def edges(self) -> Iterator[CandidateEdge]:
        for key in sorted(self._edges):
            yield self._edges[key]

    def edge_keys(self) -> set[tuple[int, int]]:
        return set(self._edges)

    def degrees(self) -> dict[int, int]:
        return {v: len(n) for v, n in self._adj.items()}

    # -- mutation --------------------------------------------------------
    def fits(self, a: int, b: int) -> bool:
        return self.spare(a) >= 1 and self.spare(b) >= 1

    def add_edge(self, e: CandidateEdge) -> None:
        """Insert ``e``; re-adding an existing edge is a no-op.

        Raises :class:`DegreeViolation` (graph unchanged) when an endpoint
        is already at the budget.
        """
        a, b = e.key
        if a == b:
            raise ValueError("self-loops are not allowed")
        if a not in self._adj or b not in self._adj:
            raise KeyError(f"edge endpoints {a}, {b} must be nodes of the topology")
        if (a, b) in self._edges:
            return
        saturated = [v for v in (a, b) if self.spare(v) < 1]
        if saturated:
            raise DegreeViolation((a, b), saturated)
        self._edges[(a, b)] = e
        self._adj[a].add(b)
        self._adj[b].add(a)

    def try_add(self, e: CandidateEdge) -> bool:
        a, b = e.key
        if (a, b) in self._edges or not self.fits(a, b):
            return False
        self.add_edge(e)
        return True

    def remove_edge(self, a: int, b: int) -> CandidateEdge:
        e = self._edges.pop(_key(a, b))
        self._adj[a].discard(b)
        self._adj[b].discard(a)
        return e

    def copy(self, provenance: Provenance | None = None) -> Topology:
        t = Topology(self.nodes, self.degree_budget, provenance or self.provenance, self.label)
        for key, e in self._edges.items():
            t._edges[key] = e
            t._adj[key[0]].add(key[1])
            t._adj[key[1]].add(key[0])
        return t

    # -- connectivity ------------------------------------------------------
    def connected_components(self) -> list[set[int]]:
        """Node sets by connectivity, largest first (ties: smallest member id)."""
        seen: set[int] = set()
        comps = []
        for start in self.nodes:
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            while queue:
                v = queue.popleft()
                for w in self._adj[v]:
                    if w not in comp:
                        comp.add(w)
                        queue.append(w)
            seen |= comp
            comps.append(comp)
        comps.sort(key=lambda c: (-len(c), min(c)))
        return comps

    def is_connected(self) -> bool:
        return len(self.nodes) <= 1 or len(self.connected_components()) == 1

    # -- export ------------------------------------------------------------
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, worst_km, inst_km) with ``i``/``j`` indices into ``self.nodes``."""
        index = {v: k for k, v in enumerate(self.nodes)}
        keys = sorted(self._edges)
        i = np.fromiter((index[a] for a, _ in keys), dtype=np.int64, count=len(keys))
        j = np.fromiter((index[b] for _, b in keys), dtype=np.int64, count=len(keys))
        worst = np.fromiter((self._edges[k].worst_case_km for k in keys), dtype=float, count=len(keys))
        inst = np.fromiter((self._edges[k].instantaneous_km for k in keys), dtype=float, count=len(keys))
        return i, j, worst, inst

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# provenance={self.provenance.value}\n")
            fh.write(f"# degree_budget={'none' if self.degree_budget is None else self.degree_budget}\n")
            fh.write(f"# label={self.label}\n")
            fh.write(f"# nodes={len(self.nodes)}\n")
            w = csv.writer(fh)
            w.writerow(["sat_a", "sat_b", "worst_case_km", "instantaneous_km"])
            for e in self.edges():
                a, b = e.key
                w.writerow([a, b, f"{e.worst_case_km:.6f}", f"{e.instantaneous_km:.6f}"])

    @classmethod
    def from_csv(cls, path, snapshot: Snapshot | None = None) -> Topology:
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    k, _, v = line[1:].strip().partition("=")
                    meta[k.strip()] = v.strip()
                    continue
                rows.append(line)
        reader = csv.DictReader(rows)
        edges = []
        for lineno, row in enumerate(reader, start=2):
            try:
                edges.append((int(row["sat_a"]), int(row["sat_b"]),
                              float(row["worst_case_km"]), float(row["instantaneous_km"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed edge row {lineno}: {row}") from exc
        budget = meta.get("degree_budget", "none")
        budget = None if budget == "none" else int(budget)
        if snapshot is not None:
            nodes = snapshot.ids
        else:
            nodes = {v for a, b, _, _ in edges for v in (a, b)}
        t = cls(nodes, budget, Provenance(meta.get("provenance", "Incremental")), meta.get("label", ""))
        n_planes = snapshot.config.num_planes if snapshot is not None else None
        for a, b, worst, inst in edges:
            span = -1
            if snapshot is not None:
                pa, pb = snapshot.get(a).plane_index, snapshot.get(b).plane_index
                span = int(_plane_spans(np.array(pa), np.array(pb), n_planes))
            t.add_edge(CandidateEdge(min(a, b), max(a, b), worst, inst, span))
        return t

    def __repr__(self) -> str:
        return (f"Topology({self.provenance.value}, |V|={len(self.nodes)}, "
                f"|E|={self.num_edges}, budget={self.degree_budget})")


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def connected_components(t: Topology) -> list[set[int]]:
    return t.connected_components()


# ---------------------------------------------------------------------------
# shared construction helpers
# ---------------------------------------------------------------------------
def intra_plane_ring(snapshot: Snapshot, candidates: CandidateLinks) -> list[CandidateEdge]:
    """Consecutive-anomaly links of every plane that are stable.

    Missing satellites are skipped over; a gap whose link is not stable is
    left open.
    """
    edges = []
    seen = set()
    for members in snapshot.plane_members().values():
        m = len(members)
        if m < 2:
            continue
        for k in range(m):
            a, b = members[k].id, members[(k + 1) % m].id
            key = _key(a, b)
            if a == b or key in seen:
                continue
            seen.add(key)
            e = candidates.find(a, b)
            if e is not None:
                edges.append(e)
    return edges


def nonempty_planes(snapshot: Snapshot) -> list[int]:
    return sorted({s.plane_index for s in snapshot.satellites})


def _pairs_between(candidates: CandidateLinks, planes: np.ndarray, p: int, q: int) -> list[int]:
    pi, pj = planes[candidates.i], planes[candidates.j]
    rows = np.flatnonzero(((pi == p) & (pj == q)) | ((pi == q) & (pj == p)))
    return rows.tolist()


def _sorted_by_length(candidates: CandidateLinks, rows) -> list[int]:
    ids = np.asarray(candidates.snapshot.ids)
    rows = np.asarray(rows, dtype=np.int64)
    order = np.lexsort((ids[candidates.j[rows]], ids[candidates.i[rows]], candidates.worst_km[rows]))
    return rows[order].tolist()


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------
def build_plus_grid(snapshot: Snapshot, candidates: CandidateLinks, degree_budget: int = 4) -> Topology:
    """+Grid: plane rings plus one link towards each neighbouring non-empty plane.

    Links between consecutive non-empty planes are chosen by greedy
    nearest matching on worst-case distance, so each satellite gets at most
    one eastward and one westward partner and may end with fewer than four
    links under partial deployment.
    """
    t = Topology(snapshot.ids, degree_budget, Provenance.PLUS_GRID, snapshot.label)
    for e in intra_plane_ring(snapshot, candidates):
        t.try_add(e)
    planes_present = nonempty_planes(snapshot)
    if len(planes_present) < 2:
        return t
    planes = snapshot.arrays()[0]
    ids = snapshot.ids
    east_used: set[int] = set()
    west_used: set[int] = set()
    pairs = list(zip(planes_present, planes_present[1:] + planes_present[:1]))
    if len(planes_present) == 2:
        pairs = pairs[:1]
    for p, q in pairs:
        rows = _sorted_by_length(candidates, _pairs_between(candidates, planes, p, q))
        for r in rows:
            a, b = ids[candidates.i[r]], ids[candidates.j[r]]
            if planes[candidates.i[r]] != p:
                a, b = b, a
            if a in east_used or b in west_used:
                continue
            if t.try_add(candidates[r]):
                east_used.add(a)
                west_used.add(b)
    return t


def build_three_isl_grid(snapshot: Snapshot, candidates: CandidateLinks) -> Topology:
    """3-ISL brick-wall grid: plane rings plus one alternating inter-plane link.

    In plane ``p`` the satellite of anomaly rank ``k`` links east when
    ``p + k`` is even and otherwise receives a westward link, so every
    satellite ends with exactly three links on a full even shell.
    """
    members = snapshot.plane_members()
    counts = {len(m) for m in members.values()}
    if len(members) != snapshot.config.num_planes or len(counts) != 1:
        raise InfeasibleDeployment(
            "3-ISL-Grid needs every plane populated with the same number of satellites"
        )
    per_plane = counts.pop()
    if per_plane % 2:
        raise InfeasibleDeployment("3-ISL-Grid needs an even number of satellites per plane")
    t = Topology(snapshot.ids, 3, Provenance.THREE_ISL_GRID, snapshot.label)
    for e in intra_plane_ring(snapshot, candidates):
        t.try_add(e)
    n_planes = snapshot.config.num_planes
    if n_planes < 2:
        return t
    receives_west = {}
    for p, sats in members.items():
        for k, s in enumerate(sats):
            receives_west[s.id] = (p + k) % 2 == 1
    for p in range(n_planes if n_planes > 2 else 1):
        q = (p + 1) % n_planes
        for k, s in enumerate(members[p]):
            if (p + k) % 2:
                continue
            options = []
            for target in members[q]:
                if not receives_west[target.id] or t.spare(target.id) < 1:
                    continue
                e = candidates.find(s.id, target.id)
                if e is not None:
                    options.append((e.worst_case_km, target.id, e))
            if options:
                t.try_add(min(options, key=lambda o: (o[0], o[1]))[2])
    return t


def build_theoretical_floor(
    snapshot: Snapshot, candidates: CandidateLinks | None = None, stable_only: bool = False
) -> Topology:
    """Degree-unconstrained graph used as a delay lower bound.

    By default every pair within ``d_stab`` at the snapshot instant is
    linked; ``stable_only=True`` restricts to the stable candidate set.
    """
    t = Topology(snapshot.ids, None, Provenance.FLOOR, snapshot.label)
    if stable_only:
        if candidates is None:
            raise ValueError("stable_only floor needs the candidate set")
        for e in candidates:
            t.add_edge(e)
        return t
    n = len(snapshot)
    if n < 2:
        return t
    cfg = snapshot.config
    limit = d_stab(cfg)
    planes, raan, anom = snapshot.arrays()
    pos = snapshot.positions()
    ids = snapshot.ids
    iu, ju = np.triu_indices(n, k=1)
    inst = np.linalg.norm(pos[iu] - pos[ju], axis=-1)
    ok = inst <= limit
    iu, ju, inst = iu[ok], ju[ok], inst[ok]
    worst = max_separations((raan[ju] - raan[iu]) % 360.0, (anom[ju] - anom[iu]) % 360.0, cfg)
    spans = _plane_spans(planes[iu], planes[ju], cfg.num_planes)
    for a, b, w, d, s in zip(iu.tolist(), ju.tolist(), worst.tolist(), inst.tolist(), spans.tolist()):
        t.add_edge(CandidateEdge(ids[a], ids[b], w, d, s))
    return t
