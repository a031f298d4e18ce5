"""Stable-link region and per-snapshot candidate edges.

A pair of same-shell satellites keeps a constant angular offset
(d_raan, d_anomaly) as both orbit, so whether their link survives a full
orbit is a property of the offset alone.  The region is tabulated once per
shell geometry on a regular offset grid and reused for every daily snapshot.
"""
from __future__ import annotations

import csv
import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .shell import ShellConfig, Snapshot, d_stab, max_separations, positions_array

logger = logging.getLogger(__name__)

LONG_RANGE_SPAN = 3


@dataclass(frozen=True)
class StableRegion:
    """Worst-case distance for every offset cell of a shell geometry.

    ``worst_case_km[i, j]`` is the orbit-sweep maximum for the offset
    ``(i * resolution, j * resolution)`` degrees.
    """

    resolution_deg: float
    d_stab_km: float
    worst_case_km: np.ndarray

    @property
    def admissible(self) -> np.ndarray:
        return self.worst_case_km <= self.d_stab_km

    @property
    def cells_per_axis(self) -> int:
        return self.worst_case_km.shape[0]

    def cell_of(self, d_raan_deg, d_anomaly_deg) -> tuple[np.ndarray, np.ndarray]:
        n = self.cells_per_axis
        i = np.floor(np.asarray(d_raan_deg) / self.resolution_deg + 1e-9).astype(np.int64) % n
        j = np.floor(np.asarray(d_anomaly_deg) / self.resolution_deg + 1e-9).astype(np.int64) % n
        return i, j

    def is_admissible(self, d_raan_deg, d_anomaly_deg):
        i, j = self.cell_of(d_raan_deg, d_anomaly_deg)
        return self.admissible[i, j]

    def near_region(self) -> np.ndarray:
        """Cells that are admissible or touch an admissible cell (8-neighbourhood)."""
        adm = self.admissible
        near = adm.copy()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                near |= np.roll(np.roll(adm, di, axis=0), dj, axis=1)
        return near

    def to_csv(self, path) -> None:
        n = self.cells_per_axis
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_raan_deg", "d_anomaly_deg", "worst_case_km", "admissible"])
            adm = self.admissible
            for i in range(n):
                for j in range(n):
                    w.writerow([
                        f"{i * self.resolution_deg:.6f}",
                        f"{j * self.resolution_deg:.6f}",
                        f"{self.worst_case_km[i, j]:.6f}",
                        int(adm[i, j]),
                    ])


def _region_grid(config: ShellConfig) -> np.ndarray:
    res = config.sweep_resolution_deg
    n = int(round(360.0 / res))
    angles = np.arange(n) * res
    # B positions for every (d_raan, w) where w = d_anomaly + phase
    grid_b = positions_array(angles[:, None], angles[None, :], config)  # (n, n, 3)
    grid_a = positions_array(0.0, angles, config)  # (n, 3)
    worst = np.zeros((n, n))
    for step in range(n):
        shifted = np.roll(grid_b, -step, axis=1)
        np.maximum(worst, np.linalg.norm(shifted - grid_a[step], axis=-1), out=worst)
    return worst


@functools.lru_cache(maxsize=8)
def _cached_region(key: tuple, config: ShellConfig) -> StableRegion:
    worst = _region_grid(config)
    worst.setflags(write=False)
    return StableRegion(config.sweep_resolution_deg, d_stab(config), worst)


def compute_stable_region(config: ShellConfig) -> StableRegion:
    """Tabulate the orbit-sweep worst case for every offset cell (cached)."""
    # plane/satellite counts do not affect the region
    return _cached_region(config.region_key(), _geometry_only(config))


def _geometry_only(config: ShellConfig) -> ShellConfig:
    return ShellConfig(
        num_planes=1,
        sats_per_plane=1,
        altitude_km=config.altitude_km,
        inclination_deg=config.inclination_deg,
        earth_radius_km=config.earth_radius_km,
        atmosphere_km=config.atmosphere_km,
        max_isl_range_km=config.max_isl_range_km,
        phasing_offset_deg=0.0,
        sweep_resolution_deg=config.sweep_resolution_deg,
    )


@dataclass(frozen=True)
class CandidateEdge:
    a: int
    b: int
    worst_case_km: float
    instantaneous_km: float
    plane_span: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


class CandidateLinks(Sequence):
    """Stable candidate edges of one snapshot, stored column-wise.

    Endpoint columns ``i``/``j`` index into ``snapshot.satellites`` with
    ``i < j``; rows are sorted by (i, j).
    """

    def __init__(self, snapshot: Snapshot, i, j, worst_km, inst_km, span):
        self.snapshot = snapshot
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.worst_km = np.asarray(worst_km, dtype=float)
        self.inst_km = np.asarray(inst_km, dtype=float)
        self.span = np.asarray(span, dtype=np.int64)
        self._lookup = None

    def __len__(self) -> int:
        return int(self.i.size)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[x] for x in range(*k.indices(len(self)))]
        sats = self.snapshot.satellites
        return CandidateEdge(
            sats[self.i[k]].id,
            sats[self.j[k]].id,
            float(self.worst_km[k]),
            float(self.inst_km[k]),
            int(self.span[k]),
        )

    def __iter__(self) -> Iterator[CandidateEdge]:
        for k in range(len(self)):
            yield self[k]

    def keys(self) -> list[tuple[int, int]]:
        ids = np.asarray(self.snapshot.ids, dtype=np.int64)
        return list(zip(ids[self.i].tolist(), ids[self.j].tolist()))

    def lookup(self) -> dict[tuple[int, int], int]:
        """Map ``(id_low, id_high)`` to row number."""
        if self._lookup is None:
            self._lookup = {key: k for k, key in enumerate(self.keys())}
        return self._lookup

    def find(self, a: int, b: int) -> CandidateEdge | None:
        k = self.lookup().get((a, b) if a < b else (b, a))
        return None if k is None else self[k]

    def __contains__(self, pair) -> bool:
        a, b = pair.key if isinstance(pair, CandidateEdge) else pair
        return ((a, b) if a < b else (b, a)) in self.lookup()

    def by_node(self) -> list[np.ndarray]:
        """Row numbers incident to each snapshot index."""
        n = len(self.snapshot)
        ends = np.concatenate([self.i, self.j])
        rows = np.concatenate([np.arange(len(self))] * 2)
        order = np.argsort(ends, kind="stable")
        splits = np.searchsorted(ends[order], np.arange(n + 1))
        return [rows[order[splits[v]:splits[v + 1]]] for v in range(n)]


def _plane_spans(p_i: np.ndarray, p_j: np.ndarray, n: int) -> np.ndarray:
    diff = np.abs(p_i - p_j)
    return np.minimum(diff, n - diff)


def build_stable_link_set(
    snapshot: Snapshot, region: StableRegion | None = None, chunk: int = 200_000
) -> CandidateLinks:
    """All active pairs whose worst-case separation stays within ``d_stab``.

    The tabulated region rejects pairs far from the admissible set; every
    remaining pair gets an exact orbit sweep at its true offset, which both
    settles boundary cases and supplies the worst-case annotation.
    """
    config = snapshot.config
    if region is None:
        region = compute_stable_region(config)
    n = len(snapshot)
    planes, raan, anom = snapshot.arrays()
    limit = region.d_stab_km
    near = region.near_region()

    keep_i, keep_j, keep_w = [], [], []
    iu, ju = np.triu_indices(n, k=1)
    for start in range(0, iu.size, chunk):
        a, b = iu[start:start + chunk], ju[start:start + chunk]
        d_raan = (raan[b] - raan[a]) % 360.0
        d_anom = (anom[b] - anom[a]) % 360.0
        ci, cj = region.cell_of(d_raan, d_anom)
        maybe = near[ci, cj]
        if not maybe.any():
            continue
        a, b, d_raan, d_anom = a[maybe], b[maybe], d_raan[maybe], d_anom[maybe]
        worst = max_separations(d_raan, d_anom, config)
        ok = worst <= limit
        keep_i.append(a[ok])
        keep_j.append(b[ok])
        keep_w.append(worst[ok])

    if keep_i:
        i = np.concatenate(keep_i)
        j = np.concatenate(keep_j)
        worst = np.concatenate(keep_w)
    else:
        i = j = np.zeros(0, dtype=np.int64)
        worst = np.zeros(0)
    pos = snapshot.positions()
    inst = np.linalg.norm(pos[i] - pos[j], axis=-1) if i.size else np.zeros(0)
    span = _plane_spans(planes[i], planes[j], config.num_planes)
    logger.debug("snapshot %s: %d stable candidates", snapshot.label, i.size)
    return CandidateLinks(snapshot, i, j, worst, inst, span)
