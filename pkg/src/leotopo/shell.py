"""Circular-orbit shell geometry.

Satellites in one shell share altitude and inclination, so a satellite is
fully located by its plane RAAN and its argument of latitude (anomaly).
Distances are computed in an Earth-centred inertial frame; Earth rotation
plays no role because only relative positions matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

EARTH_RADIUS_KM = 6371.0
ATMOSPHERE_KM = 80.0
MAX_ISL_RANGE_KM = 8000.0
SPEED_OF_LIGHT_KM_S = 299_792.458


@dataclass(frozen=True)
class ShellConfig:
    """Geometry of one shell of circular orbits."""

    num_planes: int
    sats_per_plane: int
    altitude_km: float
    inclination_deg: float
    earth_radius_km: float = EARTH_RADIUS_KM
    atmosphere_km: float = ATMOSPHERE_KM
    max_isl_range_km: float = MAX_ISL_RANGE_KM
    # None means Walker-delta F=1: 360 / (num_planes * sats_per_plane)
    phasing_offset_deg: float | None = None
    sweep_resolution_deg: float = 1.0

    def __post_init__(self):
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ValueError("num_planes and sats_per_plane must be >= 1")
        if not 0.0 < self.atmosphere_km < self.altitude_km:
            raise ValueError(
                f"atmosphere_km must lie in (0, altitude_km); got "
                f"{self.atmosphere_km} with altitude {self.altitude_km}"
            )
        if not 0.0 < self.inclination_deg < 180.0:
            raise ValueError(f"inclination_deg must lie in (0, 180); got {self.inclination_deg}")
        if self.sweep_resolution_deg <= 0 or not _divides_circle(self.sweep_resolution_deg):
            raise ValueError("sweep_resolution_deg must divide 360 evenly")
        if self.phasing_offset_deg is None:
            object.__setattr__(
                self, "phasing_offset_deg", 360.0 / (self.num_planes * self.sats_per_plane)
            )

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def total_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane

    def region_key(self) -> tuple:
        """Parameters the stable-link region depends on."""
        return (
            self.altitude_km,
            self.inclination_deg,
            self.earth_radius_km,
            self.atmosphere_km,
            self.max_isl_range_km,
            self.sweep_resolution_deg,
        )


def _divides_circle(step: float) -> bool:
    n = 360.0 / step
    return abs(n - round(n)) < 1e-9


@dataclass(frozen=True)
class SatelliteState:
    id: int
    plane_index: int
    raan_deg: float
    anomaly_deg: float

    def __post_init__(self):
        object.__setattr__(self, "raan_deg", self.raan_deg % 360.0)
        object.__setattr__(self, "anomaly_deg", self.anomaly_deg % 360.0)


@dataclass(frozen=True)
class AngularOffset:
    d_raan_deg: float
    d_anomaly_deg: float

    def __post_init__(self):
        object.__setattr__(self, "d_raan_deg", self.d_raan_deg % 360.0)
        object.__setattr__(self, "d_anomaly_deg", self.d_anomaly_deg % 360.0)

    @classmethod
    def between(cls, a: SatelliteState, b: SatelliteState) -> AngularOffset:
        """Offset of ``b`` relative to ``a``."""
        return cls(b.raan_deg - a.raan_deg, b.anomaly_deg - a.anomaly_deg)

    def reversed(self) -> AngularOffset:
        return AngularOffset(-self.d_raan_deg, -self.d_anomaly_deg)


@dataclass(frozen=True)
class Snapshot:
    """Active satellites of one shell on one day, ordered by id."""

    config: ShellConfig
    satellites: tuple[SatelliteState, ...]
    label: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sats = tuple(sorted(self.satellites, key=lambda s: s.id))
        index = {}
        for i, s in enumerate(sats):
            if s.id in index:
                raise ValueError(f"duplicate satellite id {s.id}")
            if not 0 <= s.plane_index < self.config.num_planes:
                raise ValueError(
                    f"satellite {s.id} has plane_index {s.plane_index} outside "
                    f"[0, {self.config.num_planes})"
                )
            index[s.id] = i
        object.__setattr__(self, "satellites", sats)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.satellites)

    def __contains__(self, sat_id) -> bool:
        return sat_id in self._index

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.satellites]

    def index_of(self, sat_id: int) -> int:
        return self._index[sat_id]

    def get(self, sat_id: int) -> SatelliteState:
        return self.satellites[self._index[sat_id]]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(plane_index, raan_deg, anomaly_deg) as arrays in id order."""
        planes = np.fromiter((s.plane_index for s in self.satellites), dtype=np.int64, count=len(self))
        raan = np.fromiter((s.raan_deg for s in self.satellites), dtype=float, count=len(self))
        anom = np.fromiter((s.anomaly_deg for s in self.satellites), dtype=float, count=len(self))
        return planes, raan, anom

    def positions(self, phase_deg: float = 0.0) -> np.ndarray:
        _, raan, anom = self.arrays()
        return positions_array(raan, anom + phase_deg, self.config)

    def subset(self, ids, label: str | None = None) -> Snapshot:
        keep = set(ids)
        sats = [s for s in self.satellites if s.id in keep]
        return Snapshot(self.config, tuple(sats), self.label if label is None else label)

    def with_label(self, label: str) -> Snapshot:
        return replace(self, label=label)

    def plane_members(self) -> dict[int, list[SatelliteState]]:
        """Satellites of each non-empty plane sorted by anomaly (ties by id)."""
        planes: dict[int, list[SatelliteState]] = {}
        for s in self.satellites:
            planes.setdefault(s.plane_index, []).append(s)
        for members in planes.values():
            members.sort(key=lambda s: (s.anomaly_deg, s.id))
        return dict(sorted(planes.items()))


def generate_synthetic_shell(config: ShellConfig, label: str = "synthetic") -> Snapshot:
    """Fully populated shell; satellite ids are ``plane * sats_per_plane + slot``."""
    sats = []
    for p in range(config.num_planes):
        raan = p * 360.0 / config.num_planes
        for k in range(config.sats_per_plane):
            anomaly = k * 360.0 / config.sats_per_plane + p * config.phasing_offset_deg
            sats.append(SatelliteState(p * config.sats_per_plane + k, p, raan, anomaly))
    return Snapshot(config, tuple(sats), label)


def positions_array(raan_deg, anomaly_deg, config: ShellConfig) -> np.ndarray:
    """Cartesian positions (km), shape ``broadcast(raan, anomaly).shape + (3,)``."""
    raan = np.radians(np.asarray(raan_deg, dtype=float))
    u = np.radians(np.asarray(anomaly_deg, dtype=float))
    inc = math.radians(config.inclination_deg)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    cos_u, sin_u = np.cos(u), np.sin(u)
    r = config.orbit_radius_km
    x = cos_o * cos_u - sin_o * sin_u * math.cos(inc)
    y = sin_o * cos_u + cos_o * sin_u * math.cos(inc)
    z = sin_u * math.sin(inc) * np.ones_like(cos_o)
    return r * np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def position_at(sat: SatelliteState, config: ShellConfig, phase_deg: float = 0.0) -> np.ndarray:
    return positions_array(sat.raan_deg, sat.anomaly_deg + phase_deg, config)


def instantaneous_distance(
    a: SatelliteState, b: SatelliteState, config: ShellConfig, phase_deg: float = 0.0
) -> float:
    return float(np.linalg.norm(position_at(a, config, phase_deg) - position_at(b, config, phase_deg)))


def sweep_phases(config: ShellConfig) -> np.ndarray:
    return np.arange(0.0, 360.0, config.sweep_resolution_deg)


def max_separations(d_raan_deg, d_anomaly_deg, config: ShellConfig, chunk: int = 4096) -> np.ndarray:
    """Worst-case distance over one orbit for many offsets at once.

    The canonical pair has satellite A at (0, phase) and B at
    (d_raan, d_anomaly + phase), with phase swept over the configured grid.
    """
    d_raan = np.atleast_1d(np.asarray(d_raan_deg, dtype=float))
    d_anom = np.atleast_1d(np.asarray(d_anomaly_deg, dtype=float))
    d_raan, d_anom = np.broadcast_arrays(d_raan, d_anom)
    shape = d_raan.shape
    d_raan, d_anom = d_raan.ravel(), d_anom.ravel()
    phases = sweep_phases(config)
    pos_a = positions_array(0.0, phases, config)  # (P, 3)
    out = np.empty(d_raan.size)
    for start in range(0, d_raan.size, chunk):
        sl = slice(start, start + chunk)
        pos_b = positions_array(d_raan[sl, None], d_anom[sl, None] + phases[None, :], config)
        dist = np.linalg.norm(pos_b - pos_a[None, :, :], axis=-1)
        out[sl] = dist.max(axis=1)
    return out.reshape(shape)


def max_separation(offset: AngularOffset, config: ShellConfig) -> float:
    return float(max_separations(offset.d_raan_deg, offset.d_anomaly_deg, config)[0])


def d_los_km(altitude_km: float, atmosphere_km: float, earth_radius_km: float = EARTH_RADIUS_KM) -> float:
    """Longest chord between two satellites at ``altitude_km`` whose closest
    approach to Earth stays at or above ``atmosphere_km``."""
    r_orbit = earth_radius_km + altitude_km
    r_floor = earth_radius_km + atmosphere_km
    if r_floor > r_orbit:
        raise ValueError("atmosphere height must not exceed the orbital altitude")
    return 2.0 * math.sqrt(r_orbit**2 - r_floor**2)


def d_los(config: ShellConfig) -> float:
    return d_los_km(config.altitude_km, config.atmosphere_km, config.earth_radius_km)


def d_stab(config: ShellConfig) -> float:
    return min(config.max_isl_range_km, d_los(config))


def plane_span(i: int, j: int, n: int) -> int:
    """Circular distance between plane indices ``i`` and ``j`` of ``n`` planes."""
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"plane indices must lie in [0, {n})")
    diff = abs(i - j)
    return min(diff, n - diff)


STARLINK_SHELL1 = dict(num_planes=72, sats_per_plane=22, altitude_km=550.0, inclination_deg=53.0)
KUIPER_SHELL = dict(num_planes=34, sats_per_plane=34, altitude_km=630.0, inclination_deg=51.9)
