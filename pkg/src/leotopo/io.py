"""Snapshot files, snapshot series, TLE ingestion and synthetic turnover.

Snapshot CSV layout::

    # altitude_km=550
    # inclination_deg=53
    # num_planes=72
    # sats_per_plane=22
    # label=2024-10-01
    sat_id,plane_id,raan_deg,anomaly_deg
    0,0,0.000000,0.000000

``altitude_km``, ``inclination_deg`` and ``num_planes`` are required; the
other geometry keys fall back to the shell defaults.
"""
from __future__ import annotations

import datetime as dt
import enum
import logging
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .shell import ShellConfig, SatelliteState, Snapshot, EARTH_RADIUS_KM

logger = logging.getLogger(__name__)

HEADER = ["sat_id", "plane_id", "raan_deg", "anomaly_deg"]
REQUIRED_META = ("altitude_km", "inclination_deg", "num_planes")
OPTIONAL_META = {
    "sats_per_plane": int,
    "earth_radius_km": float,
    "atmosphere_km": float,
    "max_isl_range_km": float,
    "phasing_offset_deg": float,
    "sweep_resolution_deg": float,
}
MU_EARTH_KM3_S2 = 398600.4418
SERIES_NAME = re.compile(r"^(\d{4}-\d{2}-\d{2})\.csv$")
SERIES_START = dt.date(2024, 10, 1)


class SnapshotFormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None, path=None):
        where = f"{path}:" if path else ""
        where += f"{line}: " if line is not None else (" " if path else "")
        super().__init__(f"{where}{msg}")
        self.line = line


class MissingMetadata(SnapshotFormatError):
    pass


class DuplicateId(SnapshotFormatError):
    pass


class TleError(ValueError):
    pass


class ChecksumError(TleError):
    pass


# ---------------------------------------------------------------------------
# snapshot files
# ---------------------------------------------------------------------------
def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def save_snapshot(snapshot: Snapshot, path) -> None:
    c = snapshot.config
    meta = {
        "altitude_km": c.altitude_km,
        "inclination_deg": c.inclination_deg,
        "num_planes": c.num_planes,
        "sats_per_plane": c.sats_per_plane,
        "earth_radius_km": c.earth_radius_km,
        "atmosphere_km": c.atmosphere_km,
        "max_isl_range_km": c.max_isl_range_km,
        "phasing_offset_deg": c.phasing_offset_deg,
        "sweep_resolution_deg": c.sweep_resolution_deg,
    }
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v!r}\n")
        fh.write(f"# label={snapshot.label}\n")
        fh.write(",".join(HEADER) + "\n")
        for s in snapshot.satellites:
            # rounding to the file precision may land exactly on 360
            raan = float(_fmt(s.raan_deg)) % 360.0
            anom = float(_fmt(s.anomaly_deg)) % 360.0
            fh.write(f"{s.id},{s.plane_index},{_fmt(raan)},{_fmt(anom)}\n")


def load_snapshot(path) -> Snapshot:
    path = Path(path)
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    seen_ids: dict[int, int] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            fields = [f.strip() for f in line.split(",")]
            if not header_seen:
                if fields != HEADER:
                    raise SnapshotFormatError(f"expected header {','.join(HEADER)}", lineno, path)
                header_seen = True
                continue
            if len(fields) != 4:
                raise SnapshotFormatError(f"expected 4 fields, got {len(fields)}", lineno, path)
            try:
                sid, plane = int(fields[0]), int(fields[1])
                raan, anom = float(fields[2]), float(fields[3])
            except ValueError as exc:
                raise SnapshotFormatError(f"malformed row: {exc}", lineno, path) from None
            if not (math.isfinite(raan) and math.isfinite(anom)):
                raise SnapshotFormatError("non-finite angle", lineno, path)
            if sid in seen_ids:
                raise DuplicateId(f"duplicate sat_id {sid} (first on line {seen_ids[sid]})", lineno, path)
            seen_ids[sid] = lineno
            for name, v in (("raan_deg", raan), ("anomaly_deg", anom)):
                if not 0.0 <= v < 360.0:
                    warnings.warn(f"{path}:{lineno}: {name}={v} normalised to {v % 360.0}", stacklevel=2)
            rows.append((lineno, sid, plane, raan, anom))
    if not header_seen:
        raise SnapshotFormatError("missing header row", None, path)
    missing = [k for k in REQUIRED_META if k not in meta]
    if missing:
        raise MissingMetadata(f"missing metadata: {', '.join(missing)}", None, path)
    config = _config_from_meta(meta, rows, path)
    sats = []
    for lineno, sid, plane, raan, anom in rows:
        if not 0 <= plane < config.num_planes:
            raise SnapshotFormatError(f"plane_id {plane} outside [0, {config.num_planes})", lineno, path)
        sats.append(SatelliteState(sid, plane, raan, anom))
    return Snapshot(config, tuple(sats), meta.get("label", path.stem))


def _config_from_meta(meta: dict, rows, path) -> ShellConfig:
    try:
        kwargs = {
            "altitude_km": float(meta["altitude_km"]),
            "inclination_deg": float(meta["inclination_deg"]),
            "num_planes": int(meta["num_planes"]),
        }
        for k, conv in OPTIONAL_META.items():
            if k in meta:
                kwargs[k] = conv(meta[k])
    except ValueError as exc:
        raise SnapshotFormatError(f"bad metadata value: {exc}", None, path) from None
    if "sats_per_plane" not in kwargs:
        counts = np.bincount([r[2] for r in rows if r[2] >= 0]) if rows else np.array([1])
        kwargs["sats_per_plane"] = max(1, int(counts.max()))
    try:
        return ShellConfig(**kwargs)
    except ValueError as exc:
        raise SnapshotFormatError(str(exc), None, path) from None


def save_series(snapshots, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for s in snapshots:
        if not re.fullmatch(r"\d{4}-\d{2}-\d{2}", s.label):
            raise ValueError(f"series snapshots need ISO date labels, got {s.label!r}")
        p = directory / f"{s.label}.csv"
        save_snapshot(s, p)
        out.append(p)
    return out


def series_files(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"series directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir() if SERIES_NAME.match(p.name))
    if not files:
        raise FileNotFoundError(f"no YYYY-MM-DD.csv files in {directory}")
    return files


def load_series(directory) -> list[Snapshot]:
    return [load_snapshot(p) for p in series_files(directory)]


# ---------------------------------------------------------------------------
# TLE
# ---------------------------------------------------------------------------
def tle_checksum(line: str) -> int:
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


@dataclass(frozen=True)
class TleElements:
    norad_id: int
    epoch: str
    inclination_deg: float
    raan_deg: float
    eccentricity: float
    arg_perigee_deg: float
    mean_anomaly_deg: float
    mean_motion_rev_day: float
    altitude_km: float
    name: str = ""

    @property
    def anomaly_deg(self) -> float:
        """Along-orbit angle: mean anomaly plus argument of perigee."""
        return (self.mean_anomaly_deg + self.arg_perigee_deg) % 360.0


def altitude_from_mean_motion(rev_per_day: float, earth_radius_km: float = EARTH_RADIUS_KM) -> float:
    if rev_per_day <= 0:
        raise TleError("mean motion must be positive")
    period_s = 86400.0 / rev_per_day
    a = (MU_EARTH_KM3_S2 * (period_s / (2.0 * math.pi)) ** 2) ** (1.0 / 3.0)
    return a - earth_radius_km


def _field(line: str, start: int, end: int, what: str, conv=float):
    # columns are 1-based inclusive, as in the format definition
    text = line[start - 1:end].strip()
    try:
        return conv(text)
    except ValueError:
        raise TleError(f"malformed {what} field {text!r}") from None


def parse_tle_elements(line1: str, line2: str, name: str = "") -> TleElements:
    line1, line2 = line1.rstrip("\r\n"), line2.rstrip("\r\n")
    for n, line in ((1, line1), (2, line2)):
        if len(line) != 69:
            raise TleError(f"line {n} has {len(line)} characters, expected 69")
        if line[0] != str(n):
            raise TleError(f"line {n} must start with '{n}'")
        if not line[68].isdigit() or tle_checksum(line) != int(line[68]):
            raise ChecksumError(f"checksum mismatch on line {n}")
    norad = _field(line1, 3, 7, "catalog number", int)
    if _field(line2, 3, 7, "catalog number", int) != norad:
        raise TleError("catalog numbers of line 1 and line 2 differ")
    mean_motion = _field(line2, 53, 63, "mean motion")
    return TleElements(
        norad_id=norad,
        epoch=line1[18:32].strip(),
        inclination_deg=_field(line2, 9, 16, "inclination"),
        raan_deg=_field(line2, 18, 25, "RAAN") % 360.0,
        eccentricity=_field(line2, 27, 33, "eccentricity", lambda s: float("0." + s)),
        arg_perigee_deg=_field(line2, 35, 42, "argument of perigee"),
        mean_anomaly_deg=_field(line2, 44, 51, "mean anomaly"),
        mean_motion_rev_day=mean_motion,
        altitude_km=altitude_from_mean_motion(mean_motion),
        name=name,
    )


def read_tle_file(path) -> list[TleElements]:
    """Parse 2-line or 3-line (named) TLE groups."""
    lines = [ln.rstrip("\r\n") for ln in open(path) if ln.strip()]
    out = []
    k = 0
    while k < len(lines):
        name = ""
        if not lines[k].startswith("1 "):
            name = lines[k].strip()
            if name.startswith("0 "):
                name = name[2:]
            k += 1
        if k + 1 >= len(lines):
            raise TleError(f"{path}: truncated TLE group near line {k + 1}")
        out.append(parse_tle_elements(lines[k], lines[k + 1], name))
        k += 2
    return out


def cluster_raan(raan_deg, gap_deg: float = 2.5) -> tuple[np.ndarray, np.ndarray]:
    """1-D circular clustering of RAAN values split at gaps wider than ``gap_deg``.

    Returns (labels, centroids).  Clusters are numbered in increasing RAAN,
    starting after the widest gap.
    """
    raan = np.asarray(raan_deg, dtype=float) % 360.0
    n = raan.size
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    order = np.argsort(raan, kind="stable")
    s = raan[order]
    gaps = np.diff(np.concatenate([s, [s[0] + 360.0]]))
    start = (int(np.argmax(gaps)) + 1) % n
    order = np.roll(order, -start)
    s = raan[order]
    unwrapped = s.copy()
    unwrapped[unwrapped < unwrapped[0]] += 360.0
    breaks = np.flatnonzero(np.diff(unwrapped) > gap_deg) + 1
    labels_sorted = np.zeros(n, dtype=np.int64)
    for b in breaks:
        labels_sorted[b:] += 1
    labels = np.empty(n, dtype=np.int64)
    labels[order] = labels_sorted
    cents = np.array([np.mean(unwrapped[labels_sorted == k]) % 360.0
                      for k in range(labels_sorted.max() + 1)])
    return labels, cents


def snapshot_from_tles(
    elements: list[TleElements],
    label: str = "",
    gap_deg: float = 2.5,
    min_plane_size: int = 2,
    num_planes: int | None = None,
    sats_per_plane: int | None = None,
) -> Snapshot:
    """Circular-orbit snapshot from mean elements; planes come from RAAN clustering."""
    if not elements:
        raise TleError("no TLE elements given")
    labels, _ = cluster_raan([e.raan_deg for e in elements], gap_deg)
    sizes = np.bincount(labels)
    keep_planes = [k for k in range(sizes.size) if sizes[k] >= min_plane_size]
    dropped = int(sum(sizes[k] for k in range(sizes.size) if sizes[k] < min_plane_size))
    if dropped:
        warnings.warn(f"{dropped} satellites fell outside any plane cluster and were excluded", stacklevel=2)
    plane_of = {k: p for p, k in enumerate(keep_planes)}
    if not plane_of:
        raise TleError("no plane cluster reaches the minimum size")
    kept = [(e, plane_of[lab]) for e, lab in zip(elements, labels.tolist()) if lab in plane_of]
    n_planes = num_planes or len(plane_of)
    if n_planes < len(plane_of):
        raise TleError(f"found {len(plane_of)} planes but num_planes={n_planes}")
    config = ShellConfig(
        num_planes=n_planes,
        sats_per_plane=sats_per_plane or int(max(sizes[k] for k in keep_planes)),
        altitude_km=float(np.median([e.altitude_km for e, _ in kept])),
        inclination_deg=float(np.median([e.inclination_deg for e, _ in kept])),
    )
    sats = tuple(SatelliteState(e.norad_id, p, e.raan_deg, e.anomaly_deg) for e, p in kept)
    return Snapshot(config, sats, label)


# ---------------------------------------------------------------------------
# synthetic turnover
# ---------------------------------------------------------------------------
class TurnoverMode(str, enum.Enum):
    GROWTH = "growth"
    SHRINKAGE = "shrinkage"


@dataclass(frozen=True)
class TurnoverScenario:
    mode: TurnoverMode
    start_fraction: float
    end_fraction: float
    daily_change_pct: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", TurnoverMode(self.mode))
        for f in (self.start_fraction, self.end_fraction):
            if not 0.0 < f <= 1.0:
                raise ValueError("fractions must lie in (0, 1]")
        if self.mode is TurnoverMode.GROWTH and not self.start_fraction < self.end_fraction:
            raise ValueError("growth needs start_fraction < end_fraction")
        if self.mode is TurnoverMode.SHRINKAGE and not self.start_fraction > self.end_fraction:
            raise ValueError("shrinkage needs start_fraction > end_fraction")
        if self.daily_change_pct <= 0:
            raise ValueError("daily_change_pct must be positive")

    def fraction_on(self, day: int) -> float:
        step = self.daily_change_pct / 100.0 * day
        if self.mode is TurnoverMode.GROWTH:
            return min(self.end_fraction, self.start_fraction + step)
        return max(self.end_fraction, self.start_fraction - step)

    @property
    def days_needed(self) -> int:
        return int(round(abs(self.end_fraction - self.start_fraction) * 100.0 / self.daily_change_pct))


def generate_turnover_series(
    base: Snapshot,
    scenario: TurnoverScenario,
    days: int,
    start_date: dt.date = SERIES_START,
) -> list[Snapshot]:
    """``days + 1`` daily snapshots drawn from the provisioned slots of ``base``.

    A single seeded permutation of the base ids decides which satellites are
    missing: on a day with ``k = round(N * fraction)`` active satellites the
    first ``N - k`` ids of the permutation are absent.  Growth therefore only
    adds and shrinkage only removes, and a growth series and a shrinkage
    series over the same range with the same seed share their end states.
    """
    if days < 0:
        raise ValueError("days must be non-negative")
    n = len(base)
    perm = np.random.default_rng(scenario.rng_seed).permutation(np.asarray(base.ids, dtype=np.int64))
    out = []
    for d in range(days + 1):
        active = int(round(n * scenario.fraction_on(d)))
        missing = set(perm[: n - active].tolist())
        label = (start_date + dt.timedelta(days=d)).isoformat()
        out.append(base.subset([i for i in base.ids if i not in missing], label))
    return out
