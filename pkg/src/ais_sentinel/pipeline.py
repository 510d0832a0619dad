"""From decoded position reports to labeled, scaled training samples.

The stages, in order:

1. :func:`extract_tracks` groups reports by MMSI and drops slow, anchored
   and moored traffic.
2. :func:`resample_track` places each report on a ``tau``-second slot grid.
3. :func:`build_samples` cuts a ``window_T``-second window anchored at every
   real message and :func:`label_samples` applies the dropout rule.
4. :func:`synthesize_anomalies` / :func:`synthesize_power_outages` balance
   the classes.
5. :func:`encode_dataset` flattens windows slot-major and min-max scales
   them, with missing slots set to ``SENTINEL``.

Samples are held column-wise in a :class:`SampleSet`; indexing one yields a
:class:`Sample` with per-slot :class:`Slot` objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .codec import PositionReport
from .errors import DegenerateColumn, DimensionMismatch, TooFewVessels, ValidationError
from .geo import OUTAGE_RECTS, ROSTOCK, GeoPoint, GeoRect, RangeRule, distance_to_station, \
    sample_outage_positions

SENTINEL = -1.0
BASE_FEATURES = ("lat", "lon", "cog", "sog")
NAV_ANCHORED, NAV_MOORED = 1, 5
MODES = ("2-class", "3-class")


class Label(IntEnum):
    NORMAL = 0
    ANOMALY = 1
    POWER_OUTAGE = 2


class Origin(IntEnum):
    REAL = 0
    SYNTHETIC_ANOMALY = 1
    SYNTHETIC_OUTAGE = 2


CLASS_NAMES = {
    "2-class": ("normal", "anomaly"),
    "3-class": ("normal", "anomaly", "power_outage"),
}


@dataclass(frozen=True)
class PrepConfig:
    tau: float = 2.0
    window_T: float = 120.0
    dropout_threshold_X: float = 0.9
    min_speed_knots: float = 3.0
    synth_missing_count: int = 236
    station: GeoPoint = ROSTOCK
    range_nmi: float = 40.0
    rects: tuple[GeoRect, ...] = OUTAGE_RECTS
    mode: str = "2-class"
    excluded_nav_status: tuple[int, ...] = (NAV_ANCHORED, NAV_MOORED)
    outage_count: int | None = None  # None: balance against the normal class

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tau <= 0 or self.window_T <= 0:
            raise ValidationError("tau and window_T must be positive")
        ratio = self.window_T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 2:
            raise ValidationError("tau must divide window_T into at least two slots")
        if not 0.0 < self.dropout_threshold_X < 1.0:
            raise ValidationError("dropout_threshold_X must lie in (0, 1)")
        if self.synth_missing_count != (self.slots - 1) * len(BASE_FEATURES):
            raise ValidationError(
                f"synth_missing_count must be {(self.slots - 1) * len(BASE_FEATURES)} "
                f"for {self.slots} slots"
            )

    @property
    def slots(self) -> int:
        return int(round(self.window_T / self.tau))

    @property
    def run_threshold(self) -> int:
        """Minimum missing run after slot 0 that makes a sample anomalous."""
        # rounding guards against 0.9 * 59 landing a hair above an integer
        return math.ceil(round(self.dropout_threshold_X * (self.slots - 1), 9))

    @property
    def rule(self) -> RangeRule:
        return RangeRule(self.station, self.range_nmi)

    @property
    def class_names(self) -> tuple[str, ...]:
        return CLASS_NAMES[self.mode]

    @property
    def features_per_slot(self) -> int:
        return 5 if self.mode == "3-class" else 4

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rects"] = [[[r.sw.lon, r.sw.lat], [r.ne.lon, r.ne.lat]] for r in self.rects]
        d["station"] = {"lat": self.station.lat, "lon": self.station.lon}
        d["excluded_nav_status"] = list(self.excluded_nav_status)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PrepConfig":
        d = dict(d)
        if "station" in d and isinstance(d["station"], dict):
            d["station"] = GeoPoint(**d["station"])
        if "rects" in d:
            d["rects"] = tuple(
                GeoRect(GeoPoint(lat=sw[1], lon=sw[0]), GeoPoint(lat=ne[1], lon=ne[0]))
                for sw, ne in d["rects"]
            )
        if "excluded_nav_status" in d:
            d["excluded_nav_status"] = tuple(d["excluded_nav_status"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown prep settings: {sorted(unknown)}")
        return cls(**d)


# --------------------------------------------------------------------------
# tracks and slot grids


@dataclass
class Track:
    mmsi: int
    reports: list[PositionReport]

    def __post_init__(self):
        if any(r.mmsi != self.mmsi for r in self.reports):
            raise ValidationError("track mixes MMSIs")
        times = [r.rx_timestamp for r in self.reports]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("track reports must be time-ordered")

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(times, features)`` with features columns lat, lon, cog, sog."""
        times = np.array([r.rx_timestamp for r in self.reports], dtype=np.float64)
        feats = np.array([[r.lat, r.lon, r.cog, r.sog] for r in self.reports], dtype=np.float64)
        return times, feats.reshape(-1, len(BASE_FEATURES))


def drop_unavailable(reports: Iterable[PositionReport]) -> list[PositionReport]:
    return [r for r in reports if not r.has_unavailable]


def extract_tracks(reports: Iterable[PositionReport], cfg: PrepConfig = PrepConfig()) -> list[Track]:
    """Group reports into per-vessel tracks, sorted by MMSI then time.

    Reports at or below ``min_speed_knots``, with an excluded navigational
    status, or carrying an "unavailable" sentinel are discarded.
    """
    excluded = set(cfg.excluded_nav_status)
    by_vessel: dict[int, list[PositionReport]] = {}
    for r in reports:
        if r.has_unavailable or r.sog <= cfg.min_speed_knots or r.nav_status in excluded:
            continue
        by_vessel.setdefault(r.mmsi, []).append(r)
    return [
        Track(mmsi, sorted(rs, key=lambda r: r.rx_timestamp))
        for mmsi, rs in sorted(by_vessel.items())
    ]


@dataclass
class SlotGrid:
    mmsi: int
    origin: float
    present: np.ndarray  # (L,) bool
    features: np.ndarray  # (L, 4), NaN where missing
    anchors: np.ndarray  # occupied slot indices, ascending
    anchor_times: np.ndarray  # receive time of the report held by each anchor slot
    duplicates: int

    def __len__(self):
        return len(self.present)


def resample_track(track: Track, cfg: PrepConfig = PrepConfig()) -> SlotGrid:
    if not track.reports:
        raise ValidationError("cannot resample an empty track")
    times, feats = track.arrays()
    origin = times[0]
    idx = np.floor((times - origin) / cfg.tau).astype(np.int64)
    # time-sorted input, so the last report of each slot is the one that stays
    last = np.ones(len(idx), dtype=bool)
    last[:-1] = idx[1:] != idx[:-1]
    anchors = idx[last]
    length = int(idx[-1]) + 1
    present = np.zeros(length, dtype=bool)
    present[anchors] = True
    grid = np.full((length, len(BASE_FEATURES)), np.nan)
    grid[anchors] = feats[last]
    return SlotGrid(
        mmsi=track.mmsi,
        origin=float(origin),
        present=present,
        features=grid,
        anchors=anchors,
        anchor_times=times[last],
        duplicates=int((~last).sum()),
    )


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class Slot:
    present: bool
    features: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class Sample:
    mmsi: int
    anchor_time: float
    slots: tuple[Slot, ...]
    label: Label
    anchor_distance_nmi: float
    origin: Origin = Origin.REAL

    @property
    def presence(self) -> np.ndarray:
        return np.array([s.present for s in self.slots], dtype=bool)


@dataclass
class SampleSet:
    """Column-wise storage for many samples of equal window length."""

    mmsi: np.ndarray
    anchor_time: np.ndarray
    present: np.ndarray  # (n, S) bool
    features: np.ndarray  # (n, S, 4), NaN where missing
    label: np.ndarray  # (n,) int64, Label values
    anchor_distance: np.ndarray
    origin: np.ndarray  # (n,) int64, Origin values

    def __len__(self) -> int:
        return len(self.mmsi)

    def __getitem__(self, i: int) -> Sample:
        slots = tuple(
            Slot(True, tuple(float(v) for v in self.features[i, j])) if self.present[i, j]
            else Slot(False)
            for j in range(self.present.shape[1])
        )
        return Sample(
            mmsi=int(self.mmsi[i]),
            anchor_time=float(self.anchor_time[i]),
            slots=slots,
            label=Label(int(self.label[i])),
            anchor_distance_nmi=float(self.anchor_distance[i]),
            origin=Origin(int(self.origin[i])),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def n_slots(self) -> int:
        return self.present.shape[1]

    def take(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(*(getattr(self, f)[idx] for f in _SAMPLE_FIELDS))

    @classmethod
    def empty(cls, n_slots: int) -> "SampleSet":
        return cls(
            mmsi=np.zeros(0, dtype=np.int64),
            anchor_time=np.zeros(0),
            present=np.zeros((0, n_slots), dtype=bool),
            features=np.zeros((0, n_slots, len(BASE_FEATURES))),
            label=np.zeros(0, dtype=np.int64),
            anchor_distance=np.zeros(0),
            origin=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concat(cls, parts: Sequence["SampleSet"], n_slots: int) -> "SampleSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(n_slots)
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in _SAMPLE_FIELDS))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "SampleSet":
        n_slots = len(samples[0].slots)
        feats = np.full((len(samples), n_slots, len(BASE_FEATURES)), np.nan)
        for i, s in enumerate(samples):
            for j, slot in enumerate(s.slots):
                if slot.present:
                    feats[i, j] = slot.features
        return cls(
            mmsi=np.array([s.mmsi for s in samples], dtype=np.int64),
            anchor_time=np.array([s.anchor_time for s in samples], dtype=np.float64),
            present=np.array([s.presence for s in samples], dtype=bool),
            features=feats,
            label=np.array([int(s.label) for s in samples], dtype=np.int64),
            anchor_distance=np.array([s.anchor_distance_nmi for s in samples]),
            origin=np.array([int(s.origin) for s in samples], dtype=np.int64),
        )


_SAMPLE_FIELDS = ("mmsi", "anchor_time", "present", "features", "label", "anchor_distance", "origin")


def label_from_mask(present: np.ndarray, anchor_distance: np.ndarray, cfg: PrepConfig) -> np.ndarray:
    """Vectorised dropout labeling for an ``(n, S)`` presence mask."""
    run = kernels.missing_run(present)
    anomalous = run >= cfg.run_threshold
    label = np.where(anomalous, int(Label.ANOMALY), int(Label.NORMAL)).astype(np.int64)
    if cfg.mode == "3-class":
        outage = anomalous & (np.asarray(anchor_distance) > cfg.range_nmi)
        label[outage] = int(Label.POWER_OUTAGE)
    return label


def label_sample(sample: Sample, cfg: PrepConfig = PrepConfig()) -> Label:
    """Anomaly iff the missing run starting at slot 1 reaches the threshold."""
    lab = label_from_mask(sample.presence[None, :], np.array([sample.anchor_distance_nmi]), cfg)
    return Label(int(lab[0]))


def label_samples(samples: SampleSet, cfg: PrepConfig) -> np.ndarray:
    return label_from_mask(samples.present, samples.anchor_distance, cfg)


def build_samples(grid: SlotGrid, cfg: PrepConfig = PrepConfig()) -> SampleSet:
    """One window per anchoring message, padded with missing slots past the grid end."""
    S = cfg.slots
    n = len(grid.anchors)
    if n == 0:
        return SampleSet.empty(S)
    present = np.concatenate([grid.present, np.zeros(S - 1, dtype=bool)])
    feats = np.concatenate([grid.features, np.full((S - 1, len(BASE_FEATURES)), np.nan)])
    window = grid.anchors[:, None] + np.arange(S)[None, :]
    p = present[window]
    f = feats[window]
    dist = distance_to_station(f[:, 0, 0], f[:, 0, 1], cfg.station)
    out = SampleSet(
        mmsi=np.full(n, grid.mmsi, dtype=np.int64),
        anchor_time=grid.anchor_times.astype(np.float64),
        present=p,
        features=f,
        label=np.zeros(n, dtype=np.int64),
        anchor_distance=dist,
        origin=np.full(n, int(Origin.REAL), dtype=np.int64),
    )
    out.label = label_samples(out, cfg)
    return out


def _anchor_only(grid: SlotGrid, cfg: PrepConfig) -> SampleSet:
    S = cfg.slots
    n = len(grid.anchors)
    present = np.zeros((n, S), dtype=bool)
    present[:, 0] = True
    feats = np.full((n, S, len(BASE_FEATURES)), np.nan)
    feats[:, 0] = grid.features[grid.anchors]
    dist = distance_to_station(feats[:, 0, 0], feats[:, 0, 1], cfg.station)
    out = SampleSet(
        mmsi=np.full(n, grid.mmsi, dtype=np.int64),
        anchor_time=grid.anchor_times.astype(np.float64),
        present=present,
        features=feats,
        label=np.zeros(n, dtype=np.int64),
        anchor_distance=dist,
        origin=np.full(n, int(Origin.SYNTHETIC_ANOMALY), dtype=np.int64),
    )
    out.label = label_samples(out, cfg)
    return out


def synthesize_anomalies(tracks: Sequence[Track], cfg: PrepConfig = PrepConfig(),
                         rng: np.random.Generator | None = None,
                         grids: Sequence[SlotGrid] | None = None) -> SampleSet:
    """One anchor-plus-all-missing sample per real, non-duplicate message.

    ``rng`` is accepted for interface symmetry; the construction is deterministic.
    """
    if grids is None:
        grids = [resample_track(t, cfg) for t in tracks if t.reports]
    return SampleSet.concat([_anchor_only(g, cfg) for g in grids], cfg.slots)


def synthesize_power_outages(tracks: Sequence[Track], cfg: PrepConfig, rng: np.random.Generator,
                             count: int, source: SampleSet | None = None) -> SampleSet:
    """Clone synthetic anomaly samples with the anchor moved into an outage rectangle.

    Positions come from :func:`geo.sample_outage_positions`, so every clone
    lies beyond the reception range and is labeled power outage.
    """
    if cfg.mode != "3-class":
        raise ValidationError("power-outage synthesis requires 3-class mode")
    if count <= 0:
        return SampleSet.empty(cfg.slots)
    if source is None:
        source = synthesize_anomalies(tracks, cfg)
    if len(source) == 0:
        raise ValidationError("no messages to clone power-outage samples from")
    pick = rng.choice(len(source), size=count, replace=count > len(source))
    pick.sort()
    clones = source.take(pick)
    pos = sample_outage_positions(cfg.rects, cfg.rule, rng, count)
    clones.features = clones.features.copy()
    clones.features[:, 0, 0] = pos[:, 0]
    clones.features[:, 0, 1] = pos[:, 1]
    clones.anchor_distance = distance_to_station(pos[:, 0], pos[:, 1], cfg.station)
    clones.origin = np.full(count, int(Origin.SYNTHETIC_OUTAGE), dtype=np.int64)
    clones.label = label_samples(clones, cfg)
    return clones


@dataclass
class PrepSummary:
    vessels: int = 0
    messages: int = 0
    duplicates: int = 0
    counts: dict = field(default_factory=dict)  # class name -> {"real": n, "synthetic": n}

    def as_dict(self) -> dict:
        return asdict(self)


def prepare_samples(reports: Iterable[PositionReport], cfg: PrepConfig = PrepConfig(),
                    seed: int = 0, tracks: Sequence[Track] | None = None
                    ) -> tuple[SampleSet, PrepSummary]:
    """Run the full preparation chain and return samples plus per-class counts.

    Output order: real samples by MMSI then time, synthetic anomalies in the
    same order, then synthetic power outages.
    """
    if tracks is None:
        tracks = extract_tracks(reports, cfg)
    grids = [resample_track(t, cfg) for t in tracks if t.reports]
    real = SampleSet.concat([build_samples(g, cfg) for g in grids], cfg.slots)
    synth = SampleSet.concat([_anchor_only(g, cfg) for g in grids], cfg.slots)
    parts = [real, synth]
    if cfg.mode == "3-class":
        n_normal = int((real.label == Label.NORMAL).sum())
        n_outage = int((real.label == Label.POWER_OUTAGE).sum() + (synth.label == Label.POWER_OUTAGE).sum())
        count = cfg.outage_count if cfg.outage_count is not None else max(0, n_normal - n_outage)
        rng = np.random.default_rng(seed)
        parts.append(synthesize_power_outages(tracks, cfg, rng, count, source=synth) if len(synth) else
                     SampleSet.empty(cfg.slots))
    samples = SampleSet.concat(parts, cfg.slots)

    summary = PrepSummary(
        vessels=len(grids),
        messages=int(sum(len(t.reports) for t in tracks)),
        duplicates=int(sum(g.duplicates for g in grids)),
    )
    for idx, name in enumerate(cfg.class_names):
        is_cls = samples.label == idx
        summary.counts[name] = {
            "real": int((is_cls & (samples.origin == Origin.REAL)).sum()),
            "synthetic": int((is_cls & (samples.origin != Origin.REAL)).sum()),
        }
    return samples, summary


# --------------------------------------------------------------------------
# encoding and splitting


def slot_features(samples: SampleSet, cfg: PrepConfig) -> np.ndarray:
    """Raw per-slot feature tensor ``(n, S, F)``; 3-class adds distance to station."""
    if cfg.mode == "2-class":
        return samples.features.copy()
    lat = samples.features[..., 0]
    lon = samples.features[..., 1]
    dist = np.full(lat.shape, np.nan)
    m = samples.present
    dist[m] = distance_to_station(lat[m], lon[m], cfg.station)
    return np.concatenate([samples.features, dist[..., None]], axis=2)


@dataclass
class MinMaxScaler:
    """Per-column min-max scaling to [0, 1] with a missing-value sentinel.

    Values outside the fitted range are clipped so they never approach the
    sentinel.  Columns with ``min == max`` (or no observed values) map to 0.
    """

    min: np.ndarray
    max: np.ndarray

    @classmethod
    def fit(cls, raw_flat: np.ndarray, strict: bool = False) -> "MinMaxScaler":
        observed = ~np.isnan(raw_flat)
        has = observed.any(axis=0)
        lo = np.where(has, np.nanmin(np.where(observed, raw_flat, np.inf), axis=0), 0.0)
        hi = np.where(has, np.nanmax(np.where(observed, raw_flat, -np.inf), axis=0), 0.0)
        if strict:
            flat = np.flatnonzero(lo == hi)
            if flat.size:
                raise DegenerateColumn(f"{flat.size} columns with min == max, first is {flat[0]}")
        return cls(min=lo, max=hi)

    @property
    def degenerate(self) -> np.ndarray:
        return self.min == self.max

    def transform(self, raw_flat: np.ndarray) -> np.ndarray:
        if raw_flat.shape[1] != len(self.min):
            raise DimensionMismatch(f"expected {len(self.min)} columns, got {raw_flat.shape[1]}")
        span = np.where(self.degenerate, 1.0, self.max - self.min)
        scaled = np.clip((raw_flat - self.min) / span, 0.0, 1.0)
        scaled[:, self.degenerate] = 0.0
        scaled[np.isnan(raw_flat)] = SENTINEL
        return scaled

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxScaler":
        return cls(min=np.asarray(d["min"], dtype=np.float64), max=np.asarray(d["max"], dtype=np.float64))


@dataclass
class Dataset:
    samples: SampleSet
    raw: np.ndarray  # (n, S * F) unscaled, NaN where missing
    labels: np.ndarray
    scaler: MinMaxScaler
    class_names: tuple[str, ...]
    cfg: PrepConfig
    _features: np.ndarray | None = field(default=None, repr=False)

    @property
    def feature_matrix(self) -> np.ndarray:
        if self._features is None:
            self._features = self.scaler.transform(self.raw)
        return self._features

    @property
    def width(self) -> int:
        return self.raw.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx, refit: bool = False) -> "Dataset":
        idx = np.asarray(idx)
        raw = self.raw[idx]
        scaler = MinMaxScaler.fit(raw) if refit else self.scaler
        return Dataset(self.samples.take(idx), raw, self.labels[idx], scaler, self.class_names, self.cfg)

    def with_scaler(self, scaler: MinMaxScaler) -> "Dataset":
        return replace(self, scaler=scaler, _features=None)


def column_names(cfg: PrepConfig) -> list[str]:
    names = BASE_FEATURES + (("dist",) if cfg.mode == "3-class" else ())
    return [f"s{j:02d}_{name}" for j in range(cfg.slots) for name in names]


def encode_dataset(samples: SampleSet, cfg: PrepConfig = PrepConfig(), fit_rows=None,
                   scaler: MinMaxScaler | None = None, strict: bool = False) -> Dataset:
    """Flatten samples slot-major and scale.

    The scaler is fitted on ``fit_rows`` (default: all rows) unless one is
    given.  ``strict=True`` raises ``DegenerateColumn`` instead of mapping
    constant columns to 0.
    """
    if samples.n_slots != cfg.slots:
        raise ValidationError(f"samples have {samples.n_slots} slots, config expects {cfg.slots}")
    raw = slot_features(samples, cfg).reshape(len(samples), -1)
    if scaler is None:
        rows = raw if fit_rows is None else raw[np.asarray(fit_rows)]
        scaler = MinMaxScaler.fit(rows, strict=strict)
    return Dataset(samples, raw, samples.label.copy(), scaler, cfg.class_names, cfg)


def decode_presence(features: np.ndarray, cfg: PrepConfig) -> np.ndarray:
    """Recover the slot presence mask from an encoded feature matrix."""
    per_slot = features.reshape(len(features), cfg.slots, cfg.features_per_slot)
    return ~(per_slot == SENTINEL).all(axis=2)


def split_dataset(ds: Dataset, ratio: float = 0.6, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then split; the scaler is refitted on the training side."""
    if not 0.0 < ratio < 1.0:
        raise ValidationError("ratio must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(len(ds))
    k = int(round(ratio * len(ds)))
    train = ds.subset(perm[:k], refit=True)
    val = ds.subset(perm[k:]).with_scaler(train.scaler)
    return train, val


def split_mmsis(mmsis, fraction: float, seed: int = 0) -> tuple[set[int], set[int]]:
    """Vessel-level partition; ``fraction`` of vessels go to the test side."""
    mmsis = sorted(set(int(m) for m in mmsis))
    if len(mmsis) < 2:
        raise TooFewVessels(f"need at least two vessels, got {len(mmsis)}")
    if not 0.0 < fraction < 1.0:
        raise ValidationError("holdout fraction must lie in (0, 1)")
    n_test = min(len(mmsis) - 1, max(1, int(round(fraction * len(mmsis)))))
    perm = np.random.default_rng(seed).permutation(len(mmsis))
    test = {mmsis[i] for i in perm[:n_test]}
    return set(mmsis) - test, test


def holdout_by_vessel(tracks: Sequence[Track], fraction: float, seed: int = 0
                      ) -> tuple[list[Track], list[Track]]:
    train_ids, test_ids = split_mmsis([t.mmsi for t in tracks], fraction, seed)
    return [t for t in tracks if t.mmsi in train_ids], [t for t in tracks if t.mmsi in test_ids]


# --------------------------------------------------------------------------
# dataset files

META_COLUMNS = ("mmsi", "anchor_time", "origin", "anchor_distance_nmi")


def write_dataset(samples: SampleSet, cfg: PrepConfig, csv_path, json_path,
                  summary: PrepSummary | None = None) -> Dataset:
    """Write the feature CSV (raw values, blank when missing, label last) and JSON sidecar."""
    import pandas as pd

    ds = encode_dataset(samples, cfg)
    frame = pd.DataFrame(ds.raw, columns=column_names(cfg))
    frame.insert(0, "anchor_distance_nmi", samples.anchor_distance)
    frame.insert(0, "origin", samples.origin)
    frame.insert(0, "anchor_time", samples.anchor_time)
    frame.insert(0, "mmsi", samples.mmsi)
    frame["label"] = samples.label
    frame.to_csv(csv_path, index=False, na_rep="", lineterminator="\n")
    meta = {
        "format": "ais-sentinel-dataset",
        "version": 1,
        "mode": cfg.mode,
        "class_names": list(cfg.class_names),
        "slots": cfg.slots,
        "features_per_slot": cfg.features_per_slot,
        "rows": len(samples),
        "scaler": ds.scaler.to_dict(),
        "config": cfg.to_dict(),
        "counts": summary.as_dict() if summary is not None else None,
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ds


def read_dataset(csv_path, json_path) -> Dataset:
    import pandas as pd

    with open(json_path) as fh:
        meta = json.load(fh)
    cfg = PrepConfig.from_dict(meta["config"])
    frame = pd.read_csv(csv_path, dtype=np.float64, keep_default_na=True)
    cols = column_names(cfg)
    missing = [c for c in (*META_COLUMNS, *cols, "label") if c not in frame.columns]
    if missing:
        raise ValidationError(f"dataset CSV lacks columns {missing[:3]}")
    n = len(frame)
    raw = frame[cols].to_numpy(dtype=np.float64)
    per_slot = raw.reshape(n, cfg.slots, cfg.features_per_slot)
    present = ~np.isnan(per_slot[..., 0])
    samples = SampleSet(
        mmsi=frame["mmsi"].to_numpy().astype(np.int64),
        anchor_time=frame["anchor_time"].to_numpy(dtype=np.float64),
        present=present,
        features=per_slot[..., : len(BASE_FEATURES)].copy(),
        label=frame["label"].to_numpy().astype(np.int64),
        anchor_distance=frame["anchor_distance_nmi"].to_numpy(dtype=np.float64),
        origin=frame["origin"].to_numpy().astype(np.int64),
    )
    scaler = MinMaxScaler.from_dict(meta["scaler"])
    return Dataset(samples, raw, samples.label.copy(), scaler, tuple(meta["class_names"]), cfg)
