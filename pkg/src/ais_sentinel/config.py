"""Run configuration: one JSON file, overridable per stage from the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ValidationError
from .geo import GeoPoint
from .nn import TrainConfig
from .pipeline import BASE_FEATURES, MODES, PrepConfig

DEFAULT_SEEDS = tuple(range(10))


@dataclass
class RunConfig:
    mode: str = "2-class"
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    split_ratio: float = 0.6
    holdout_fraction: float | None = None
    prep: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    channel: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if not self.seeds:
            raise ValidationError("seeds must not be empty")
        self.seeds = tuple(int(s) for s in self.seeds)

    def prep_config(self) -> PrepConfig:
        d = dict(self.prep)
        d["mode"] = self.mode
        if "synth_missing_count" not in d:
            base = PrepConfig()
            slots = round(d.get("window_T", base.window_T) / d.get("tau", base.tau))
            d["synth_missing_count"] = (slots - 1) * len(BASE_FEATURES)
        return PrepConfig.from_dict(d)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        d = dict(self.train)
        d["seed"] = self.seeds[0] if seed is None else int(seed)
        return TrainConfig.from_dict(d)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    unknown = set(doc) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**doc)


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    """Command-line flags win over file values; unset flags leave the file alone."""
    prep = dict(cfg.prep)
    updates = {}
    if getattr(args, "mode", None):
        updates["mode"] = args.mode
    if getattr(args, "seeds", None):
        updates["seeds"] = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    if getattr(args, "seed", None) is not None:
        updates["seeds"] = (args.seed,)
    if getattr(args, "holdout_by_vessel", None) is not None:
        updates["holdout_fraction"] = args.holdout_by_vessel
    for flag, key in (("tau", "tau"), ("window", "window_T"), ("threshold_x", "dropout_threshold_X"),
                      ("range_nmi", "range_nmi")):
        value = getattr(args, flag, None)
        if value is not None:
            prep[key] = value
    lat, lon = getattr(args, "station_lat", None), getattr(args, "station_lon", None)
    if lat is not None or lon is not None:
        station = prep.get("station", {"lat": PrepConfig().station.lat, "lon": PrepConfig().station.lon})
        if isinstance(station, GeoPoint):
            station = {"lat": station.lat, "lon": station.lon}
        station = dict(station)
        if lat is not None:
            station["lat"] = lat
        if lon is not None:
            station["lon"] = lon
        prep["station"] = station
    return replace(cfg, prep=prep, **updates)
