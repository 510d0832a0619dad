"""Synthetic AIS traffic: waypoint kinematics, Class A reporting cadence,
intentional transponder-off windows and a range-limited reception channel.

The output is a list of ``(rx_time, sentence)`` pairs that the codec can
read back.  Everything here is synthetic: scenario files stand in for real
port traffic and say so in their ``synthetic`` flag.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .codec import PositionReport, encode_position_report
from .errors import ValidationError
from .geo import ROSTOCK, GeoPoint, destination, haversine_nmi, initial_bearing, intermediate_point

NAV_UNDER_WAY = 0
NAV_ANCHORED = 1
NAV_MOORED = 5

# (upper speed bound in knots, interval in seconds) for vessels under way
CADENCE_TABLE = ((14.0, 10.0), (23.0, 6.0), (math.inf, 2.0))
STATIONARY_INTERVAL = 180.0


def cadence(speed_knots: float, nav_status: int = NAV_UNDER_WAY, table=CADENCE_TABLE) -> float:
    """Reporting interval in seconds for a Class A transponder."""
    if speed_knots < 0:
        raise ValidationError("speed must be non-negative")
    if nav_status in (NAV_ANCHORED, NAV_MOORED):
        return STATIONARY_INTERVAL
    for upper, interval in table:
        if speed_knots <= upper:
            return interval
    return table[-1][1]


@dataclass
class VesselScript:
    """One vessel's itinerary.

    ``waypoints`` pairs each position with the speed (knots) sailed on the leg
    that leaves it; the speed on the last waypoint is ignored.  A single
    waypoint means the vessel stays put.  Times are seconds from scenario start.
    """

    mmsi: int
    waypoints: list[tuple[GeoPoint, float]]
    start_time: float = 0.0
    off_windows: list[tuple[float, float]] = field(default_factory=list)
    nav_status: list[tuple[float, int]] = field(default_factory=lambda: [(0.0, NAV_UNDER_WAY)])
    msg_type: int = 1

    def __post_init__(self):
        if not self.waypoints:
            raise ValidationError(f"vessel {self.mmsi} has no waypoints")
        if any(speed < 0 for _, speed in self.waypoints):
            raise ValidationError(f"vessel {self.mmsi} has a negative speed")
        ends = 0.0
        for start, dur in self.off_windows:
            if dur < 0 or start < ends:
                raise ValidationError(f"vessel {self.mmsi}: off windows overlap or are unordered")
            ends = start + dur
        self._legs = []
        t = self.start_time
        for (a, speed), (b, _) in zip(self.waypoints, self.waypoints[1:]):
            dist = haversine_nmi(a, b)
            if speed <= 0:
                break
            dur = dist / speed * 3600.0
            self._legs.append((t, dur, a, b, speed))
            t += dur
        self.end_time = t if self._legs else math.inf
        self._status_times = [s for s, _ in self.nav_status]

    def status_at(self, t: float) -> int:
        i = bisect.bisect_right(self._status_times, t - self.start_time) - 1
        return self.nav_status[max(i, 0)][1]

    def is_off(self, t: float) -> bool:
        rel = t - self.start_time
        return any(s <= rel < s + d for s, d in self.off_windows)

    def state_at(self, t: float) -> tuple[GeoPoint, float, float] | None:
        """``(position, sog, cog)`` at absolute scenario time ``t``; None once the route ends."""
        if not self._legs:
            return self.waypoints[0][0], 0.0, 0.0
        if t > self.end_time:
            return None
        for t0, dur, a, b, speed in self._legs:
            if t <= t0 + dur:
                frac = 0.0 if dur == 0 else (t - t0) / dur
                pos = intermediate_point(a, b, min(max(frac, 0.0), 1.0))
                cog = initial_bearing(pos, b) if frac < 1.0 else initial_bearing(a, b)
                return pos, speed, cog
        return None


@dataclass(frozen=True)
class ChannelModel:
    """Reception model: fixed loss probabilities inside and beyond ``range_nmi``.

    ``fade_nmi`` > 0 ramps the loss probability linearly from the in-range to
    the beyond-range value across that band past the range, so a few reports
    from just beyond the nominal range still arrive.
    """

    station: GeoPoint = ROSTOCK
    range_nmi: float = 40.0
    in_range_loss_prob: float = 0.02
    beyond_range_loss_prob: float = 1.0
    fade_nmi: float = 0.0

    def __post_init__(self):
        for p in (self.in_range_loss_prob, self.beyond_range_loss_prob):
            if not 0.0 <= p <= 1.0:
                raise ValidationError("loss probabilities must lie in [0, 1]")
        if self.range_nmi <= 0 or self.fade_nmi < 0:
            raise ValidationError("range must be positive and fade non-negative")

    def loss_prob(self, dist_nmi: float) -> float:
        if dist_nmi <= self.range_nmi:
            return self.in_range_loss_prob
        if self.fade_nmi > 0 and dist_nmi < self.range_nmi + self.fade_nmi:
            frac = (dist_nmi - self.range_nmi) / self.fade_nmi
            return self.in_range_loss_prob + frac * (self.beyond_range_loss_prob - self.in_range_loss_prob)
        return self.beyond_range_loss_prob


def _simulate_vessel(script: VesselScript, channel: ChannelModel, rng: np.random.Generator,
                     end_time: float, epoch: float) -> list[tuple[float, int, str]]:
    out = []
    t = script.start_time
    while t <= end_time:
        state = script.state_at(t)
        if state is None:
            break
        pos, sog, cog = state
        status = script.status_at(t)
        keep = rng.random() >= channel.loss_prob(haversine_nmi(pos, channel.station))
        chan = "A" if rng.random() < 0.5 else "B"
        if keep and not script.is_off(t):
            rx = round(epoch + t, 3)
            report = PositionReport(
                msg_type=script.msg_type,
                mmsi=script.mmsi,
                nav_status=status,
                lat=round(pos.lat * 600_000) / 600_000,
                lon=round(pos.lon * 600_000) / 600_000,
                sog=min(round(sog * 10), 1022) / 10.0,
                cog=round(cog * 10) % 3600 / 10.0,
                rx_timestamp=rx,
            )
            out.append((rx, script.mmsi, encode_position_report(report, chan)))
        t += cadence(sog, status)
    return out


def simulate(scripts: Sequence[VesselScript], channel: ChannelModel, rng: np.random.Generator,
             end_time: float, epoch: float = 0.0) -> list[tuple[float, str]]:
    """Emit received sentences for every vessel up to ``end_time`` seconds.

    Each vessel draws from its own child generator, so adding a vessel at the
    end of ``scripts`` leaves the others' streams unchanged.  The merged
    stream is ordered by receive time, then MMSI.
    """
    seeds = rng.integers(0, 2**63 - 1, size=len(scripts))
    merged = []
    for script, s in zip(scripts, seeds):
        merged.extend(_simulate_vessel(script, channel, np.random.default_rng(int(s)), end_time, epoch))
    merged.sort(key=lambda item: (item[0], item[1]))
    return [(t, line) for t, _, line in merged]


def format_stream(stream) -> str:
    return "".join(f"{t:.3f}\t{line}\n" for t, line in stream)


# --------------------------------------------------------------------------
# scenario files


@dataclass
class Scenario:
    vessels: list[VesselScript]
    channel: ChannelModel
    duration: float
    seed: int = 0
    epoch: float = 1_600_000_000.0
    name: str = "scenario"

    def run(self) -> list[tuple[float, str]]:
        return simulate(self.vessels, self.channel, np.random.default_rng(self.seed), self.duration,
                        self.epoch)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "synthetic": True,
            "seed": self.seed,
            "epoch": self.epoch,
            "duration": self.duration,
            "channel": {
                "station": {"lat": self.channel.station.lat, "lon": self.channel.station.lon},
                "range_nmi": self.channel.range_nmi,
                "in_range_loss_prob": self.channel.in_range_loss_prob,
                "beyond_range_loss_prob": self.channel.beyond_range_loss_prob,
                "fade_nmi": self.channel.fade_nmi,
            },
            "vessels": [
                {
                    "mmsi": v.mmsi,
                    "start_time": v.start_time,
                    "waypoints": [[p.lat, p.lon, s] for p, s in v.waypoints],
                    "off_windows": [list(w) for w in v.off_windows],
                    "nav_status": [list(s) for s in v.nav_status],
                    "msg_type": v.msg_type,
                }
                for v in self.vessels
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        ch = dict(d.get("channel", {}))
        if "station" in ch:
            ch["station"] = GeoPoint(**ch["station"])
        vessels = [
            VesselScript(
                mmsi=int(v["mmsi"]),
                waypoints=[(GeoPoint(lat=w[0], lon=w[1]), float(w[2])) for w in v["waypoints"]],
                start_time=float(v.get("start_time", 0.0)),
                off_windows=[(float(a), float(b)) for a, b in v.get("off_windows", [])],
                nav_status=[(float(a), int(b)) for a, b in v.get("nav_status", [[0.0, 0]])],
                msg_type=int(v.get("msg_type", 1)),
            )
            for v in d.get("vessels", [])
        ]
        return cls(vessels, ChannelModel(**ch), float(d["duration"]), int(d.get("seed", 0)),
                   float(d.get("epoch", 1_600_000_000.0)), d.get("name", "scenario"))


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=1)
        fh.write("\n")


def _route(rng, start: GeoPoint, heading: float, speed: float, seconds: float, legs: int):
    pts = [(start, speed)]
    leg_nmi = speed * seconds / 3600.0 / legs
    here = start
    for i in range(legs):
        if i:
            heading = (heading + rng.uniform(-50.0, 50.0)) % 360.0
        here = destination(here, heading, leg_nmi)
        pts.append((here, speed))
    return pts


def generate_scenario(n_vessels: int = 110, duration: float = 10_800.0, seed: int = 0,
                      off_fraction: float = 0.2, crossing_fraction: float = 0.08,
                      stationary_fraction: float = 0.05, slow_fraction: float = 0.03,
                      active_range=(600.0, 1500.0), fade_nmi: float = 1.5,
                      station: GeoPoint = ROSTOCK, name: str = "desk") -> Scenario:
    """Random traffic around ``station``.

    Mix: under-way vessels in three cadence bands, a ``crossing_fraction``
    sailing outward through the reception boundary, anchored/moored and
    sub-3-knot vessels that the pipeline filters out, and intentional off
    windows of 150-600 s on ``off_fraction`` of the moving vessels.
    """
    rng = np.random.default_rng(seed)
    vessels = []
    kinds = rng.random(n_vessels)
    for i in range(n_vessels):
        mmsi = 211_000_000 + 1000 * i + int(rng.integers(0, 1000))
        k = kinds[i]
        if k < stationary_fraction:
            pos = destination(station, rng.uniform(-70, 70) % 360, rng.uniform(2, 15))
            status = NAV_ANCHORED if rng.random() < 0.5 else NAV_MOORED
            vessels.append(VesselScript(mmsi, [(pos, 0.0)], float(round(rng.uniform(0, 600), 1)),
                                        nav_status=[(0.0, status)]))
            continue
        if k < stationary_fraction + slow_fraction:
            speed = rng.uniform(0.5, 2.9)
        else:
            band = rng.random()
            speed = rng.uniform(6, 14) if band < 0.62 else rng.uniform(14.5, 22) if band < 0.95 \
                else rng.uniform(23.5, 28)
        crossing = k > 1.0 - crossing_fraction
        if crossing:
            bearing = rng.uniform(-60, 60) % 360
            start = destination(station, bearing, rng.uniform(37.5, 39.5))
            seconds = (45.0 - 37.5) / speed * 3600.0
            route = _route(rng, start, bearing, speed, seconds, 1)
        else:
            seconds = rng.uniform(*active_range)
            start = destination(station, rng.uniform(-75, 75) % 360, rng.uniform(3, 30))
            route = _route(rng, start, rng.uniform(0, 360), speed, seconds, int(rng.integers(1, 4)))
        seconds = min(seconds, duration - 60)
        t0 = float(round(rng.uniform(0, duration - seconds), 1))
        off = []
        if not crossing and rng.random() < off_fraction / (1.0 - crossing_fraction):
            length = float(round(rng.uniform(150, 600), 1))
            begin = float(round(rng.uniform(0.15, 0.6) * seconds, 1))
            off.append((begin, length))
        vessels.append(VesselScript(mmsi, route, t0, off))
    channel = ChannelModel(station=station, fade_nmi=fade_nmi)
    return Scenario(vessels, channel, duration, seed, name=name)
