import numpy as np
import pytest

from ais_sentinel.codec import decode_lines, decode_position_report, parse_sentence, payload_to_bits
from ais_sentinel.errors import ValidationError
from ais_sentinel.geo import ROSTOCK, GeoPoint, destination, distance_to_station
from ais_sentinel.pipeline import Label, Origin, PrepConfig, build_samples, extract_tracks, \
    prepare_samples, resample_track
from ais_sentinel.simgen import (
    NAV_ANCHORED, NAV_MOORED, ChannelModel, Scenario, VesselScript, cadence, format_stream,
    generate_scenario, load_scenario, save_scenario, simulate,
)

LOSSLESS = ChannelModel(in_range_loss_prob=0.0, beyond_range_loss_prob=0.0)


def straight(mmsi=1, speed=10.0, start_nmi=5.0, length_nmi=5.0, bearing=45.0, **kw):
    a = destination(ROSTOCK, bearing, start_nmi)
    b = destination(a, bearing, length_nmi)
    return VesselScript(mmsi, [(a, speed), (b, speed)], **kw)


def reports_of(stream):
    reps, stats = decode_lines(f"{t}\t{line}" for t, line in stream)
    assert stats.rejected_total == 0
    return reps


def test_cadence_examples():
    assert cadence(25.0) == 2.0
    assert cadence(10.0) == 10.0
    assert cadence(18.0) == 6.0
    assert cadence(0.0, NAV_ANCHORED) == 180.0
    assert cadence(0.0, NAV_MOORED) == 180.0
    with pytest.raises(ValidationError):
        cadence(-1.0)


def test_zero_vessels_empty_stream():
    assert simulate([], LOSSLESS, np.random.default_rng(0), 1000.0) == []


@pytest.mark.parametrize("speed", [8.0, 18.0, 25.0])
def test_gaps_equal_cadence_without_loss(speed):
    stream = simulate([straight(speed=speed, length_nmi=3.0)], LOSSLESS, np.random.default_rng(1), 3600.0)
    times = np.array([t for t, _ in stream])
    np.testing.assert_allclose(np.diff(times), cadence(speed), atol=1e-9)


def test_every_sentence_decodes():
    sc = generate_scenario(n_vessels=15, duration=1200.0, seed=4)
    for _, line in sc.run():
        raw = parse_sentence(line)
        decode_position_report(payload_to_bits(raw.payload, raw.fill_bits))


def test_deterministic_given_seed():
    sc = generate_scenario(n_vessels=12, duration=1200.0, seed=5)
    assert sc.run() == sc.run()
    other = Scenario(sc.vessels, sc.channel, sc.duration, seed=6)
    assert other.run() != sc.run()


def test_adding_a_vessel_keeps_others():
    a = straight(1)
    b = straight(2, bearing=100.0)
    ch = ChannelModel()
    one = simulate([a], ch, np.random.default_rng(3), 2000.0)
    two = simulate([a, b], ch, np.random.default_rng(3), 2000.0)
    first = [x for x in two if parse_sentence(x[1]).payload in {parse_sentence(y[1]).payload for y in one}]
    assert first == one


def test_stream_sorted_and_formatted():
    sc = generate_scenario(n_vessels=8, duration=900.0, seed=2)
    stream = sc.run()
    assert [t for t, _ in stream] == sorted(t for t, _ in stream)
    text = format_stream(stream[:2])
    assert text.count("\n") == 2 and "\t!AIVDM," in text


def test_off_window_produces_anomaly():
    v = straight(speed=10.0, length_nmi=6.0, off_windows=[(300.0, 110.0)])
    reps = reports_of(simulate([v], LOSSLESS, np.random.default_rng(0), 3600.0))
    times = np.array([r.rx_timestamp for r in reps])
    gap = np.argmax(np.diff(times))
    assert times[gap + 1] - times[gap] == pytest.approx(120.0)
    cfg = PrepConfig()
    s = build_samples(resample_track(extract_tracks(reps, cfg)[0], cfg), cfg)
    anchored = {round(t, 3): lab for t, lab in zip(s.anchor_time, s.label)}
    assert anchored[round(times[gap], 3)] == Label.ANOMALY
    assert anchored[round(times[gap - 1], 3)] == Label.NORMAL


def test_crossing_vessel_hard_cutoff():
    v = straight(speed=20.0, start_nmi=30.0, length_nmi=30.0, bearing=0.0)
    reps = reports_of(simulate([v], ChannelModel(in_range_loss_prob=0.0), np.random.default_rng(0), 9000.0))
    d = distance_to_station([r.lat for r in reps], [r.lon for r in reps])
    assert d.max() <= 40.0
    cfg = PrepConfig(mode="3-class")
    samples, _ = prepare_samples(reps, cfg, seed=0)
    real = samples.take(np.flatnonzero(samples.origin == Origin.REAL))
    # the final received report sits just inside the range, so its window is an anomaly
    assert real.label[-1] == Label.ANOMALY
    assert real.anchor_distance[-1] > 39.0
    assert (samples.label == Label.POWER_OUTAGE).any()


def test_crossing_vessel_with_fade_band_yields_real_outage():
    v = straight(speed=20.0, start_nmi=30.0, length_nmi=30.0, bearing=0.0)
    ch = ChannelModel(in_range_loss_prob=0.0, fade_nmi=3.0)
    reps = reports_of(simulate([v], ch, np.random.default_rng(0), 9000.0))
    cfg = PrepConfig(mode="3-class")
    grid = resample_track(extract_tracks(reps, cfg)[0], cfg)
    s = build_samples(grid, cfg)
    assert s.anchor_distance[-1] > 40.0
    assert s.label[-1] == Label.POWER_OUTAGE


def test_channel_loss_prob():
    ch = ChannelModel(in_range_loss_prob=0.1, beyond_range_loss_prob=1.0, fade_nmi=2.0)
    assert ch.loss_prob(10.0) == 0.1
    assert ch.loss_prob(41.0) == pytest.approx(0.55)
    assert ch.loss_prob(43.0) == 1.0
    with pytest.raises(ValidationError):
        ChannelModel(in_range_loss_prob=1.5)


def test_script_validation_and_state():
    with pytest.raises(ValidationError):
        VesselScript(1, [])
    with pytest.raises(ValidationError):
        straight(off_windows=[(100.0, 50.0), (120.0, 10.0)])
    moored = VesselScript(2, [(GeoPoint(54.2, 12.1), 0.0)], nav_status=[(0.0, NAV_MOORED)])
    assert moored.state_at(1e6)[1] == 0.0
    v = straight(speed=10.0, length_nmi=1.0)
    assert v.state_at(v.end_time + 1) is None


def test_scenario_file_round_trip(tmp_path):
    sc = generate_scenario(n_vessels=6, duration=600.0, seed=8)
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back.to_dict() == sc.to_dict()
    assert back.run() == sc.run()
    assert back.to_dict()["synthetic"] is True


def test_generated_mix():
    sc = generate_scenario(seed=1)
    assert len(sc.vessels) >= 100 and sc.duration >= 3 * 3600
    moving = [v for v in sc.vessels if len(v.waypoints) > 1]
    off = sum(1 for v in moving if v.off_windows)
    assert 0.1 <= off / len(sc.vessels) <= 0.3
