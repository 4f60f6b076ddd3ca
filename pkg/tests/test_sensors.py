import math

import pytest
from hypothesis import given, strategies as st

from minewatch.sensors import (ChannelModel, HazardEvent, Reading,
                               SensorField, SensorKind, SensorModel,
                               quantize, substream)


def flat_model(overrides=None):
    """Noise-free model so walks sit at their baselines."""
    channels = dict(SensorModel.default().channels)
    for kind, ch in channels.items():
        channels[kind] = ChannelModel(ch.baseline, 0.0, ch.min_value,
                                      ch.max_value)
    for kind, ch in (overrides or {}).items():
        channels[kind] = ch
    return SensorModel(channels=channels, kappa=0.1)


class TestQuantize:
    def test_temperature_nearest_half(self):
        assert quantize(SensorKind.TEMPERATURE, 23.27) == 23.5
        assert quantize(SensorKind.TEMPERATURE, 23.1) == 23.0
        assert quantize(SensorKind.TEMPERATURE, -5.1) == -5.0

    def test_temperature_tie_rounds_away_from_zero(self):
        assert quantize(SensorKind.TEMPERATURE, 23.25) == 23.5
        assert quantize(SensorKind.TEMPERATURE, -23.25) == -23.5

    def test_light_clamps_to_16_bits(self):
        assert quantize(SensorKind.LIGHT, 70000.2) == 65535
        assert quantize(SensorKind.LIGHT, -3.0) == 0
        assert quantize(SensorKind.LIGHT, 1234.4) == 1234

    def test_gas_storage_units(self):
        assert quantize(SensorKind.METHANE, 1.0) == 100
        assert quantize(SensorKind.OXYGEN, 20.9) == 2090
        assert quantize(SensorKind.CARBON_MONOXIDE, 17.6) == 18
        assert quantize(SensorKind.METHANE, -0.2) == 0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            quantize(SensorKind.TEMPERATURE, math.nan)

    @given(st.floats(min_value=-1e6, max_value=1e6,
                     allow_nan=False, allow_infinity=False))
    def test_temperature_idempotent_and_close(self, x):
        q = quantize(SensorKind.TEMPERATURE, x)
        assert quantize(SensorKind.TEMPERATURE, q) == q
        assert abs(q - x) <= 0.25
        assert (q * 2) == int(q * 2)


class TestSample:
    def test_noise_free_at_baseline_stays_there(self):
        field = SensorField(flat_model(), seed=1)
        for t in range(0, 50000, 10000):
            r = field.sample(3, SensorKind.TEMPERATURE, t)
            assert r.value == 23.0

    def test_hazard_ramp_reaches_its_total(self):
        model = flat_model({
            SensorKind.METHANE: ChannelModel(0.0, 0.0, 0.0, 100.0)})
        hazard = HazardEvent(SensorKind.METHANE, node=3,
                             start_ms=0, end_ms=10_000, ramp_rate=0.1)
        field = SensorField(model, seed=1, hazards=[hazard])
        r = field.sample(3, SensorKind.METHANE, 10_000)
        assert r.value == 100  # 1.00 %vol
        # after the event, back to baseline
        assert field.sample(3, SensorKind.METHANE, 20_000).value == 0

    def test_hazard_only_hits_its_node(self):
        model = flat_model({
            SensorKind.METHANE: ChannelModel(0.0, 0.0, 0.0, 100.0)})
        hazard = HazardEvent(SensorKind.METHANE, 3, 0, 10_000, 0.1)
        field = SensorField(model, seed=1, hazards=[hazard])
        assert field.sample(4, SensorKind.METHANE, 5_000).value == 0

    def test_bad_hazard_window_rejected(self):
        with pytest.raises(ValueError):
            HazardEvent(SensorKind.METHANE, 3, 10_000, 10_000, 0.1)

    def test_same_seed_same_sequence(self):
        runs = []
        for _ in range(2):
            field = SensorField(SensorModel.default(), seed=42)
            runs.append([field.sample(1, SensorKind.TEMPERATURE, t * 1000)
                         for t in range(100)])
        assert runs[0] == runs[1]

    def test_other_nodes_unaffected_by_extra_streams(self):
        field_a = SensorField(SensorModel.default(), seed=42)
        seq_a = [field_a.sample(1, SensorKind.TEMPERATURE, t) for t in range(20)]
        field_b = SensorField(SensorModel.default(), seed=42)
        out_b = []
        for t in range(20):
            out_b.append(field_b.sample(1, SensorKind.TEMPERATURE, t))
            field_b.sample(2, SensorKind.LIGHT, t)  # interleaved extra node
        assert seq_a == out_b

    def test_seq_strictly_increases_per_channel(self):
        field = SensorField(SensorModel.default(), seed=7)
        seqs = [field.sample(1, SensorKind.LIGHT, t).seq for t in range(50)]
        assert seqs == list(range(50))

    def test_mean_reversion_monotone_without_noise(self):
        model = flat_model()
        field = SensorField(model, seed=1)
        # start the walk away from baseline
        state = field._channel(1, SensorKind.TEMPERATURE)
        state.walk = 30.0
        values = []
        for t in range(100):
            field.sample(1, SensorKind.TEMPERATURE, t)
            values.append(state.walk)
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert abs(values[-1] - 23.0) < 0.01

    def test_emitted_readings_respect_invariants(self):
        field = SensorField(SensorModel.default(), seed=3)
        for t in range(100):
            r = field.sample(5, SensorKind.LIGHT, t)
            assert 0 <= r.value <= 65535
            rt = field.sample(5, SensorKind.TEMPERATURE, t)
            assert rt.value * 2 == int(rt.value * 2)
            for kind in (SensorKind.METHANE, SensorKind.CARBON_MONOXIDE,
                         SensorKind.OXYGEN):
                assert field.sample(5, kind, t).value >= 0


class TestSubstream:
    def test_distinct_names_distinct_streams(self):
        a = substream(1, "sensor", 1, "temperature")
        b = substream(1, "sensor", 2, "temperature")
        assert [a.random() for _ in range(5)] != [b.random() for _ in range(5)]

    def test_same_name_same_stream(self):
        a = substream(1, "radio")
        b = substream(1, "radio")
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
