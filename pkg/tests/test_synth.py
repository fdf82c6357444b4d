import math

import numpy as np

from ecfc.synth import SynthParams, synthesize


def test_noiseless_unmodulated_is_exact_sinusoid():
    s = synthesize(SynthParams(days=3, noise=0.0, weekly=0.0))
    expected = [100.0 + 40.0 * math.sin(2 * math.pi * (k % 48) / 48) for k in range(144)]
    np.testing.assert_allclose(s.values, expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(s.values[:48], s.values[48:96], rtol=0, atol=0)


def test_weekly_modulation_by_weekday():
    p = SynthParams(days=7, noise=0.0)  # starts on a Monday
    s = synthesize(p)
    slot = 12  # sin = 1
    monday, saturday = s.values[slot], s.values[5 * 48 + slot]
    assert monday == 100.0 + 40.0 * 1.25 and saturday == 100.0 + 40.0 * 0.75


def test_length_and_seed_determinism():
    assert len(synthesize(SynthParams(days=30))) == 1440
    a, b = synthesize(SynthParams(seed=4)), synthesize(SynthParams(seed=4))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, synthesize(SynthParams(seed=5)).values)


def test_longer_series_extends_shorter():
    short, long = synthesize(SynthParams(days=60)), synthesize(SynthParams(days=100))
    assert np.array_equal(long.values[: len(short)], short.values)


def test_noise_level():
    p = SynthParams(days=200)
    resid = synthesize(p).values - synthesize(SynthParams(days=200, noise=0.0)).values
    assert abs(resid.std() - 0.8) < 0.02
