import numpy as np

from hybridcast.dataframe import load_csv
from hybridcast.synthetic import SyntheticSpec, cycle, gen_synthetic, generate

from conftest import FIXTURE


def test_quarter_period_cycle_exact():
    cols = generate(SyntheticSpec(n_points=12, trend=0.0, amplitude=1.0, period=4, noise_std=0.0,
                                  level=50.0))
    np.testing.assert_array_equal(cols["close"], 50.0 + np.tile([0.0, 1.0, 0.0, -1.0], 3))


def test_cycle_matches_sine_elsewhere():
    t = np.arange(100.0)
    np.testing.assert_allclose(cycle(t, 7.3), np.sin(2 * np.pi * t / 7.3), atol=1e-12)


def test_same_spec_same_text():
    assert gen_synthetic(SyntheticSpec(seed=9)) == gen_synthetic(SyntheticSpec(seed=9))
    assert gen_synthetic(SyntheticSpec(seed=9)) != gen_synthetic(SyntheticSpec(seed=10))


def test_default_line_count():
    assert len(gen_synthetic(SyntheticSpec()).splitlines()) == 501


def test_ohlcv_shape(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text(gen_synthetic(SyntheticSpec(n_points=80)))
    fr = load_csv(path)
    c = fr.columns
    assert np.all(c["high"] >= np.maximum(c["open"], c["close"]))
    assert np.all(c["low"] <= np.minimum(c["open"], c["close"]))
    assert np.all(c["volume"] > 0)
    assert np.all(np.diff(fr.timestamps.astype(np.int64)) > 0)


def test_bundled_fixture_is_default_spec():
    assert FIXTURE.read_text() == gen_synthetic(SyntheticSpec())
