import numpy as np

from adequacy.demo import (
    REFERENCE_SEASON,
    SEASON_LABELS,
    WIND_CAPACITY_MW,
    demo_fleet,
    demo_quantile_history,
    demo_traces,
    write_demo_dataset,
)
from adequacy.ingest import SeasonWindow, load_traces


def test_regeneration_is_byte_identical(tmp_path):
    a = write_demo_dataset(tmp_path / "a")
    b = write_demo_dataset(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_traces_have_gb_scale():
    traces = demo_traces()
    assert [t.season_label for t in traces] == list(SEASON_LABELS)
    for trace in traces:
        assert trace.n_hours == 3528
        assert 35_000.0 < trace.demand_mw.mean() < 50_000.0
        assert trace.demand_mw.max() < 70_000.0
        assert trace.wind_mw.min() >= 0.0
        assert trace.wind_mw.max() <= WIND_CAPACITY_MW


def test_dataset_roundtrips_through_ingest(tmp_path):
    paths = write_demo_dataset(tmp_path)
    loaded = load_traces(paths["traces"], SeasonWindow(), installed_wind_mw=WIND_CAPACITY_MW)
    assert len(loaded) == 7
    original = demo_traces()
    for got, want in zip(loaded, original):
        np.testing.assert_array_equal(got.demand_mw, want.demand_mw)
        np.testing.assert_array_equal(got.wind_mw, want.wind_mw)


def test_quantile_history_covers_1991_onward():
    history = demo_quantile_history()
    assert len(history) == 23
    assert history[0][0] == "1991-92"
    assert history[-1][0] == REFERENCE_SEASON
    values = np.array([v for _, v in history])
    assert np.all(values > 40_000.0) and np.all(values < 62_000.0)


def test_fleet_composition():
    units = demo_fleet()
    assert len(units) == 100
    total = sum(u.capacity_mw for u in units)
    assert 55_000 < total < 62_000
    assert all(0.8 <= u.availability <= 0.98 for u in units)
