"""Shared builders for synthetic traces and fleets used across the test suite."""

from datetime import timedelta

import numpy as np

from adequacy.ingest import SeasonTrace, SeasonWindow


def hourly_timestamps(window: SeasonWindow, season_label: str, n_hours: int | None = None):
    start, _ = window.bounds(season_label)
    n = n_hours if n_hours is not None else window.expected_hours
    return np.array([start + timedelta(hours=h) for h in range(n)], dtype="datetime64[s]")


def make_trace(
    season_label: str,
    demand,
    wind,
    window: SeasonWindow | None = None,
    rescale_factor: float = 1.0,
) -> SeasonTrace:
    window = window or SeasonWindow()
    demand = np.asarray(demand, dtype=float)
    return SeasonTrace(
        season_label=season_label,
        timestamps=hourly_timestamps(window, season_label, demand.size),
        demand_mw=demand,
        wind_mw=np.asarray(wind, dtype=float),
        rescale_factor=rescale_factor,
    )


def random_season(
    season_label: str,
    rng,
    window: SeasonWindow | None = None,
    demand_level: float = 45_000.0,
    wind_capacity: float = 14_000.0,
) -> SeasonTrace:
    """A rough GB-scale season: diurnal demand plus noise, bounded wind."""
    window = window or SeasonWindow()
    n = window.expected_hours
    hod = np.arange(n) % 24
    shape = 0.85 + 0.15 * np.sin((hod - 4.0) / 24.0 * 2.0 * np.pi)
    demand = demand_level * shape + rng.normal(0.0, 2_000.0, n)
    demand = np.clip(demand, 1_000.0, None)
    wind = wind_capacity / (1.0 + np.exp(-rng.normal(-0.3, 1.2, n)))
    return make_trace(season_label, demand, wind, window)


def write_trace_csv(path, traces):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("season,timestamp,demand_mw,wind_mw\n")
        for trace in traces:
            for ts, d, w in zip(
                trace.timestamps.astype(object), trace.demand_mw, trace.wind_mw
            ):
                fh.write(f"{trace.season_label},{ts.isoformat()},{float(d)!r},{float(w)!r}\n")
    return path


def write_fleet_csv(path, units):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name,capacity_mw,availability\n")
        for name, cap, avail in units:
            fh.write(f"{name},{cap},{avail}\n")
    return path
