"""Representative-week selection for full-year hourly systems."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .system import HOURS_PER_YEAR, SystemSpec, TimeStructure

WEEK = 168


class TimeSeriesError(ValueError):
    pass


def parse_hours(flag: str) -> int | None:
    """``full`` -> None, ``weeks:<n>`` -> n."""
    if flag == "full":
        return None
    if flag.startswith("weeks:"):
        try:
            n = int(flag.split(":", 1)[1])
        except ValueError:
            raise TimeSeriesError(f"bad --hours value {flag!r}") from None
        if n < 1:
            raise TimeSeriesError("need at least one representative week")
        return n
    raise TimeSeriesError(f"bad --hours value {flag!r}; use full or weeks:<n>")


def _week_features(spec: SystemSpec, n_weeks: int) -> np.ndarray:
    cols = [z.demand for z in spec.zones]
    cols += [c.availability for c in spec.clusters if not np.isscalar(c.availability)]
    feats = []
    for series in cols:
        s = np.asarray(series[: n_weeks * WEEK], dtype=float)
        scale = float(np.max(np.abs(s))) or 1.0
        feats.append((s / scale).reshape(n_weeks, WEEK))
    return np.concatenate(feats, axis=1) if feats else np.zeros((n_weeks, 1))


def select_weeks(spec: SystemSpec, n_select: int) -> tuple[list[int], list[int]]:
    """Ward clustering of calendar weeks; returns chosen week indices and cluster sizes."""
    n_weeks = spec.time.n // WEEK
    if n_weeks < 1:
        raise TimeSeriesError("system has less than one week of hourly data")
    n_select = min(n_select, n_weeks)
    X = _week_features(spec, n_weeks)
    if n_select == n_weeks:
        return list(range(n_weeks)), [1] * n_weeks
    labels = fcluster(linkage(X, method="ward"), t=n_select, criterion="maxclust")
    chosen = []
    for lab in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == lab)
        centre = X[members].mean(axis=0)
        dist = np.linalg.norm(X[members] - centre, axis=1)
        # medoid; lowest week index on ties
        chosen.append((int(members[int(np.argmin(dist))]), len(members)))
    chosen.sort()
    return [w for w, _ in chosen], [k for _, k in chosen]


def aggregate_weeks(spec: SystemSpec, n_select: int) -> SystemSpec:
    """Replace a full hourly year by weighted representative weeks.

    Only systems with a full 8760-step year are aggregated; anything else is
    assumed to be aggregated already and is returned unchanged.
    """
    if spec.time.n != int(HOURS_PER_YEAR):
        return spec
    weeks, sizes = select_weeks(spec, n_select)
    n_weeks = spec.time.n // WEEK
    idx = np.concatenate([np.arange(w * WEEK, (w + 1) * WEEK) for w in weeks])
    weights = np.concatenate([np.full(WEEK, HOURS_PER_YEAR / WEEK * k / n_weeks) for k in sizes])
    time = TimeStructure(weights, (WEEK,) * len(weeks), np.ones(len(idx)))
    zones = tuple(replace(z, demand=z.demand[idx]) for z in spec.zones)
    clusters = tuple(
        c if np.isscalar(c.availability) else replace(c, availability=c.availability[idx]) for c in spec.clusters
    )
    return replace(spec, zones=zones, clusters=clusters, time=time)
