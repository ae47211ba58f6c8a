"""Drought-severity analytics over the central observational database.

Per-region indicators (temperature anomaly against the climatological
normal, precipitation normalised to mm per 30-day month, circular-mean
wind), a four-class severity classifier with strict thresholds, the
windowed drought-evolution pattern, and the wind-advection forecast
that escalates the downwind neighbour of a drought-stricken region.

All passes are read-only over a completed database.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum

from .backbone import CentralDatabase
from .environment import Climatology, normal_temp_over_window
from .geometry import GeoPoint

DAY_S = 86_400
MONTH_S = 30 * DAY_S
MIN_WINDOW_S = 30 * DAY_S


class AnalyticsError(Exception):
    pass


class NoData(AnalyticsError):
    pass


class InsufficientSpan(AnalyticsError):
    pass


class InvalidThresholds(AnalyticsError):
    pass


class SeverityClass(IntEnum):
    NON_DROUGHT = 0
    SLIGHT = 1
    MODERATE = 2
    SERIOUS = 3

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    SeverityClass.NON_DROUGHT: "NonDrought",
    SeverityClass.SLIGHT: "Slight",
    SeverityClass.MODERATE: "Moderate",
    SeverityClass.SERIOUS: "Serious",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}


def severity_from_label(label: str) -> SeverityClass:
    try:
        return _BY_LABEL[label]
    except KeyError:
        raise AnalyticsError(f"unknown severity label {label!r}") from None


def escalate(cls: SeverityClass) -> SeverityClass:
    return SeverityClass(min(int(cls) + 1, int(SeverityClass.SERIOUS)))


@dataclass(frozen=True, slots=True)
class Thresholds:
    """Classifier cut points; only the 25 mm moderate-rainfall bound is
    sourced from the field description, the rest are exposed defaults."""

    precip_serious_mm: float = 5.0
    temp_serious_c: float = 2.0
    precip_moderate_mm: float = 25.0
    temp_moderate_c: float = 1.0
    precip_slight_mm: float = 50.0
    temp_slight_c: float = 0.5

    def validate(self) -> "Thresholds":
        if not (self.precip_serious_mm < self.precip_moderate_mm < self.precip_slight_mm):
            raise InvalidThresholds("precipitation thresholds must increase with mildness")
        if not (self.temp_serious_c > self.temp_moderate_c > self.temp_slight_c):
            raise InvalidThresholds("temperature thresholds must decrease with mildness")
        return self


@dataclass(frozen=True, slots=True)
class DroughtIndicators:
    region_id: int
    window: tuple[int, int]
    mean_temp_anomaly_c: float
    mean_monthly_precip_mm: float
    wind_mean_dir_deg: float
    wind_mean_speed_ms: float
    record_count: int


@dataclass(frozen=True, slots=True)
class EvolutionPattern:
    region_id: int
    entries: tuple  # ((window, SeverityClass, DroughtIndicators), ...)


def _aggregate(db: CentralDatabase, start: int, window_s: int) -> dict:
    """One pass over the database: per (region, window index) sums of
    temperature, precipitation, wind vector components and speed."""
    sums: dict[tuple[int, int], list] = {}
    region_col, ts_col = db.region, db.ts
    temp = db.cal["temperature_c"]
    precip = db.cal["precipitation_mm"]
    wdir = db.cal["wind_dir_deg"]
    wspd = db.cal["wind_speed_ms"]
    sin, cos, rad = math.sin, math.cos, math.radians
    for i in range(len(ts_col)):
        t = ts_col[i]
        if t < start:
            continue
        key = (region_col[i], (t - start) // window_s)
        acc = sums.get(key)
        if acc is None:
            acc = sums[key] = [0, 0.0, 0.0, 0.0, 0.0, 0.0, set()]
        acc[0] += 1
        acc[1] += temp[i]
        acc[2] += precip[i]
        a = rad(wdir[i])
        acc[3] += sin(a)
        acc[4] += cos(a)
        acc[5] += wspd[i]
        acc[6].add(db.node[i])
    return sums


def _indicators_from_acc(region_id: int, window: tuple[int, int], acc: list,
                         climatology: Climatology) -> DroughtIndicators:
    n, sum_t, sum_p, sum_sin, sum_cos, sum_spd, nodes = acc
    t0, t1 = window
    normal = normal_temp_over_window(climatology, t0, t1)
    monthly = (sum_p / len(nodes)) * (MONTH_S / (t1 - t0))
    wind_dir = math.degrees(math.atan2(sum_sin / n, sum_cos / n)) % 360.0
    return DroughtIndicators(
        region_id=region_id,
        window=window,
        mean_temp_anomaly_c=sum_t / n - normal,
        mean_monthly_precip_mm=monthly,
        wind_mean_dir_deg=wind_dir,
        wind_mean_speed_ms=sum_spd / n,
        record_count=n,
    )


def compute_indicators(db: CentralDatabase, region_id: int, window: tuple[int, int],
                       climatology: Climatology) -> DroughtIndicators:
    """Indicators from calibrated records in the half-open window [t0, t1)."""
    return indicators_all(db, {region_id: climatology}, window)[region_id]


def indicators_all(db: CentralDatabase, climatologies: dict[int, Climatology],
                   window: tuple[int, int]) -> dict[int, DroughtIndicators]:
    """One database pass serving every region's window indicators."""
    t0, t1 = window
    if t1 - t0 < MIN_WINDOW_S:
        raise AnalyticsError(f"window shorter than 30 days: {window}")
    sums = _aggregate(db, t0, t1 - t0)
    out = {}
    for region_id, clim in climatologies.items():
        acc = sums.get((region_id, 0))
        if acc is None or acc[0] == 0:
            raise NoData(f"no region-{region_id} records in {window}")
        out[region_id] = _indicators_from_acc(region_id, window, acc, clim)
    return out


def classify(ind: DroughtIndicators, thresholds: Thresholds = Thresholds()) -> SeverityClass:
    """Four ordered classes with strict cut points: a value exactly at a
    threshold falls to the milder class."""
    thresholds.validate()
    precip = ind.mean_monthly_precip_mm
    anomaly = ind.mean_temp_anomaly_c
    if precip < thresholds.precip_serious_mm and anomaly > thresholds.temp_serious_c:
        return SeverityClass.SERIOUS
    if precip < thresholds.precip_moderate_mm and anomaly > thresholds.temp_moderate_c:
        return SeverityClass.MODERATE
    if precip < thresholds.precip_slight_mm or anomaly > thresholds.temp_slight_c:
        return SeverityClass.SLIGHT
    return SeverityClass.NON_DROUGHT


def evolve_pattern(db: CentralDatabase, region_id: int, window_len_days: int,
                   climatology: Climatology,
                   thresholds: Thresholds = Thresholds()) -> EvolutionPattern:
    """Partition the record span into consecutive windows and classify each."""
    return evolve_all(db, {region_id: climatology}, window_len_days, thresholds)[region_id]


def evolve_all(db: CentralDatabase, climatologies: dict[int, Climatology],
               window_len_days: int,
               thresholds: Thresholds = Thresholds()) -> dict[int, EvolutionPattern]:
    """One database pass serving every region's evolution pattern."""
    if window_len_days < 30:
        raise AnalyticsError("windows must be at least 30 days")
    if len(db) == 0:
        raise NoData("empty database")
    window_s = window_len_days * DAY_S
    _, t_max = db.span()
    # a window counts as complete when records reach within a day of its
    # end; shorter tails (e.g. the 5-day remainder of a 365-day year over
    # 30-day windows) are dropped
    n_windows = (t_max + DAY_S) // window_s
    if n_windows < 2:
        raise InsufficientSpan(
            f"span {t_max + 1} s holds {n_windows} windows of {window_len_days} d; need 2"
        )
    sums = _aggregate(db, 0, window_s)
    out = {}
    for region_id, clim in climatologies.items():
        entries = []
        for k in range(n_windows):
            acc = sums.get((region_id, k))
            if acc is None or acc[0] == 0:
                raise NoData(f"no region-{region_id} records in window {k}")
            window = (k * window_s, (k + 1) * window_s)
            ind = _indicators_from_acc(region_id, window, acc, clim)
            entries.append((window, classify(ind, thresholds), ind))
        out[region_id] = EvolutionPattern(region_id=region_id, entries=tuple(entries))
    return out


def _bearing_deg(frm: GeoPoint, to: GeoPoint) -> float:
    return math.degrees(math.atan2(to.y_km - frm.y_km, to.x_km - frm.x_km)) % 360.0


def _angle_diff(a: float, b: float) -> float:
    return abs((a - b + 180.0) % 360.0 - 180.0)


def advect_forecast(
    current: dict[int, SeverityClass],
    indicators: dict[int, DroughtIndicators],
    region_layout: dict[int, GeoPoint],
    cone_half_angle_deg: float = 45.0,
) -> dict[int, SeverityClass]:
    """Severity forecast under wind advection.

    Each region at Moderate or worse escalates its downwind neighbour
    (the region whose bearing lies within the wind cone) by one class.
    Calm wind or an empty cone leaves forecasts at current classes; no
    forecast ever drops below the current class.
    """
    forecast = dict(current)
    for region, cls in current.items():
        if cls < SeverityClass.MODERATE:
            continue
        ind = indicators[region]
        if ind.wind_mean_speed_ms <= 0.0:
            continue
        origin = region_layout[region]
        best = None
        for other, pos in region_layout.items():
            if other == region or other not in current:
                continue
            diff = _angle_diff(_bearing_deg(origin, pos), ind.wind_mean_dir_deg)
            if diff <= cone_half_angle_deg + 1e-9:
                cand = (diff, origin.distance_to(pos), other)
                if best is None or cand < best:
                    best = cand
        if best is not None:
            downwind = best[2]
            forecast[downwind] = max(forecast[downwind], escalate(current[downwind]))
    return forecast


# -- exports ------------------------------------------------------------------


def patterns_to_csv_lines(patterns: dict[int, EvolutionPattern]):
    yield "region,window_start_s,window_end_s,class,anomaly_C,precip_mm"
    for region in sorted(patterns):
        for (t0, t1), cls, ind in patterns[region].entries:
            yield (
                f"{region},{t0},{t1},{cls.label},"
                f"{ind.mean_temp_anomaly_c!r},{ind.mean_monthly_precip_mm!r}"
            )


def forecast_to_json(current: dict[int, SeverityClass],
                     forecast: dict[int, SeverityClass]) -> str:
    payload = {
        str(region): {"current": current[region].label, "forecast": forecast[region].label}
        for region in sorted(current)
    }
    return json.dumps(payload, indent=2, sort_keys=True)
