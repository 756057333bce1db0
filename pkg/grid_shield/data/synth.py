"""Seeded synthetic household meter data.

Stands in for licensed circuit-level data with the same column names. Each
appliance follows a daily (and for some a weekly) profile with Gaussian
noise; oven, dishwasher, dryer and car draw come as discrete events. The
grid total is built from the channels so the detector has structure to
learn:

    grid = sum(non-solar channels) - solar + baseline
"""

from __future__ import annotations

import logging

import numpy as np

from grid_shield.data.series import STEP, MeterSeries
from grid_shield.errors import DataError

logger = logging.getLogger(__name__)

STEPS_PER_DAY = 96
APPLIANCES = (
    "air1",
    "furnace1",
    "refrigerator1",
    "lights_plugs1",
    "oven1",
    "dishwasher1",
    "drye1",
    "car1",
)
SOLAR = "solar"
NOISE_STD = 0.03


def _bump(hour: np.ndarray, centre: float, width: float) -> np.ndarray:
    return np.exp(-(((hour - centre) / width) ** 2))


def _events(
    rng: np.random.Generator,
    days: int,
    prob: float,
    start_hours: tuple[float, float],
    duration_steps: tuple[int, int],
    power_kw: float,
) -> np.ndarray:
    """At most one event per day, starting uniformly inside ``start_hours``."""
    total = days * STEPS_PER_DAY
    out = np.zeros(total)
    happens = rng.random(days) < prob
    starts = rng.uniform(*start_hours, size=days)
    durations = rng.integers(duration_steps[0], duration_steps[1] + 1, size=days)
    for day in np.flatnonzero(happens):
        begin = day * STEPS_PER_DAY + int(starts[day] * 4)
        out[begin:min(begin + int(durations[day]), total)] = power_kw
    return out


def _household(rng: np.random.Generator, days: int) -> tuple[np.ndarray, np.ndarray]:
    """(appliance channels [T, 8], solar [T]) for one home."""
    steps = np.arange(days * STEPS_PER_DAY)
    hour = (steps % STEPS_PER_DAY) / 4.0
    day = steps // STEPS_PER_DAY
    weekend = (day % 7) >= 5

    weekly = 1.0 + 0.15 * np.sin(2.0 * np.pi * day / 7.0)
    air = 1.6 * np.clip(np.sin(np.pi * (hour - 10.0) / 12.0), 0.0, None) ** 2 * weekly
    furnace = 0.35 * (_bump(hour, 4.0, 2.5) + _bump(hour, 23.5, 1.5))
    fridge = 0.12 + 0.05 * (np.sin(2.0 * np.pi * steps / 6.0) > 0)
    lights = 0.15 + 0.45 * _bump(hour, 20.0, 2.0) + 0.25 * _bump(hour, 7.5, 1.2)
    lights = lights * np.where(weekend, 1.2, 1.0)

    oven = _events(rng, days, 0.6, (17.0, 19.0), (4, 6), 1.5)
    dishwasher = _events(rng, days, 0.4, (20.5, 21.5), (5, 7), 1.0)
    dryer = _events(rng, days, 0.3, (10.0, 19.0), (3, 5), 1.8)
    car = _events(rng, days, 0.35, (19.0, 21.0), (8, 12), 2.4)

    channels = np.stack(
        [air, furnace, fridge, lights, oven, dishwasher, dryer, car], axis=1
    )
    channels = channels + rng.normal(0.0, NOISE_STD, channels.shape)

    cloud = rng.uniform(0.7, 1.0, size=days)[day]
    solar = 2.5 * np.clip(np.sin(np.pi * (hour - 6.0) / 12.0), 0.0, None) * cloud
    solar = solar + rng.normal(0.0, NOISE_STD, solar.shape)
    return np.clip(channels, 0.0, None), np.clip(solar, 0.0, None)


def synth(
    profile_seed: int,
    days: int,
    households: int = 1,
    start: str = "2018-01-01T00:00:00",
    baseline: float = 0.25,
) -> MeterSeries:
    """Aggregate ``households`` seeded homes over ``days`` days."""
    if days < 1:
        raise DataError(f"days must be >= 1, got {days}")
    if households < 1:
        raise DataError(f"households must be >= 1, got {households}")
    if baseline < 0:
        raise DataError("baseline must be non-negative")

    total = days * STEPS_PER_DAY
    channels = np.zeros((total, len(APPLIANCES)))
    solar = np.zeros(total)
    for home in range(households):
        rng = np.random.default_rng([profile_seed, home])
        home_channels, home_solar = _household(rng, days)
        channels += home_channels
        solar += home_solar

    base = baseline * households
    load = channels.sum(axis=1)
    # Keeps grid >= 0: generation never exceeds what the home draws.
    solar = np.minimum(solar, load + 0.5 * base)
    grid = load - solar + base

    timestamps = np.datetime64(start, "ns") + np.arange(total) * STEP
    logger.debug("Synthesised %d days for %d households (seed %d)", days, households, profile_seed)
    return MeterSeries(
        timestamps=timestamps,
        channel_names=[*APPLIANCES, SOLAR],
        channels=np.column_stack([channels, solar]),
        grid=grid,
        meta={"seed": profile_seed, "households": households, "baseline": base},
    )
