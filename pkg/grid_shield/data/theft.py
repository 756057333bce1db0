"""Under-reporting theft injection (a consumer meter scaling its own reading)."""

from __future__ import annotations

import logging

from grid_shield.data.series import MeterSeries, TheftEpisode
from grid_shield.errors import DataError

logger = logging.getLogger(__name__)


def inject_theft(series: MeterSeries, alpha: float, start: int, duration: int) -> MeterSeries:
    """Return a copy whose grid total is scaled by (1 - alpha) over the episode.

    Appliance channels stay untouched. Re-injecting an episode that overlaps
    a recorded one is rejected.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DataError(f"alpha must be in [0, 1], got {alpha}")
    if duration < 1 or start < 0 or start + duration > len(series):
        raise DataError(
            f"episode [{start}, {start + duration}) outside series of length {len(series)}"
        )

    episode = TheftEpisode(alpha=float(alpha), start=int(start), duration=int(duration))
    for recorded in series.episodes:
        if recorded.overlaps(episode):
            raise DataError(f"episode {episode} overlaps recorded episode {recorded}")

    out = series.copy()
    if alpha == 0.0:
        return out

    assert out.labels is not None
    window = slice(episode.start, episode.stop)
    out.grid[window] = (1.0 - alpha) * series.grid[window]
    out.labels[window] = True
    out.episodes.append(episode)
    logger.debug("Injected theft alpha=%.2f over [%d, %d)", alpha, start, episode.stop)
    return out
