"""Plot-ready report tables: received-power CDFs and per-channel summaries."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

CDF_COLUMNS = ["value_dbm", "fraction"]
SUMMARY_COLUMNS = ["channel", "objective", "avg_ed_best_power_dbm", "avg_pdr"]


class SummaryRow(BaseModel):
    """One channel's line in the comparison table."""

    channel: str
    objective: int
    avg_ed_best_power_dbm: Optional[float] = None
    avg_pdr: Optional[float] = None


def cdf(values: Sequence[float]) -> List[Tuple[float, float]]:
    """Empirical CDF at every distinct value.

    Args:
        values: Samples; ``-inf`` is a valid sample.

    Returns:
        ``(value, fraction of samples <= value)`` pairs, ascending.

    Raises:
        ValueError: If ``values`` is empty or contains NaN.
    """
    samples = np.asarray(values, dtype=float)
    if samples.size == 0:
        raise ValueError("CDF needs at least one value")
    if np.isnan(samples).any():
        raise ValueError("CDF values must not contain NaN")
    distinct, counts = np.unique(samples, return_counts=True)
    fractions = np.cumsum(counts) / samples.size
    return [(float(v), float(f)) for v, f in zip(distinct, fractions)]


def cdf_frame(values: Sequence[float]) -> pd.DataFrame:
    """CDF as a ``value_dbm,fraction`` table."""
    return pd.DataFrame(cdf(values), columns=CDF_COLUMNS)


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    """Summary rows as a ``channel,objective,avg_ed_best_power_dbm,avg_pdr`` table."""
    return pd.DataFrame([row.model_dump() for row in rows], columns=SUMMARY_COLUMNS)
