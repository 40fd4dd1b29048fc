"""Received-power matrix construction and coverage thresholding."""

import logging
import time
from typing import List, Sequence

import numpy as np

from lorawan_gateway_planner.channel_models import link_received_power
from lorawan_gateway_planner.config import ChannelConfig
from lorawan_gateway_planner.models import CoverageMatrix, GainMatrix, Scenario

logger = logging.getLogger(__name__)


def build_alpha(scenario: Scenario, cfg: ChannelConfig, tx_power_dbm: float = 0.0) -> GainMatrix:
    """Compute alpha[d][p] for every ED and candidate under a channel model.

    Each entry depends only on the link geometry, ``cfg`` and the link
    indices, so the matrix is independent of evaluation order.

    Args:
        scenario: Candidate and ED geometry.
        cfg: Channel model configuration.
        tx_power_dbm: Transmit power; 0 dBm makes alpha the path gain.

    Returns:
        D x P GainMatrix tagged with the model name.
    """
    started = time.perf_counter()
    alpha = np.empty((scenario.n_eds, scenario.n_candidates), dtype=float)
    for d, ed in enumerate(scenario.eds, start=1):
        for p, gw in enumerate(scenario.gw_candidates, start=1):
            alpha[d - 1, p - 1] = link_received_power(cfg, gw, ed, d, p, tx_power_dbm)

    logger.info(
        "Built %dx%d alpha with %s in %.3f s",
        scenario.n_eds,
        scenario.n_candidates,
        cfg.model,
        time.perf_counter() - started,
    )
    return GainMatrix(alpha_dbm=alpha, tx_power_dbm=tx_power_dbm, source=cfg.model)


def threshold(alpha: GainMatrix, rho_dbm: float) -> CoverageMatrix:
    """Binary coverage: beta[d][p] = 1 iff alpha[d][p] >= rho (inclusive)."""
    return CoverageMatrix(beta=alpha.alpha_dbm >= rho_dbm, rho_dbm=rho_dbm)


def uncovered_eds(beta: CoverageMatrix) -> List[int]:
    """1-based indices of EDs no candidate covers; empty means feasible."""
    return [int(d) + 1 for d in np.flatnonzero(~beta.beta.any(axis=1))]


def best_server_power(alpha: GainMatrix, selected: Sequence[int]) -> np.ndarray:
    """Per-ED maximum alpha over the selected (1-based) candidates.

    Raises:
        ValueError: If ``selected`` is empty or out of range.
    """
    if not selected:
        raise ValueError("best-server power needs at least one selected candidate")
    columns = [p - 1 for p in selected]
    if min(columns) < 0 or max(columns) >= alpha.n_candidates:
        raise ValueError(f"selected candidates {list(selected)} outside 1..{alpha.n_candidates}")
    return alpha.alpha_dbm[:, columns].max(axis=1)
