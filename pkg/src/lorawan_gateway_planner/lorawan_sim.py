"""Seeded discrete-event simulation of LoRaWAN uplinks to placed gateways.

Every ED sends ``packets_per_ed`` periodic packets. Each selected gateway
decides per packet: below sensitivity, blocked (no free demodulation path),
collided (capture margin not met) or received. A packet is delivered when
at least one gateway received it.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import simpy

from lorawan_gateway_planner.config import SUPPORTED_BANDWIDTHS_HZ, TrafficConfig, get_sensitivity_table
from lorawan_gateway_planner.errors import InfeasiblePlanError
from lorawan_gateway_planner.models import EdPdr, GainMatrix, PdrReport, PlacementSolution, Scenario

logger = logging.getLogger(__name__)

_LOW_DATA_RATE_SYMBOL_S = 0.016


def symbol_duration(sf: int, bandwidth_hz: int) -> float:
    """LoRa symbol time ``2^SF / BW`` in seconds.

    Raises:
        ValueError: On an unsupported spreading factor or bandwidth.
    """
    if not 7 <= sf <= 12:
        raise ValueError(f"spreading factor must be 7..12, got {sf}")
    if bandwidth_hz not in SUPPORTED_BANDWIDTHS_HZ:
        raise ValueError(f"bandwidth must be one of {SUPPORTED_BANDWIDTHS_HZ} Hz, got {bandwidth_hz}")
    return 2**sf / bandwidth_hz


def preamble_duration(cfg: TrafficConfig) -> float:
    """Preamble plus sync word time, ``(n_preamble + 4.25) * Tsym``."""
    return (cfg.preamble_symbols + 4.25) * symbol_duration(cfg.sf, cfg.bandwidth_hz)


def payload_symbols(cfg: TrafficConfig) -> int:
    """Payload symbol count with explicit header and CRC on.

    Low data rate optimization switches on automatically when a symbol
    lasts longer than 16 ms.
    """
    t_sym = symbol_duration(cfg.sf, cfg.bandwidth_hz)
    de = 1 if t_sym > _LOW_DATA_RATE_SYMBOL_S else 0
    numerator = 8 * cfg.payload_bytes - 4 * cfg.sf + 28 + 16
    return 8 + max(math.ceil(numerator / (4 * (cfg.sf - 2 * de))) * cfg.cr_denominator, 0)


def time_on_air(cfg: TrafficConfig) -> float:
    """Airtime of one uplink frame in seconds.

    Args:
        cfg: Traffic configuration (SF, bandwidth, coding rate, payload, preamble).

    Returns:
        Preamble plus payload duration.

    Raises:
        ValueError: On an unsupported spreading factor or bandwidth.
    """
    t_sym = symbol_duration(cfg.sf, cfg.bandwidth_hz)
    return preamble_duration(cfg) + payload_symbols(cfg) * t_sym


def sensitivity(sf: int, bandwidth_hz: int, overrides: Optional[Dict[int, Dict[int, float]]] = None) -> float:
    """Receiver sensitivity in dBm from the default table plus overrides.

    Raises:
        ValueError: If the (sf, bandwidth) pair has no table entry.
    """
    table = get_sensitivity_table()
    for bw, entries in (overrides or {}).items():
        table.setdefault(bw, {}).update(entries)
    try:
        return table[bandwidth_hz][sf]
    except KeyError:
        raise ValueError(f"No sensitivity for SF{sf} at {bandwidth_hz} Hz; add it to sensitivity_overrides")


def schedule_transmissions(
    n_eds: int, cfg: TrafficConfig, toa: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Start times and channel indices (both D x N) for every packet.

    Packets follow a fixed period with a per-ED offset. A radio never starts
    before its previous frame ended, plus the duty-cycle off time if enabled.
    """
    period = cfg.duration_s / cfg.packets_per_ed
    offsets = rng.uniform(0.0, period, size=n_eds) if cfg.random_start else np.zeros(n_eds)
    channels = rng.integers(0, cfg.n_channels, size=(n_eds, cfg.packets_per_ed))

    off_time = toa * (1.0 / cfg.duty_cycle_limit - 1.0) if cfg.duty_cycle_limit else 0.0
    starts = np.empty((n_eds, cfg.packets_per_ed))
    for d in range(n_eds):
        earliest = -math.inf
        for k in range(cfg.packets_per_ed):
            start = max(offsets[d] + k * period, earliest)
            starts[d, k] = start
            # One frame at a time per radio, then the duty-cycle off time
            earliest = start + toa + off_time
    return starts, channels


class _GatewayBank:
    """Frames on air and receiver state at the selected gateways.

    Rows of ``power`` are EDs, columns are selected gateways. Each frame
    tracks the strongest same-channel frame it overlapped with at every
    gateway, and which gateways locked a demodulation path on it.
    """

    def __init__(self, power: np.ndarray, sens: float, cfg: TrafficConfig):
        self.power = power
        self.audible = power >= sens
        self.cfg = cfg
        self.paths_in_use = np.zeros(power.shape[1], dtype=int)
        self.on_air: Dict[int, List[Tuple[int, int]]] = {}
        self.strongest: Dict[int, np.ndarray] = {}
        self.locked: Dict[int, np.ndarray] = {}

        self.delivered = np.zeros(power.shape[0], dtype=int)
        self.collisions = 0
        self.below_sensitivity = 0
        self.demod_blocked = 0

    def start(self, tx: int, d: int, channel: int) -> None:
        """Frame ``tx`` from ED ``d`` goes on air."""
        self.strongest[tx] = np.full(self.power.shape[1], -np.inf)
        peers = self.on_air.setdefault(channel, [])
        for other, other_d in peers:
            self.strongest[tx] = np.maximum(self.strongest[tx], self.power[other_d])
            self.strongest[other] = np.maximum(self.strongest[other], self.power[d])
        peers.append((tx, d))

        lock = self.audible[d] & (self.paths_in_use < self.cfg.gw_demod_paths)
        self.locked[tx] = lock
        self.paths_in_use += lock

    def end(self, tx: int, d: int, channel: int) -> None:
        """Frame ``tx`` leaves the air; count its verdict."""
        self.on_air[channel].remove((tx, d))
        locked = self.locked.pop(tx)
        strongest = self.strongest.pop(tx)
        self.paths_in_use -= locked
        with np.errstate(invalid="ignore"):
            survived = self.power[d] - strongest >= self.cfg.capture_threshold_db

        if (locked & survived).any():
            self.delivered[d] += 1
        elif locked.any():
            self.collisions += 1
        elif self.audible[d].any():
            self.demod_blocked += 1
        else:
            self.below_sensitivity += 1


def _transmitter(
    env: simpy.Environment,
    d: int,
    starts: np.ndarray,
    channels: np.ndarray,
    toa: float,
    bank: _GatewayBank,
):
    """Uplink process of one ED: wait for each scheduled start, send, repeat."""
    n_packets = len(starts)
    for k in range(n_packets):
        yield env.timeout(max(float(starts[k]) - env.now, 0.0))
        # Frames ending at this instant leave the air before this one starts
        yield env.timeout(0)
        tx = d * n_packets + k
        bank.start(tx, d, int(channels[k]))
        yield env.timeout(toa)
        bank.end(tx, d, int(channels[k]))


def run_sim(
    scenario: Scenario,
    placement: PlacementSolution,
    alpha: GainMatrix,
    cfg: TrafficConfig,
) -> PdrReport:
    """Simulate uplink traffic from every ED to the selected gateways.

    Args:
        scenario: Geometry the placement and alpha belong to.
        placement: Feasible placement; only its selected gateways receive.
        alpha: Received power per (ED, candidate); its transmit power applies.
        cfg: Traffic and receiver parameters, including the seed.

    Returns:
        PdrReport; identical inputs give identical reports.

    Raises:
        InfeasiblePlanError: If the placement is infeasible.
        ValueError: If alpha does not match the scenario or the radio settings are unsupported.
    """
    if not placement.is_feasible:
        raise InfeasiblePlanError("cannot simulate an infeasible placement")
    if (alpha.n_eds, alpha.n_candidates) != (scenario.n_eds, scenario.n_candidates):
        raise ValueError(
            f"alpha is {alpha.n_eds}x{alpha.n_candidates} but the scenario has "
            f"{scenario.n_eds} EDs and {scenario.n_candidates} candidates"
        )
    if not placement.selected or min(placement.selected) < 1 or max(placement.selected) > scenario.n_candidates:
        raise ValueError(f"placement {placement.selected} outside 1..{scenario.n_candidates}")

    toa = time_on_air(cfg)
    sens = sensitivity(cfg.sf, cfg.bandwidth_hz, cfg.sensitivity_overrides)
    power = alpha.alpha_dbm[:, [p - 1 for p in placement.selected]]
    n_eds, n_gws, n_packets = scenario.n_eds, power.shape[1], cfg.packets_per_ed

    rng = np.random.default_rng(cfg.seed)
    starts, channels = schedule_transmissions(n_eds, cfg, toa, rng)

    env = simpy.Environment()
    bank = _GatewayBank(power, sens, cfg)
    for d in range(n_eds):
        env.process(_transmitter(env, d, starts[d], channels[d], toa, bank))
    env.run()

    per_ed = [EdPdr(ed=d + 1, sent=n_packets, delivered=int(bank.delivered[d])) for d in range(n_eds)]
    total_sent = n_eds * n_packets
    report = PdrReport(
        pdr_overall=int(bank.delivered.sum()) / total_sent,
        per_ed=per_ed,
        pdr_per_ed=[e.pdr for e in per_ed],
        collisions=bank.collisions,
        below_sensitivity_drops=bank.below_sensitivity,
        demod_blocked_drops=bank.demod_blocked,
        seed=cfg.seed,
    )
    logger.info(
        "Simulated %d packets over %d gateways (%.1f s simulated, ToA %.3f ms): PDR %.4f",
        total_sent,
        n_gws,
        env.now,
        toa * 1e3,
        report.pdr_overall,
    )
    return report


def avg_pdr(reports: Sequence[PdrReport]) -> float:
    """Mean overall PDR of several reports.

    Raises:
        ValueError: If ``reports`` is empty.
    """
    if not reports:
        raise ValueError("average PDR needs at least one report")
    return math.fsum(r.pdr_overall for r in reports) / len(reports)
