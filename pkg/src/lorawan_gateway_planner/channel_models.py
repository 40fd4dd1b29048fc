"""Site-independent path-loss models and per-link received power.

All losses are in dB and positive for attenuation. Received power follows
``alpha = tx_power - path_loss + shadowing``; with 0 dBm transmit power alpha
equals the path gain.
"""

import logging
import math
import warnings
from typing import Tuple

import numpy as np

from lorawan_gateway_planner.config import ChannelConfig
from lorawan_gateway_planner.errors import DomainError, ModelValidityWarning
from lorawan_gateway_planner.models import Position
from lorawan_gateway_planner.scenario import distance_2d, distance_3d

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT_M_S = 299_792_458.0

_STREAM_SHADOWING = 0
_STREAM_LOS = 1
_MASK_64 = (1 << 64) - 1


def _warn(message: str) -> None:
    warnings.warn(message, ModelValidityWarning, stacklevel=3)


def free_space_pl(d_m: float, fc_hz: float) -> float:
    """Free-space (Friis) path loss ``20 log10(4 pi d fc / c)``.

    Raises:
        DomainError: If ``d_m <= 0``.
    """
    if not d_m > 0:
        raise DomainError(f"free-space distance must be > 0, got {d_m}")
    return 20.0 * math.log10(4.0 * math.pi * d_m * fc_hz / SPEED_OF_LIGHT_M_S)


def reference_loss_db(cfg: ChannelConfig) -> float:
    """Log-distance loss at ``d0``: configured value or free space at ``d0``."""
    if cfg.ref_loss_db is not None:
        return cfg.ref_loss_db
    return free_space_pl(cfg.d0_m, cfg.fc_hz)


def log_distance_pl(d_m: float, cfg: ChannelConfig) -> float:
    """Log-distance path loss, constant at the reference loss below ``d0``.

    Raises:
        DomainError: If ``d_m <= 0``.
    """
    if not d_m > 0:
        raise DomainError(f"log-distance distance must be > 0, got {d_m}")
    ref = reference_loss_db(cfg)
    if d_m <= cfg.d0_m:
        return ref
    return ref + 10.0 * cfg.exponent * math.log10(d_m / cfg.d0_m)


def hata_mobile_correction(hm_m: float, f_mhz: float, environment: str) -> float:
    """Mobile antenna height correction a(hm) in dB."""
    if environment == "urban_large":
        if f_mhz >= 300.0:
            return 3.2 * math.log10(11.75 * hm_m) ** 2 - 4.97
        return 8.29 * math.log10(1.54 * hm_m) ** 2 - 1.1
    return (1.1 * math.log10(f_mhz) - 0.7) * hm_m - (1.56 * math.log10(f_mhz) - 0.8)


def _hata_common(d2d_m: float, fc_hz: float, hb_m: float, hm_m: float, name: str) -> Tuple[float, float, float]:
    if not d2d_m > 0:
        raise DomainError(f"{name} distance must be > 0, got {d2d_m}")
    d_km = d2d_m / 1000.0
    if not 1.0 <= d_km <= 20.0:
        _warn(f"{name} evaluated outside its 1-20 km distance range")
    if not 30.0 <= hb_m <= 200.0:
        _warn(f"{name} evaluated outside its 30-200 m base height range")
    if not 1.0 <= hm_m <= 10.0:
        _warn(f"{name} evaluated outside its 1-10 m mobile height range")
    f_mhz = fc_hz / 1e6
    distance_term = (44.9 - 6.55 * math.log10(hb_m)) * math.log10(d_km)
    return f_mhz, distance_term, -13.82 * math.log10(hb_m)


def okumura_hata_pl(
    d2d_m: float,
    fc_hz: float,
    hb_m: float,
    hm_m: float,
    environment: str = "urban_small_medium",
) -> float:
    """Okumura-Hata path loss for urban or suburban areas.

    Args:
        d2d_m: Horizontal distance.
        fc_hz: Carrier frequency; valid 150-1500 MHz.
        hb_m: Base (gateway) antenna height.
        hm_m: Mobile (ED) antenna height.
        environment: ``urban_small_medium``, ``urban_large`` or ``suburban``.

    Returns:
        Path loss in dB.

    Raises:
        DomainError: If ``d2d_m <= 0``.
    """
    f_mhz, distance_term, height_term = _hata_common(d2d_m, fc_hz, hb_m, hm_m, "Okumura-Hata")
    if not 150.0 <= f_mhz <= 1500.0:
        _warn("Okumura-Hata evaluated outside its 150-1500 MHz frequency range")
    a_hm = hata_mobile_correction(hm_m, f_mhz, environment)
    pl = 69.55 + 26.16 * math.log10(f_mhz) + height_term - a_hm + distance_term
    if environment == "suburban":
        pl -= 2.0 * math.log10(f_mhz / 28.0) ** 2 + 5.4
    return pl


def cost231_pl(
    d2d_m: float,
    fc_hz: float,
    hb_m: float,
    hm_m: float,
    environment: str = "urban_small_medium",
    c_db: float = 0.0,
) -> float:
    """COST-231 Hata extension; ``c_db`` is the city correction C.

    Raises:
        DomainError: If ``d2d_m <= 0``.
    """
    f_mhz, distance_term, height_term = _hata_common(d2d_m, fc_hz, hb_m, hm_m, "COST-231")
    if not 1500.0 <= f_mhz <= 2000.0:
        _warn("COST-231 evaluated outside its 1500-2000 MHz frequency range")
    a_hm = hata_mobile_correction(hm_m, f_mhz, environment)
    return 46.3 + 33.9 * math.log10(f_mhz) + height_term - a_hm + distance_term + c_db


def uma_los_probability(d2d_m: float, h_ut_m: float) -> float:
    """Urban-macro LOS probability for an outdoor terminal."""
    if d2d_m <= 18.0:
        return 1.0
    c_hut = 0.0 if h_ut_m <= 13.0 else ((h_ut_m - 13.0) / 10.0) ** 1.5
    base = 18.0 / d2d_m + math.exp(-d2d_m / 63.0) * (1.0 - 18.0 / d2d_m)
    return base * (1.0 + c_hut * 1.25 * (d2d_m / 100.0) ** 3 * math.exp(-d2d_m / 150.0))


def _link_generator(seed: int, d: int, p: int, stream: int) -> np.random.Generator:
    # Counter-based: the (seed, stream, d, p) key alone fixes the draw
    key = ((seed & _MASK_64) << 64) | (stream << 56) | (d << 28) | p
    return np.random.Generator(np.random.Philox(key=key))


def _uma_los_pl(d2d_m: float, d3d_m: float, fc_ghz: float, h_bs_m: float, h_ut_m: float) -> float:
    d_bp = 4.0 * (h_bs_m - 1.0) * (h_ut_m - 1.0) * fc_ghz * 1e9 / SPEED_OF_LIGHT_M_S
    if d2d_m <= d_bp:
        return 28.0 + 22.0 * math.log10(d3d_m) + 20.0 * math.log10(fc_ghz)
    return (
        28.0
        + 40.0 * math.log10(d3d_m)
        + 20.0 * math.log10(fc_ghz)
        - 9.0 * math.log10(d_bp**2 + (h_bs_m - h_ut_m) ** 2)
    )


def uma_3gpp_pl(
    d2d_m: float,
    fc_hz: float,
    h_bs_m: float,
    h_ut_m: float,
    los_mode: str = "always_nlos",
    seed: int = 0,
    link: Tuple[int, int] = (0, 0),
) -> float:
    """Urban-macro path loss with fixed or probabilistic LOS state.

    Args:
        d2d_m: Horizontal distance.
        fc_hz: Carrier frequency.
        h_bs_m: Gateway height.
        h_ut_m: ED height; below 1.5 m is accepted with a warning.
        los_mode: ``always_los``, ``always_nlos`` or ``probabilistic``.
        seed: Seed of the LOS draw in probabilistic mode.
        link: ``(d, p)`` identifying the link; one LOS draw per link.

    Returns:
        Path loss in dB.

    Raises:
        DomainError: If ``d2d_m < 0`` or the two antennas coincide.
    """
    if d2d_m < 0:
        raise DomainError(f"UMa distance must be >= 0, got {d2d_m}")
    d3d_m = math.hypot(d2d_m, h_bs_m - h_ut_m)
    if d3d_m <= 0:
        raise DomainError("UMa antennas coincide (3D distance 0)")
    if not 1.5 <= h_ut_m <= 22.5:
        _warn("3GPP UMa evaluated outside its 1.5-22.5 m terminal height range")
    if not 10.0 <= d2d_m <= 5000.0:
        _warn("3GPP UMa evaluated outside its 10 m - 5 km distance range")

    fc_ghz = fc_hz / 1e9
    pl_los = _uma_los_pl(d2d_m, d3d_m, fc_ghz, h_bs_m, h_ut_m)

    if los_mode == "always_los":
        return pl_los
    if los_mode == "probabilistic":
        draw = _link_generator(seed, link[0], link[1], _STREAM_LOS).random()
        if draw < uma_los_probability(d2d_m, h_ut_m):
            return pl_los
    elif los_mode != "always_nlos":
        raise ValueError(f"unknown los_mode '{los_mode}'")

    pl_nlos = 13.54 + 39.08 * math.log10(d3d_m) + 20.0 * math.log10(fc_ghz) - 0.6 * (h_ut_m - 1.5)
    return max(pl_los, pl_nlos)


def shadowing_draw(seed: int, d: int, p: int, sigma_db: float) -> float:
    """Log-normal shadowing sample for link (d, p); 0 when ``sigma_db`` is 0."""
    if sigma_db == 0:
        return 0.0
    return float(sigma_db * _link_generator(seed, d, p, _STREAM_SHADOWING).standard_normal())


def received_power(tx_power_dbm: float, pl_db: float, shadowing_draw_db: float = 0.0) -> float:
    """Received power in dBm."""
    return tx_power_dbm - pl_db + shadowing_draw_db


def link_path_loss(cfg: ChannelConfig, gw: Position, ed: Position, d: int = 0, p: int = 0) -> float:
    """Deterministic path loss of one gateway-ED link under ``cfg``.

    Log-distance uses the 3D distance, Hata and COST-231 the 2D distance,
    UMa both. Distances are clamped to ``cfg.min_distance_m`` and the loss
    never drops below 0 dB, so coincident points never crash.
    """
    floor = cfg.min_distance_m
    if cfg.model == "log_distance":
        pl = log_distance_pl(max(distance_3d(gw, ed), floor), cfg)
    elif cfg.model == "okumura_hata":
        pl = okumura_hata_pl(max(distance_2d(gw, ed), floor), cfg.fc_hz, gw.z_m, ed.z_m, cfg.environment)
    elif cfg.model == "cost231":
        pl = cost231_pl(
            max(distance_2d(gw, ed), floor),
            cfg.fc_hz,
            gw.z_m,
            ed.z_m,
            cfg.environment,
            cfg.city_correction_db,
        )
    else:
        pl = uma_3gpp_pl(
            max(distance_2d(gw, ed), floor),
            cfg.fc_hz,
            gw.z_m,
            ed.z_m,
            cfg.los_mode,
            cfg.los_seed,
            (d, p),
        )
    return max(pl, 0.0)


def link_received_power(
    cfg: ChannelConfig,
    gw: Position,
    ed: Position,
    d: int,
    p: int,
    tx_power_dbm: float = 0.0,
) -> float:
    """Received power of link (d, p) including its shadowing draw."""
    pl = link_path_loss(cfg, gw, ed, d, p)
    return received_power(tx_power_dbm, pl, shadowing_draw(cfg.shadowing_seed, d, p, cfg.shadowing_sigma_db))
