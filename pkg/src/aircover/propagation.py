"""Radio propagation: two-ray ground links, probabilistic LoS air links, SINR.

All power bookkeeping is done in watts once past the dB-domain formulas;
functions broadcast over numpy arrays where that is natural. Distances here
are in meters; callers convert from scene units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import Position3, Tbs, UserEquipment, distance


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants. Defaults follow the reference configuration."""

    f_c: float = 2e9  # carrier frequency, Hz
    p_t_w: float = 4000.0  # transmit power, W (shared by ground and air stations)
    g_t: float = 1.0
    g_r: float = 1.0
    bandwidth_hz: float = 0.18e6
    noise_dbm_hz: float = -174.0
    alpha: float = 1.0  # LoS sigmoid offset, degrees
    beta: float = 1.0  # LoS sigmoid slope, 1/degree
    mu_los_db: float = 3.0
    mu_nlos_db: float = 23.0
    eta_ohm: float = 376.73  # free-space impedance
    light_speed: float = 3e8
    n_env: float = 5.0  # environment constant from the reference tables; unused

    @property
    def wavelength(self) -> float:
        return self.light_speed / self.f_c

    def noise_power_w(self) -> float:
        dbm = self.noise_dbm_hz + 10.0 * np.log10(self.bandwidth_hz)
        return float(10.0 ** ((dbm - 30.0) / 10.0))


def linear_to_db(x):
    """Power ratio to dB."""
    return 10.0 * np.log10(x)


def db_to_linear(x):
    """dB to power ratio."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def two_ray_rx_power(
    params: ChannelParams, h_tx_m: float, h_rx_m: float, d_m
) -> np.ndarray | float:
    """Received power (dBW) of the ground-to-ground two-ray link.

    Field strength E = 4*pi*h_tx*h_rx*sqrt(30*P_t*G_t) / (lambda*d^2) combined
    with the effective aperture lambda^2*G_r/(4*pi); power falls off as d^-4.
    """
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("two-ray distance must be positive")
    lam = params.wavelength
    e_field = 4.0 * np.pi * h_tx_m * h_rx_m * np.sqrt(30.0 * params.p_t_w * params.g_t)
    e_field = e_field / (lam * d * d)
    aperture = lam * lam * params.g_r / (4.0 * np.pi)
    p_w = e_field * e_field / params.eta_ohm * aperture
    out = 10.0 * np.log10(p_w)
    return float(out) if np.isscalar(d_m) else out


def two_ray_rx_power_w(
    params: ChannelParams, h_tx_m: float, h_rx_m: float, d_m
) -> np.ndarray | float:
    """Two-ray received power in watts (skips the dB round trip)."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("two-ray distance must be positive")
    lam = params.wavelength
    e_field = 4.0 * np.pi * h_tx_m * h_rx_m * np.sqrt(30.0 * params.p_t_w * params.g_t)
    e_field = e_field / (lam * d * d)
    aperture = lam * lam * params.g_r / (4.0 * np.pi)
    p_w = e_field * e_field / params.eta_ohm * aperture
    return float(p_w) if np.isscalar(d_m) else p_w


def elevation_angle(altitude_m, distance_m) -> np.ndarray | float:
    """Elevation of an air station seen from the ground terminal, degrees.

    The link distance already includes the altitude term, so the ratio is
    clipped only to absorb float rounding at the vertical limit.
    """
    alt = np.asarray(altitude_m, dtype=float)
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("link distance must be positive")
    ratio = np.clip(alt / d, -1.0, 1.0)
    out = np.degrees(np.arcsin(ratio))
    return float(out) if np.isscalar(distance_m) and np.isscalar(altitude_m) else out

def p_los(params: ChannelParams, theta_deg) -> np.ndarray | float:
    """Line-of-sight probability, sigmoid in the elevation angle (degrees)."""
    theta = np.asarray(theta_deg, dtype=float)
    out = 1.0 / (1.0 + params.alpha * np.exp(-params.beta * (theta - params.alpha)))
    return float(out) if np.isscalar(theta_deg) else out


def p_nlos(params: ChannelParams, theta_deg) -> np.ndarray | float:
    """Complement of the LoS probability."""
    pl = p_los(params, theta_deg)
    return 1.0 - pl


def a2g_path_loss(params: ChannelParams, d_m, theta_deg) -> np.ndarray | float:
    """Air-to-ground path loss (dB): free space plus LoS-weighted excess."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("link distance must be positive")
    fspl = 20.0 * np.log10(4.0 * np.pi * params.f_c * d / params.light_speed)
    pl = p_los(params, theta_deg)
    out = fspl + pl * params.mu_los_db + (1.0 - pl) * params.mu_nlos_db
    scalar = np.isscalar(d_m) and np.isscalar(theta_deg)
    return float(out) if scalar else out


def a2g_rx_power(
    params: ChannelParams, d_m, theta_deg, p_t_w: float | None = None
) -> np.ndarray | float:
    """Air-to-ground received power in dBW."""
    p_t = params.p_t_w if p_t_w is None else p_t_w
    loss = a2g_path_loss(params, d_m, theta_deg)
    return 10.0 * np.log10(p_t) - loss


def a2g_rx_power_w(
    params: ChannelParams, d_m, theta_deg, p_t_w: float | None = None
) -> np.ndarray | float:
    """Air-to-ground received power in watts."""
    return db_to_linear(a2g_rx_power(params, d_m, theta_deg, p_t_w))


def sinr(p_e_w, p_i_w, p_noise_w) -> np.ndarray | float:
    """Signal to interference-plus-noise power ratio (all inputs in watts)."""
    return np.asarray(p_e_w, dtype=float) / (
        np.asarray(p_i_w, dtype=float) + p_noise_w
    )


def rate_bps(sinr_value, bandwidth_hz, n_receivers) -> np.ndarray | float:
    """Achievable rate with the band split evenly across the receivers."""
    return bandwidth_hz / n_receivers * np.log2(1.0 + np.asarray(sinr_value, dtype=float))


@dataclass(frozen=True)
class LinkBudget:
    """Per-user link summary. Powers are in watts."""

    ue_id: int
    served: bool
    server: tuple[str, int] | None  # ("tbs"|"uav", id)
    p_e_w: float
    p_i_w: float
    p_noise_w: float
    sinr: float
    rate_bps: float


def link_budget(
    params: ChannelParams,
    ue: UserEquipment,
    tbs_list: Sequence[Tbs],
    uav_positions: Sequence[Position3],
    serving_uav: int | None,
    *,
    scale_m_per_unit: float,
    d_thruav_units: float,
    ue_height_m: float = 1.5,
    n_receivers: int = 1,
) -> LinkBudget:
    """Resolve one user's serving power, interference, SINR and rate.

    The server is the user's ground station when cs = 1, otherwise the given
    air station if it is within range. Every other in-range transmitter
    interferes: active ground stations within their coverage radius via the
    two-ray link, air stations within d_thruav via the air-to-ground link.
    Out-of-range transmitters contribute nothing.
    """
    noise_w = params.noise_power_w()
    server: tuple[str, int] | None = None
    p_e = 0.0

    if ue.cs == 1 and ue.serving is not None:
        server = ("tbs", ue.serving)
    elif serving_uav is not None:
        d_units = distance(uav_positions[serving_uav], ue.position)
        if d_units <= d_thruav_units:
            server = ("uav", serving_uav)

    p_i = 0.0
    for t in tbs_list:
        if not t.active:
            continue
        d_units = distance(t.position, ue.position)
        if d_units > t.coverage_radius:
            continue
        d_m = d_units * scale_m_per_unit
        p_w = two_ray_rx_power_w(
            params, t.position.z * scale_m_per_unit, ue_height_m, d_m
        )
        if server == ("tbs", t.id):
            p_e = p_w
        else:
            p_i += p_w

    for idx, pos in enumerate(uav_positions):
        d_units = distance(pos, ue.position)
        if d_units > d_thruav_units:
            continue
        d_m = d_units * scale_m_per_unit
        theta = elevation_angle(pos.z * scale_m_per_unit, d_m)
        p_w = a2g_rx_power_w(params, d_m, theta)
        if server == ("uav", idx):
            p_e = p_w
        else:
            p_i += p_w

    if server is None or p_e == 0.0:
        return LinkBudget(ue.id, False, None, 0.0, p_i, noise_w, 0.0, 0.0)
    s = sinr(p_e, p_i, noise_w)
    r = rate_bps(s, params.bandwidth_hz, n_receivers)
    return LinkBudget(ue.id, True, server, float(p_e), float(p_i), noise_w, float(s), float(r))
