"""
Closed-form protection analytics for the worst-case collinear geometry
(attacker, victim and guardian on one line).
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

from ..protocol.frame_codec import US_PER_BYTE
from ..radio.rf_model import dbm_to_mw, path_loss_db
from ..utils.errors import AnalysisError, RfDomainError
from ..utils.schemas import RfParams


@dataclass(frozen=True)
class AttackRangeReport:
    label: str
    range_m: float
    binding: str  # no_guardian | stealth | force
    inputs: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PowerWindow:
    """Half-open interval [low_dbm, high_dbm) of attacker transmit powers."""

    low_dbm: float
    high_dbm: float

    @property
    def midpoint_dbm(self) -> float:
        return (self.low_dbm + self.high_dbm) / 2.0

    def __contains__(self, power_dbm: float) -> bool:
        return self.low_dbm <= power_dbm < self.high_dbm


def no_guardian_range(pa_dbm: float, sv_dbm: float, params: RfParams) -> float:
    """Distance at which the attacker's signal drops to the victim's sensitivity."""
    if params.d0 <= 0 or params.alpha <= 0:
        raise RfDomainError("d0 and alpha must be positive")
    exponent = (pa_dbm - sv_dbm - params.pl_d0_db) / (10.0 * params.alpha)
    return params.d0 * 10.0 ** exponent


def stealth_attack_range(sv_dbm: float, sg_dbm: float, d_gv: float, alpha: float) -> float:
    """Largest d_av at which an attacker can still reach the victim while staying below the guardian's sensitivity."""
    if d_gv <= 0 or alpha <= 0:
        raise RfDomainError("d_gv and alpha must be positive")
    denominator = 10.0 ** ((sv_dbm - sg_dbm) / (10.0 * alpha)) - 1.0
    if denominator <= 0:
        raise AnalysisError(
            f"stealth bound unbounded: guardian sensitivity {sg_dbm} dBm is not better than the victim's {sv_dbm} dBm"
        )
    return d_gv / denominator


def stealth_power_window(
    d_av: float, d_ag: float, sv_dbm: float, sg_dbm: float, params: RfParams
) -> Optional[PowerWindow]:
    """Attacker powers that reach the victim yet stay invisible to the guardian, or None."""
    low = sv_dbm + path_loss_db(d_av, params)
    high = sg_dbm + path_loss_db(d_ag, params)
    if low < high:
        return PowerWindow(low, high)
    return None


def force_attack_range(pa_dbm: float, pg_dbm: float, gamma_eff_db: float, d_gv: float, alpha: float) -> float:
    """Largest d_av at which a detected attacker still beats the guardian's interference."""
    if d_gv <= 0 or alpha <= 0:
        raise RfDomainError("d_gv and alpha must be positive")
    return 10.0 ** ((pa_dbm - pg_dbm - gamma_eff_db) / (10.0 * alpha)) * d_gv


def energy_cost(
    pa_dbm: float,
    d_av: float,
    pg_dbm: float,
    d_gv: float,
    frame_bytes: int,
    t_interfere: float,
    alpha: float,
) -> float:
    """Energy the attacker spends delivering a frame over the energy the guardian spends destroying it."""
    if t_interfere <= 0:
        raise AnalysisError("t_interfere must be positive")
    if frame_bytes < 1:
        raise AnalysisError("frame_bytes must be at least 1")
    if d_av <= 0 or d_gv <= 0:
        raise RfDomainError("distances must be positive")
    attacker = dbm_to_mw(pa_dbm) * d_av ** -alpha * frame_bytes * US_PER_BYTE
    guardian = dbm_to_mw(pg_dbm) * d_gv ** -alpha * t_interfere
    return attacker / guardian


def false_positive_rate(field_bits: int, tolerated_errors: int) -> Fraction:
    """Probability that a uniformly random field lies within the tolerated Hamming distance of a literal."""
    if not 0 <= tolerated_errors <= field_bits <= 64:
        raise AnalysisError("need 0 <= tolerated_errors <= field_bits <= 64")
    hits = sum(math.comb(field_bits, k) for k in range(tolerated_errors + 1))
    return Fraction(hits, 2 ** field_bits)


def tolerated_bit_error_rate(field_bits: int, tolerated_errors: int) -> float:
    if field_bits <= 0:
        raise AnalysisError("field_bits must be positive")
    return tolerated_errors / field_bits


def jam_duty_cycle(rate_pps: float, t_interfere_us: float) -> float:
    """Fraction of channel time a guardian transmits when it blocks every frame of a flow."""
    return rate_pps * t_interfere_us / 1e6


def attack_range_report(mode: str, **inputs: float) -> AttackRangeReport:
    """Dispatch to the range formula for ``mode`` and wrap the result."""
    if mode == "no_guardian":
        params = RfParams(
            d0=inputs.get("d0", 8.0),
            alpha=inputs.get("alpha", 3.3),
            pl_d0_db=inputs.get("pl_d0_db", 58.5),
        )
        value = no_guardian_range(inputs["pa_dbm"], inputs["sv_dbm"], params)
    elif mode == "stealth":
        value = stealth_attack_range(inputs["sv_dbm"], inputs["sg_dbm"], inputs["d_gv"], inputs["alpha"])
    elif mode == "force":
        value = force_attack_range(
            inputs["pa_dbm"], inputs["pg_dbm"], inputs["gamma_eff_db"], inputs["d_gv"], inputs["alpha"]
        )
    else:
        raise AnalysisError(f"unknown range mode {mode!r}")
    return AttackRangeReport(label=mode, range_m=max(value, 0.0), binding=mode, inputs=dict(inputs))
