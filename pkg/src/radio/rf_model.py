"""
Radio-layer arithmetic: dB conversions, log-distance path loss, sensitivity
budgets and the two protection conditions (detection, destruction).

Everything is computed in dB; powers are converted to mW only where they are
summed.
"""

import logging
import math
import zlib
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from ..utils.errors import RfDomainError
from ..utils.schemas import RfParams, SensitivityBudget

logger = logging.getLogger(__name__)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        raise RfDomainError(f"power must be positive to express in dBm, got {mw} mW")
    return 10.0 * math.log10(mw)


def sum_dbm(powers_dbm: Iterable[float]) -> Optional[float]:
    """Linear sum of several powers, back in dBm. None for an empty set."""
    total = sum(dbm_to_mw(p) for p in powers_dbm)
    return mw_to_dbm(total) if total > 0 else None


def path_loss_db(d: float, params: RfParams, rng: Optional[np.random.Generator] = None) -> float:
    """Log-distance path loss; with shadowing enabled and an rng supplied, adds one normal draw in dB."""
    if not d > 0:
        raise RfDomainError(f"distance must be positive, got {d} m")
    loss = params.pl_d0_db + 10.0 * params.alpha * math.log10(d / params.d0)
    if params.shadowing_sigma_db > 0 and rng is not None:
        loss += float(rng.normal(0.0, params.shadowing_sigma_db))
    return loss


def received_power_dbm(ptx_dbm: float, d: float, params: RfParams, shadowing_db: float = 0.0) -> float:
    return ptx_dbm - path_loss_db(d, params) - shadowing_db


def detects(ptx_dbm: float, d: float, sensitivity_dbm: float, params: RfParams, shadowing_db: float = 0.0) -> bool:
    """Detection condition: the signal arrives at or above the receiver's sensitivity (inclusive)."""
    return received_power_dbm(ptx_dbm, d, params, shadowing_db) >= sensitivity_dbm


def sir_db(signal_dbm: float, interference_dbm: float) -> float:
    return signal_dbm - interference_dbm


def destroys(pa_dbm: float, d_av: float, pg_dbm: float, d_gv: float, params: RfParams) -> bool:
    """Destruction condition: SIR at the victim strictly below gamma_SIR plus the waveform gain."""
    signal = received_power_dbm(pa_dbm, d_av, params)
    interference = received_power_dbm(pg_dbm, d_gv, params)
    return sir_db(signal, interference) < params.gamma_eff_db


def sensitivity_dbm(budget: SensitivityBudget) -> float:
    """S = N_T * N_F * SNR_min in linear terms, i.e. a sum in dB, less any bit-error-tolerance gain."""
    return budget.thermal_noise_dbm + budget.noise_figure_db + budget.snr_min_db - budget.tolerance_gain_db


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _link_key(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class ShadowingField:
    """Per-link shadowing frozen for a whole run (block fading).

    Each link gets its own generator seeded from the run seed and a CRC of the
    two node ids, so draws do not depend on which other nodes exist or on the
    order links are queried. Links are reciprocal.
    """

    def __init__(self, params: RfParams, seed: int):
        self.params = params
        self.seed = seed
        self._cache: Dict[Tuple[str, str], float] = {}

    def offset_db(self, a: str, b: str) -> float:
        if self.params.shadowing_sigma_db <= 0:
            return 0.0
        key = _link_key(a, b)
        if key not in self._cache:
            link_id = zlib.crc32(f"{key[0]}|{key[1]}".encode())
            rng = np.random.default_rng([self.seed & 0xFFFFFFFF, link_id])
            self._cache[key] = float(rng.normal(0.0, self.params.shadowing_sigma_db))
            logger.debug(f"Shadowing {key[0]}<->{key[1]}: {self._cache[key]:+.2f} dB")
        return self._cache[key]

    def received_dbm(self, ptx_dbm: float, a: str, pos_a: Tuple[float, float], b: str, pos_b: Tuple[float, float]) -> float:
        d = distance(pos_a, pos_b)
        if d == 0:
            raise RfDomainError(f"nodes {a!r} and {b!r} share a position")
        return received_power_dbm(ptx_dbm, d, self.params, self.offset_db(a, b))
