from fractions import Fraction

import numpy as np
import pytest

from src.analysis.protection import (
    PowerWindow,
    attack_range_report,
    energy_cost,
    false_positive_rate,
    force_attack_range,
    jam_duty_cycle,
    no_guardian_range,
    stealth_attack_range,
    stealth_power_window,
    tolerated_bit_error_rate,
)
from src.analysis.timing import max_react_time
from src.utils.errors import AnalysisError, RfDomainError
from src.utils.schemas import RfParams


def test_no_guardian_range(rf):
    assert no_guardian_range(20.0, -94.0, rf) == pytest.approx(384.51, rel=0.005)
    assert no_guardian_range(0.0, -94.0, rf) == pytest.approx(95.24, abs=0.01)


def test_stealth_attack_range():
    assert stealth_attack_range(-94.0, -116.0, 10.0, 3.3) == pytest.approx(2.75, abs=0.01)
    assert stealth_attack_range(-94.0, -104.0, 10.0, 3.3) == pytest.approx(9.91, abs=0.01)


def test_stealth_range_unbounded_without_better_guardian():
    with pytest.raises(AnalysisError):
        stealth_attack_range(-94.0, -94.0, 10.0, 3.3)
    with pytest.raises(AnalysisError):
        stealth_attack_range(-94.0, -90.0, 10.0, 3.3)


def test_force_attack_range():
    assert force_attack_range(0.0, 20.0, 3.0, 10.0, 2.0) == pytest.approx(0.707, abs=0.01)
    # same inputs with the usual indoor exponent
    assert force_attack_range(0.0, 20.0, 3.0, 10.0, 3.3) == pytest.approx(2.01, abs=0.01)


def test_ranges_reject_bad_geometry():
    with pytest.raises(RfDomainError):
        force_attack_range(0.0, 20.0, 3.0, 0.0, 3.3)
    with pytest.raises(RfDomainError):
        stealth_attack_range(-94.0, -116.0, 10.0, 0.0)


def test_stealth_power_window(rf):
    window = stealth_power_window(5.0, 15.0, -94.0, -104.0, rf)
    assert isinstance(window, PowerWindow)
    assert window.low_dbm < window.midpoint_dbm < window.high_dbm
    assert window.midpoint_dbm in window
    assert window.high_dbm not in window
    # guardian closer to the attacker than the victim: nothing is stealthy
    assert stealth_power_window(15.0, 5.0, -94.0, -104.0, rf) is None


def test_energy_cost():
    assert energy_cost(0.0, 10.0, 0.0, 10.0, 32, 16.0, 3.3) == pytest.approx(64.0)
    assert energy_cost(0.0, 10.0, 0.0, 10.0, 32, 26.0, 3.3) == pytest.approx(39.38, abs=0.05)
    with pytest.raises(AnalysisError):
        energy_cost(0.0, 10.0, 0.0, 10.0, 32, 0.0, 3.3)


def test_false_positive_rate():
    rate = false_positive_rate(32, 2)
    assert rate == Fraction(529, 2 ** 32)
    assert float(rate) < 2e-7
    assert false_positive_rate(8, 0) == Fraction(1, 256)
    with pytest.raises(AnalysisError):
        false_positive_rate(8, 9)


def test_tolerated_bit_error_rate():
    assert tolerated_bit_error_rate(32, 2) == 0.0625


def test_jam_duty_cycle():
    assert jam_duty_cycle(100.0, 26.0) == pytest.approx(0.0026)


def test_attack_range_report_dispatch():
    stealth = attack_range_report("stealth", sv_dbm=-94.0, sg_dbm=-116.0, d_gv=10.0, alpha=3.3)
    assert stealth.range_m == pytest.approx(2.75, abs=0.01)
    assert stealth.binding == "stealth"

    no_guardian = attack_range_report("no_guardian", pa_dbm=20.0, sv_dbm=-94.0)
    assert no_guardian.range_m == pytest.approx(no_guardian_range(20.0, -94.0, RfParams()))

    force = attack_range_report("force", pa_dbm=0.0, pg_dbm=20.0, gamma_eff_db=3.0, d_gv=10.0, alpha=2.0)
    assert force.range_m == pytest.approx(0.707, abs=0.01)

    with pytest.raises(AnalysisError):
        attack_range_report("sideways")


def test_stealth_window_exists_exactly_inside_the_feasibility_condition(rf):
    rng = np.random.default_rng(21)
    for _ in range(1000):
        d_av, d_ag = rng.uniform(0.5, 60.0, size=2)
        sv = -94.0
        sg = float(rng.uniform(-116.0, -90.0))
        window = stealth_power_window(float(d_av), float(d_ag), sv, sg, rf)
        # d_av^alpha * S_v < d_ag^alpha * S_g in linear units
        feasible = rf.alpha * np.log10(d_av) * 10.0 + sv < rf.alpha * np.log10(d_ag) * 10.0 + sg
        assert (window is not None) == bool(feasible)


def test_false_positive_rate_matches_enumeration():
    for bits in (4, 8, 12, 16):
        literal = 0x5A5A & ((1 << bits) - 1)
        distances = [bin(value ^ literal).count("1") for value in range(1 << bits)]
        previous = Fraction(0)
        for errors in range(min(bits, 4)):
            rate = false_positive_rate(bits, errors)
            assert rate == Fraction(sum(1 for d in distances if d <= errors), 1 << bits)
            assert rate >= previous
            previous = rate


def test_max_react_time_steps_by_one_byte():
    for offset in range(1, 32):
        assert max_react_time(offset, 32) - max_react_time(offset + 1, 32) == 32.0
