import math

import numpy as np
import pytest

from src.radio.rf_model import (
    ShadowingField,
    dbm_to_mw,
    destroys,
    detects,
    distance,
    mw_to_dbm,
    path_loss_db,
    received_power_dbm,
    sensitivity_dbm,
    sir_db,
    sum_dbm,
)
from src.utils.errors import RfDomainError
from src.utils.schemas import RfParams, SensitivityBudget


def test_path_loss_at_reference_distance(rf):
    assert path_loss_db(8.0, rf) == pytest.approx(58.5)
    assert path_loss_db(80.0, rf) == pytest.approx(58.5 + 33.0)


def test_path_loss_rejects_non_positive_distance(rf):
    with pytest.raises(RfDomainError):
        path_loss_db(0.0, rf)
    with pytest.raises(ValueError):
        path_loss_db(-1.0, rf)


def test_path_loss_shadowing_needs_rng():
    params = RfParams(shadowing_sigma_db=6.0)
    assert path_loss_db(8.0, params) == pytest.approx(58.5)
    a = path_loss_db(8.0, params, np.random.default_rng(5))
    b = path_loss_db(8.0, params, np.random.default_rng(5))
    assert a == b
    assert a != pytest.approx(58.5)


def test_detection_is_inclusive(rf):
    # received power exactly equals the sensitivity
    assert detects(-35.5, 8.0, -94.0, rf)
    assert not detects(-35.6, 8.0, -94.0, rf)


def test_destruction_threshold(rf):
    # equal powers and distances give SIR 0 dB, below gamma_eff = 7 dB
    assert destroys(0.0, 10.0, 0.0, 10.0, rf)
    # SIR exactly gamma_eff is not destruction
    assert not destroys(7.0, 8.0, 0.0, 8.0, rf)
    assert destroys(6.9, 8.0, 0.0, 8.0, rf)
    assert rf.gamma_eff_db == pytest.approx(7.0)


def test_db_conversions():
    assert dbm_to_mw(0.0) == 1.0
    assert dbm_to_mw(20.0) == pytest.approx(100.0)
    assert mw_to_dbm(1000.0) == pytest.approx(30.0)
    assert sum_dbm([0.0, 0.0]) == pytest.approx(10.0 * math.log10(2.0))
    assert sum_dbm([]) is None
    assert sir_db(-60.0, -70.0) == 10.0
    with pytest.raises(RfDomainError):
        mw_to_dbm(0.0)


def test_sensitivity_budget():
    budget = SensitivityBudget(thermal_noise_dbm=-110.0, noise_figure_db=10.0, snr_min_db=6.0)
    assert sensitivity_dbm(budget) == pytest.approx(-94.0)
    tolerant = SensitivityBudget(
        thermal_noise_dbm=-110.0, noise_figure_db=10.0, snr_min_db=6.0, tolerance_gain_db=22.0
    )
    assert sensitivity_dbm(tolerant) == pytest.approx(-116.0)


def test_received_power(rf):
    assert received_power_dbm(0.0, 8.0, rf) == pytest.approx(-58.5)
    assert received_power_dbm(0.0, 8.0, rf, shadowing_db=3.0) == pytest.approx(-61.5)
    assert distance((0.0, 0.0), (3.0, 4.0)) == 5.0


def test_shadowing_field_is_reciprocal_and_seeded():
    params = RfParams(shadowing_sigma_db=4.0)
    field = ShadowingField(params, seed=11)
    assert field.offset_db("a", "b") == field.offset_db("b", "a")
    assert ShadowingField(params, seed=11).offset_db("a", "b") == field.offset_db("a", "b")
    # adding other links does not disturb an existing one
    other = ShadowingField(params, seed=11)
    other.offset_db("c", "d")
    assert other.offset_db("a", "b") == field.offset_db("a", "b")


def test_shadowing_field_off_and_colocated(rf):
    field = ShadowingField(rf, seed=0)
    assert field.offset_db("a", "b") == 0.0
    assert field.received_dbm(0.0, "a", (0.0, 0.0), "b", (8.0, 0.0)) == pytest.approx(-58.5)
    with pytest.raises(RfDomainError):
        field.received_dbm(0.0, "a", (1.0, 1.0), "b", (1.0, 1.0))


def test_shadowing_draws_have_the_configured_spread():
    params = RfParams(shadowing_sigma_db=4.0)
    field = ShadowingField(params, seed=3)
    draws = np.array([field.offset_db("g", f"n{i}") for i in range(2000)])
    assert abs(draws.mean()) < 0.3
    assert draws.std() == pytest.approx(4.0, rel=0.1)


def test_path_loss_and_detection_are_monotone(rf):
    distances = np.linspace(0.5, 400.0, 500)
    losses = [path_loss_db(float(d), rf) for d in distances]
    assert all(b > a for a, b in zip(losses, losses[1:]))
    detected = [detects(0.0, float(d), -94.0, rf) for d in distances]
    assert detected == sorted(detected, reverse=True)
    powers = np.linspace(-20.0, 20.0, 81)
    detected = [detects(float(p), 100.0, -94.0, rf) for p in powers]
    assert detected == sorted(detected)


def test_db_round_trip():
    for mw in np.geomspace(1e-12, 1e3, 200):
        assert dbm_to_mw(mw_to_dbm(float(mw))) == pytest.approx(float(mw), rel=1e-12)


def test_destruction_depends_only_on_the_power_difference(rf):
    rng = np.random.default_rng(17)
    for _ in range(1000):
        pa, pg, offset = rng.uniform(-20.0, 20.0, size=3)
        d_av, d_gv = rng.uniform(0.5, 50.0, size=2)
        assert destroys(pa, d_av, pg, d_gv, rf) == destroys(pa + offset, d_av, pg + offset, d_gv, rf)
