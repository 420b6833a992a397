
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from noran.channel import ChannelRealization, select_precoder
from noran.errors import ConstraintViolationError, NoNullSpaceError
from noran.rng import RngStream
from noran.secrecy import (
    PowerAllocation,
    an_feasible,
    capacity_bob,
    capacity_eve,
    null_space_an,
    secrecy_capacity,
    secrecy_from_gains,
)

from conftest import rayleigh

# 40-digit mpmath evaluations of the hand examples
BOB_NO_CANCEL = 0.8479969065549500150
BOB_CANCEL = 2.3219280948873623479
EVE = 0.5849625007211561815
RAW_NO_CANCEL = 0.2630344058337938336
RAW_CANCEL = 1.7369655941662061664

UNIT = PowerAllocation(1.0, 1.0, 2.0)


def test_capacity_bob_examples():
    assert capacity_bob(4, UNIT, 1.0, False) == pytest.approx(BOB_NO_CANCEL, abs=1e-12)
    assert capacity_bob(4, UNIT, 1.0, True) == pytest.approx(BOB_CANCEL, abs=1e-12)
    silent = PowerAllocation(0.0, 1.0, 2.0)
    assert capacity_bob(4, silent, 1.0, False) == 0.0
    assert capacity_bob(4, silent, 1.0, True) == 0.0


def test_capacity_eve_examples():
    assert capacity_eve(1, UNIT, 1.0) == pytest.approx(EVE, abs=1e-12)
    assert capacity_eve(1, PowerAllocation(0.0, 1.0, 2.0), 1.0) == 0.0
    assert capacity_eve(1, PowerAllocation(1.0, 1e12, 2e12), 1.0) < 1e-10


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_noise_must_be_positive(bad):
    with pytest.raises(ValueError):
        capacity_bob(1, UNIT, bad, True)
    with pytest.raises(ValueError):
        capacity_eve(1, UNIT, bad)


def test_secrecy_from_gains_examples():
    rep = secrecy_from_gains(4, 1, UNIT, 1.0, 1.0, False)
    assert rep.c_secrecy_raw == pytest.approx(RAW_NO_CANCEL, abs=1e-12)
    rep = secrecy_from_gains(4, 1, UNIT, 1.0, 1.0, True)
    assert rep.c_secrecy_raw == pytest.approx(RAW_CANCEL, abs=1e-12)
    assert rep.c_secrecy == rep.c_secrecy_raw


def test_secrecy_capacity_uses_channel_gains():
    h = np.array([[2.0, 0.0]])
    g = np.array([[1.0, 0.0]])
    ch = ChannelRealization(h, g, 1.0, 1.0)
    p = select_precoder(h)
    rep = secrecy_capacity(ch, p, UNIT, cancellation=False)
    assert rep.c_secrecy_raw == pytest.approx(RAW_NO_CANCEL, abs=1e-12)


def test_symmetric_channels_have_zero_secrecy():
    h = rayleigh(2, 2, 9)
    ch = ChannelRealization(h, h.copy(), 0.5, 0.5)
    p = select_precoder(h)
    rep = secrecy_capacity(ch, p, PowerAllocation(1.0, 0.0, 1.0), False)
    assert rep.c_secrecy_raw == 0.0


def test_negative_raw_is_clamped():
    rep = secrecy_from_gains(1, 4, UNIT, 1.0, 1.0, False)
    assert rep.c_secrecy_raw < 0
    assert rep.c_secrecy == 0.0


def test_allocation_constraints():
    assert PowerAllocation(1.0, 1.0, 2.0).violated_constraint() is None
    cases = {
        PowerAllocation(1.5, 1.0, 2.0): "budget",
        PowerAllocation(1.0, -0.1, 2.0): "noise_nonneg",
        PowerAllocation(-0.1, 1.0, 2.0): "signal_nonneg",
    }
    for alloc, name in cases.items():
        with pytest.raises(ConstraintViolationError) as info:
            alloc.validate()
        assert info.value.constraint == name


gains = st.floats(1e-3, 1e3)
powers = st.floats(1e-3, 1e3)
noise = st.floats(1e-3, 1e3)


@settings(max_examples=300, deadline=None)
@given(gh=gains, gg=gains, u=powers, k=powers, sn=noise, se=noise)
def test_cancellation_dominates(gh, gg, u, k, sn, se):
    alloc = PowerAllocation(u, k, u + k)
    with_cb = secrecy_from_gains(gh, gg, alloc, sn, se, True)
    without = secrecy_from_gains(gh, gg, alloc, sn, se, False)
    assume(with_cb.c_bob - without.c_bob > 1e-15 * with_cb.c_bob)
    assert with_cb.c_secrecy_raw > without.c_secrecy_raw
    assert with_cb.c_eve == without.c_eve


def test_no_uplift_without_noran():
    alloc = PowerAllocation(1.0, 0.0, 1.0)
    a = secrecy_from_gains(3.0, 1.0, alloc, 1.0, 1.0, True)
    b = secrecy_from_gains(3.0, 1.0, alloc, 1.0, 1.0, False)
    assert a.c_secrecy_raw == b.c_secrecy_raw


@settings(max_examples=200, deadline=None)
@given(g=gains, u=powers, k=powers, dk=st.floats(1e-2, 1e2), se=noise)
def test_eve_capacity_decreases_with_noran(g, u, k, dk, se):
    lo = capacity_eve(g, PowerAllocation(u, k, u + k + dk), se)
    hi = capacity_eve(g, PowerAllocation(u, k + dk, u + k + dk), se)
    assume(lo > 1e-9)
    assert hi < lo


@settings(max_examples=200, deadline=None)
@given(h=gains, u=powers, du=st.floats(1e-2, 1e2), sn=noise)
def test_bob_cancel_capacity_increases_with_signal(h, u, du, sn):
    a = capacity_bob(h, PowerAllocation(u, 0.0, u + du), sn, True)
    b = capacity_bob(h, PowerAllocation(u + du, 0.0, u + du), sn, True)
    assert b > a


@pytest.mark.parametrize(
    "n_tx,n_rx,expected",
    [(2, 1, True), (2, 2, False), (1, 1, False), (8, 4, True), (1, 4, False)],
)
def test_an_feasible(n_tx, n_rx, expected):
    assert an_feasible(n_tx, n_rx) is expected


def test_null_space_of_row(rng):
    w = null_space_an(np.array([[1, 1]]), rng)
    ref = np.array([1, -1]) / np.sqrt(2)
    assert abs(abs(np.vdot(ref, w)) - 1) < 1e-12
    assert np.linalg.norm(np.array([[1, 1]]) @ w) <= 1e-12


def test_null_space_identity_is_empty(rng):
    with pytest.raises(NoNullSpaceError):
        null_space_an(np.eye(2), rng)


def test_null_space_rank_deficient_square(rng):
    h = np.array([[1, 2], [2, 4]], dtype=complex)
    w = null_space_an(h, rng)
    assert np.linalg.norm(h @ w) <= 1e-10


def test_null_space_random_wide_channels():
    rng = RngStream(77)
    for seed in range(100):
        h = rayleigh(2, 4, seed)
        w = null_space_an(h, rng)
        assert np.linalg.norm(h @ w) <= 1e-10
        assert abs(np.linalg.norm(w) - 1) <= 1e-12
        assert np.all(np.abs(h @ w) <= 1e-10)  # every row individually
