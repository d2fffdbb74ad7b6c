import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_lab.crc import (
    CrcParams, crc_attach, crc_attach_batch, crc_check, crc_compute, crc_long_division,
    crc_long_division_batch, crc_params_for,
)
from polar_lab.table1 import TABLE1

POLYS = sorted({(r.crc_size, r.crc_poly) for r in TABLE1})


def int_remainder(bits, width, poly):
    """Remainder of ``m(x) * x^width`` modulo ``x^width + poly`` over Python ints."""
    m = 0
    for b in bits:
        m = (m << 1) | int(b)
    m <<= width
    g = (1 << width) | poly
    while m.bit_length() > width:
        m ^= g << (m.bit_length() - width - 1)
    return [(m >> (width - 1 - i)) & 1 for i in range(width)]


bit_lists = st.lists(st.integers(0, 1), min_size=1, max_size=300)


def test_table_polynomials():
    assert POLYS == [(7, 0x65), (8, 0x9B), (10, 0x3D9), (11, 0x385), (12, 0xF13),
                     (16, 0x8005)]


@pytest.mark.parametrize("width, poly", POLYS)
def test_zero_message_has_zero_crc(width, poly):
    assert not crc_compute(np.zeros(64, np.uint8), CrcParams(width, poly)).any()


@pytest.mark.parametrize("width, poly", POLYS)
def test_single_one_gives_polynomial(width, poly):
    # x^width mod g(x) is the polynomial itself
    params = CrcParams(width, poly)
    want = [(poly >> (width - 1 - i)) & 1 for i in range(width)]
    assert crc_compute([1], params).tolist() == want


@given(bit_lists, st.sampled_from(POLYS))
@settings(max_examples=200, deadline=None)
def test_bytewise_matches_both_oracles(bits, wp):
    params = CrcParams(*wp)
    got = crc_compute(bits, params).tolist()
    assert got == crc_long_division(bits, params).tolist()
    assert got == int_remainder(bits, *wp)


@pytest.mark.parametrize("width, poly", POLYS)
def test_batch_matches_long_division(width, poly, rng):
    params = CrcParams(width, poly)
    for k in (1, 7, 64, 77, 128):
        msgs = rng.integers(0, 2, (2_000, k), dtype=np.uint8)
        framed = crc_attach_batch(msgs, params)
        assert np.array_equal(framed[:, :k], msgs)
        assert np.array_equal(framed[:, k:], crc_long_division_batch(msgs, params))
    assert np.array_equal(crc_attach_batch(msgs[:5], params)[2], crc_attach(msgs[2], params))


@given(bit_lists, bit_lists, st.sampled_from(POLYS))
@settings(max_examples=100, deadline=None)
def test_linearity(a, b, wp):
    n = min(len(a), len(b))
    a, b = np.array(a[:n], np.uint8), np.array(b[:n], np.uint8)
    params = CrcParams(*wp)
    assert np.array_equal(crc_compute(a ^ b, params),
                          crc_compute(a, params) ^ crc_compute(b, params))


@given(bit_lists, st.sampled_from(POLYS))
@settings(max_examples=100, deadline=None)
def test_attach_then_check(bits, wp):
    params = CrcParams(*wp)
    assert crc_check(crc_attach(bits, params), params)


@pytest.mark.parametrize("width, poly", POLYS)
def test_every_single_bit_flip_is_caught(width, poly, rng):
    params = CrcParams(width, poly)
    frame = crc_attach(rng.integers(0, 2, 64, dtype=np.uint8), params)
    for i in range(frame.size):
        bad = frame.copy()
        bad[i] ^= 1
        assert not crc_check(bad, params)


def test_false_accept_rate_of_12_bit_crc():
    params = CrcParams(12, 0xF13)
    gen = np.random.default_rng(7)
    trials = 400_000
    msgs = gen.integers(0, 2, (trials, 128), dtype=np.uint8)
    tails = gen.integers(0, 2, (trials, 12), dtype=np.uint8)
    accepted = np.all(crc_attach_batch(msgs, params)[:, 128:] == tails, axis=1).sum()
    p = 2.0 ** -12
    assert abs(accepted - trials * p) < 5 * np.sqrt(trials * p)


def test_parameter_validation():
    with pytest.raises(ValueError):
        CrcParams(3, 0x3)
    with pytest.raises(ValueError):
        CrcParams(8, 0x1FF)
    with pytest.raises(ValueError):
        crc_compute([], CrcParams(8, 0x9B))
    with pytest.raises(ValueError):
        crc_check(np.zeros(8, np.uint8), CrcParams(8, 0x9B))


def test_no_crc_spec():
    spec = TABLE1[0].spec(crc_size=0, crc_poly=0)
    assert crc_params_for(spec) is None
    msgs = np.ones((2, 5), np.uint8)
    assert np.array_equal(crc_attach_batch(msgs, None), msgs)
