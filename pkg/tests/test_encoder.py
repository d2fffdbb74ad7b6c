import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_lab.code_model import FrozenSet, frozen_set_for
from polar_lab.crc import crc_attach_batch
from polar_lab.encoder import (
    EncoderPlan, MatrixEncoder, NaiveEncoder, PackedBits, SystematicEncoder, assemble_source,
    encode_ticks, generator_matrix, pack_bits, polar_transform_bytes, polar_transform_packed,
    systematic_encode, systematic_encode_batch, unpack_lut,
)
from polar_lab.table1 import TABLE1

from conftest import SPEC_NAMES, resources

N8_FROZEN = FrozenSet([True, True, True, False, True, False, False, False])
LENGTHS = [2**m for m in range(1, 11)]


def random_frozen(n, gen, info=None):
    info = gen.integers(0, n + 1) if info is None else info
    frozen = np.ones(n, dtype=bool)
    frozen[gen.choice(n, size=info, replace=False)] = False
    return FrozenSet(frozen)


# -- packing ----------------------------------------------------------------------

def test_unpack_examples():
    assert unpack_lut(PackedBits(np.array([0xA5], np.uint64), 8)).tolist() == \
        [1, 0, 1, 0, 0, 1, 0, 1]
    assert unpack_lut(PackedBits(np.array([0xFF], np.uint64), 8)).tolist() == [1] * 8
    assert unpack_lut(PackedBits(np.array([1 << 63], np.uint64), 64))[63] == 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=300))
def test_pack_unpack_round_trip(bits):
    packed = pack_bits(bits)
    assert packed.padding_is_zero()
    assert unpack_lut(packed).tolist() == bits


def test_pack_agrees_with_numpy_little_bit_order(rng):
    bits = rng.integers(0, 2, 256, dtype=np.uint8)
    want = np.packbits(bits, bitorder="little").view("<u8")
    assert np.array_equal(pack_bits(bits).words, want)


# -- source assembly ------------------------------------------------------------------

def test_assemble_examples():
    plan = EncoderPlan(N8_FROZEN)
    assert not unpack_lut(assemble_source(np.zeros(4, np.uint8), plan)).any()
    u = unpack_lut(assemble_source([1, 0, 1, 1], plan))
    assert u.tolist() == [0, 0, 0, 1, 0, 0, 1, 1]
    with pytest.raises(ValueError):
        assemble_source([1, 0, 1], plan)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_plan_segments_partition(m, seed):
    fs = random_frozen(2**m, np.random.default_rng(seed))
    plan = EncoderPlan(fs)
    segs = plan.segments()
    pos = 0
    for start, length, is_info in segs:
        assert start == pos and length > 0
        assert fs.frozen[start:start + length].all() == (not is_info)
        assert (~fs.frozen[start:start + length]).all() == is_info
        pos += length
    assert pos == fs.n
    assert sum(ln for _, ln, info in segs if info) == fs.info_count


# -- transform ----------------------------------------------------------------------

def test_transform_examples():
    assert not unpack_lut(polar_transform_packed(PackedBits.zeros(64))).any()
    u = np.zeros(8, np.uint8)
    u[7] = 1
    assert unpack_lut(polar_transform_packed(pack_bits(u))).tolist() == [1] * 8
    with pytest.raises(ValueError):
        polar_transform_packed(pack_bits(np.zeros(12, np.uint8)))


@pytest.mark.parametrize("n", LENGTHS)
def test_transform_matches_matrix(n, rng):
    g = generator_matrix(n)
    for u in rng.integers(0, 2, (20, n), dtype=np.uint8):
        want = (u.astype(int) @ g) % 2
        x = polar_transform_packed(pack_bits(u))
        assert x.padding_is_zero()
        assert np.array_equal(unpack_lut(x), want)
        assert np.array_equal(polar_transform_bytes(u), want)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_transform_is_involution(m, seed):
    u = np.random.default_rng(seed).integers(0, 2, 2**m, dtype=np.uint8)
    twice = polar_transform_packed(polar_transform_packed(pack_bits(u)))
    assert np.array_equal(unpack_lut(twice), u)


def test_generator_matrix_is_lower_triangular():
    g = generator_matrix(64)
    assert np.array_equal(g, np.tril(g))
    assert np.array_equal(g[-1], np.ones(64))


# -- systematic encoding --------------------------------------------------------------

def test_systematic_zero_and_length_check():
    plan = EncoderPlan(N8_FROZEN)
    assert not systematic_encode(np.zeros(4, np.uint8), plan).any()
    with pytest.raises(ValueError):
        systematic_encode(np.zeros(5, np.uint8), plan)


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128, 256, 512, 1024])
def test_packed_matches_matrix_oracle(n, rng):
    for trial in range(3):
        fs = random_frozen(n, rng)
        plan = EncoderPlan(fs)
        msgs = rng.integers(0, 2, (1_000 if trial == 0 else 100, fs.info_count),
                            dtype=np.uint8)
        assert np.array_equal(systematic_encode_batch(msgs, plan),
                              MatrixEncoder(fs).encode_batch(msgs))


@pytest.mark.parametrize("name", SPEC_NAMES)
def test_systematic_property_on_table_specs(name, rng):
    res = resources(name)
    spec = res.spec
    plan = EncoderPlan(res.frozen_set, spec.n_tx)
    msgs = crc_attach_batch(rng.integers(0, 2, (10_000, spec.k_info), dtype=np.uint8),
                            res.crc)
    cws = systematic_encode_batch(msgs, plan)
    assert cws.shape == (10_000, spec.n_tx)
    assert np.array_equal(cws[:, res.info_positions], msgs)
    # a codeword: transforming back gives zeros on the frozen positions
    full = np.zeros((100, spec.n_mother), np.uint8)
    full[:, :spec.n_tx] = cws[:100]
    u = (full.astype(np.float32) @ MatrixEncoder(res.frozen_set).g.astype(np.float32)) % 2
    assert not u[:, res.frozen_set.frozen].any()
    # the three encoders agree
    naive = NaiveEncoder(res.frozen_set, spec.n_tx)
    single = SystematicEncoder(plan)
    for msg, cw in zip(msgs[:50], cws[:50]):
        assert np.array_equal(naive(msg), cw)
        assert np.array_equal(single(msg), cw)
        assert np.array_equal(systematic_encode(msg, plan), cw)


def test_encoder_timing_loops_return_ticks(rng):
    fs = frozen_set_for(TABLE1[-1].spec())
    plan = EncoderPlan(fs)
    msgs = rng.integers(0, 2, (50, fs.info_count), dtype=np.uint8)
    for enc in (SystematicEncoder(plan), NaiveEncoder(fs)):
        ticks = encode_ticks(enc, msgs)
        assert ticks.shape == (50,) and (ticks >= 0).all()
    with pytest.raises(TypeError):
        encode_ticks(MatrixEncoder(fs), msgs)
