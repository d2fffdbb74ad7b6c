import hashlib
import warnings
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_lab._nr_sequence import NR_RELIABILITY_1024
from polar_lab.code_model import (
    CodeSpec, Construction, PmMode, ReliabilityOrder, SpecError, SpecParseError,
    build_reliability_5g, build_reliability_ga, derive_frozen_set, doubling_schedule,
    format_spec, frozen_set_for, ga_mean_llrs, load_spec, mother_dimensions, parse_spec,
    save_spec, shortened_positions,
)
from polar_lab.decoder.kernels import f_exact
from polar_lab.encoder import MatrixEncoder
from polar_lab.sim.channel import ebn0_to_sigma
from polar_lab.table1 import TABLE1, row

from conftest import CONFIGS

# pinned digest of the 1024-entry sequence as little-endian uint16
FIVE_G_DIGEST = "06ec3946bc78452ca29a19554793412de07b792a0306f139737af11e71687bff"


def toy_spec(k=4, crc=0, rate=Fraction(1, 2), construction="5g", **kw):
    kw.setdefault("design_snr_db", 2.0)
    return CodeSpec(k_info=k, crc_size=crc, crc_poly=0x9B if crc else 0, rate=rate,
                    construction=construction, list_schedule=(2,), **kw)


# -- dimensions and shortening ---------------------------------------------------

@pytest.mark.parametrize("k, crc, rate, expected", [
    (128, 12, Fraction(1, 2), (256, 256)),
    (64, 8, Fraction(4, 5), (128, 80)),
    (64, 11, Fraction(1, 4), (256, 256)),
])
def test_mother_dimensions_examples(k, crc, rate, expected):
    assert mother_dimensions(k, crc, rate) == expected


def test_mother_dimensions_rejects_bad_input():
    with pytest.raises(SpecError):
        mother_dimensions(64, 20, Fraction(4, 5))  # 84 > 80
    with pytest.raises(SpecError):
        mother_dimensions(64, 0, Fraction(0))
    with pytest.raises(SpecError):
        mother_dimensions(64, 0, Fraction(3, 2))
    with pytest.raises(SpecError):
        mother_dimensions(0, 0, Fraction(1, 2))


@given(st.integers(1, 600), st.integers(0, 16), st.sampled_from(
    [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(4, 5), 1]))
def test_mother_dimensions_properties(k, crc, rate):
    try:
        n_mother, n_tx = mother_dimensions(k, crc, rate)
    except SpecError:
        assert k + crc > round(Fraction(k) / Fraction(rate))
        return
    assert n_tx == round(Fraction(k) / Fraction(rate))
    assert k + crc <= n_tx <= n_mother < 2 * n_tx
    assert n_mother & (n_mother - 1) == 0


def test_shortened_positions_examples():
    assert shortened_positions(128, 80).tolist() == list(range(80, 128))
    assert shortened_positions(256, 256).size == 0
    with pytest.raises(SpecError):
        shortened_positions(64, 80)


def test_shortened_codeword_tail_is_zero(rng):
    # matrix-product oracle: encode into the full mother codeword and look at the tail
    spec = row("4/5", 64).spec()
    fs = frozen_set_for(spec)
    assert fs.frozen[80:].all()
    enc = MatrixEncoder(fs, n_tx=spec.n_mother)
    cws = enc.encode_batch(rng.integers(0, 2, (500, fs.info_count)))
    assert not cws[:, 80:].any()


# -- 5G reliability sequence -------------------------------------------------------

def test_5g_n8_order():
    assert build_reliability_5g(8).order.tolist() == [0, 1, 2, 4, 3, 5, 6, 7]


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128, 256, 512, 1024])
def test_5g_is_nested_restriction(n):
    order = build_reliability_5g(n).order
    assert sorted(order.tolist()) == list(range(n))
    full = [i for i in NR_RELIABILITY_1024 if i < n]
    assert order.tolist() == full


def test_5g_full_table():
    order = build_reliability_5g(1024).order.tolist()
    assert order == list(NR_RELIABILITY_1024)
    assert order[:16] == [0, 1, 2, 4, 8, 16, 32, 3, 5, 64, 9, 6, 17, 10, 18, 128]
    assert order[-9:] == [1018, 991, 1020, 1007, 1015, 1019, 1021, 1022, 1023]
    digest = hashlib.sha256(np.array(order, dtype="<u2").tobytes()).hexdigest()
    assert digest == FIVE_G_DIGEST


def test_5g_respects_bitwise_partial_order():
    # setting a zero bit of a sub-channel index never makes it less reliable
    pos = {v: i for i, v in enumerate(NR_RELIABILITY_1024)}
    for i in range(1024):
        for b in range(10):
            if not (i >> b) & 1:
                assert pos[i | (1 << b)] > pos[i]


def test_5g_rejects_long_codes():
    with pytest.raises(SpecError):
        build_reliability_5g(2048)
    with pytest.raises(SpecError):
        build_reliability_5g(96)


# -- Gaussian approximation ------------------------------------------------------

def test_ga_n2():
    assert build_reliability_ga(2, 1.0).order.tolist() == [0, 1]


@given(st.floats(-10, 15))
def test_ga_n4_two_worst_are_first(snr):
    order = build_reliability_ga(4, snr).order
    assert sorted(order[:2].tolist()) == [0, 1]


@given(st.sampled_from([8, 32, 128, 1024]), st.floats(-5, 10))
@settings(max_examples=30, deadline=None)
def test_ga_is_permutation_and_monotone(n, snr):
    means = ga_mean_llrs(n, snr)
    order = build_reliability_ga(n, snr).order
    assert sorted(order.tolist()) == list(range(n))
    assert np.all(np.diff(means[order]) >= 0)


def test_ga_rejects_nonfinite_snr():
    with pytest.raises(SpecError):
        build_reliability_ga(64, float("nan"))


def test_ga_shortened_positions_are_most_reliable():
    means = ga_mean_llrs(128, 3.0, 0.8, n_tx=80)
    assert np.isinf(means[80:]).all()
    assert np.isfinite(means[:80]).all()


def _genie_leaf_llrs(n, ebn0_db, rate, frames, seed):
    # all-zero codeword with a genie feeding back correct (zero) partial sums
    sigma = ebn0_to_sigma(ebn0_db, rate)
    gen = np.random.default_rng(seed)
    llr = 2.0 * (1.0 + sigma * gen.standard_normal((frames, n))) / sigma**2
    blocks = llr[:, None, :]
    while blocks.shape[2] > 1:
        h = blocks.shape[2] // 2
        a, b = blocks[:, :, :h], blocks[:, :, h:]
        blocks = np.stack([f_exact(a, b), a + b], axis=2).reshape(frames, -1, h)
    return blocks[:, :, 0]


def test_ga_agrees_with_genie_monte_carlo():
    n, snr = 64, 2.0
    leaf = _genie_leaf_llrs(n, snr, 0.5, 100_000, seed=1)
    err = (leaf < 0).mean(axis=0) + 0.5 * (leaf == 0).mean(axis=0)
    # worst first; error-free channels are ranked by their mean LLR
    mc = np.lexsort((leaf.mean(axis=0), -err))
    ga = build_reliability_ga(n, snr, 0.5).order
    assert set(ga[:16]) == set(mc[:16])
    assert set(ga[-16:]) == set(mc[-16:])


# -- frozen sets -------------------------------------------------------------------

def test_frozen_set_n8_5g():
    fs = derive_frozen_set(build_reliability_5g(8), toy_spec(k=4))
    assert fs.info_positions.tolist() == [3, 5, 6, 7]
    assert np.flatnonzero(fs.frozen).tolist() == [0, 1, 2, 4]


def test_frozen_set_all_info():
    spec = toy_spec(k=8, rate=1)
    assert not frozen_set_for(spec).frozen.any()


def test_frozen_set_shortening_wins():
    spec = CodeSpec(k_info=64, crc_size=8, crc_poly=0x9B, rate=Fraction(4, 5),
                    construction="5g", list_schedule=(2,))
    fs = frozen_set_for(spec)
    assert fs.info_count == 72
    assert fs.frozen[80:].all()


def test_frozen_set_rejects_mismatched_order():
    with pytest.raises(SpecError):
        derive_frozen_set(build_reliability_5g(16), toy_spec(k=4))


def test_frozen_set_rejects_too_few_positions():
    spec = toy_spec(k=4)
    order = ReliabilityOrder(np.arange(8))
    tight = spec.replace(k_info=6, rate=Fraction(3, 4))  # 6 info bits, 8 sent
    assert derive_frozen_set(order, tight).info_count == 6
    # CodeSpec itself forbids this, so hand the derivation a bare record
    crowded = SimpleNamespace(n_mother=8, n_tx=5, info_count=6)
    with pytest.raises(SpecError):
        derive_frozen_set(order, crowded)


@st.composite
def specs(draw):
    crc = draw(st.sampled_from([0, 8]))
    rate = draw(st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(2, 3),
                                 Fraction(4, 5)]))
    # k + crc <= k / rate needs k >= crc * rate / (1 - rate)
    k_min = max(1, -(-crc * rate.numerator // (rate.denominator - rate.numerator)) + 1)
    k = draw(st.integers(k_min, 200))
    return toy_spec(k=k, crc=crc, rate=rate, construction=draw(st.sampled_from(["ga", "5g"])),
                    design_snr_db=draw(st.floats(-2, 6)))


@given(specs())
@settings(max_examples=60, deadline=None)
def test_frozen_set_invariants(spec):
    fs = frozen_set_for(spec)
    assert fs.n == spec.n_mother
    assert fs.info_count == spec.info_count
    assert fs.frozen[shortened_positions(spec.n_mother, spec.n_tx)].all()
    assert fs == frozen_set_for(spec)


@given(specs())
@settings(max_examples=40, deadline=None)
def test_frozen_set_takes_most_reliable(spec):
    order = ReliabilityOrder(
        build_reliability_5g(spec.n_mother).order if spec.construction is Construction.FIVE_G
        else build_reliability_ga(spec.n_mother, spec.design_snr_db,
                                  float(spec.info_rate), spec.n_tx).order)
    fs = derive_frozen_set(order, spec)
    rank = np.empty(spec.n_mother, dtype=int)
    rank[order.order] = np.arange(spec.n_mother)
    sendable = ~np.isin(np.arange(spec.n_mother),
                        shortened_positions(spec.n_mother, spec.n_tx))
    frozen_ok = fs.frozen & sendable
    if frozen_ok.any() and fs.info_count:
        assert rank[frozen_ok].max() < rank[~fs.frozen].min()


# -- spec validation and config files ---------------------------------------------

@pytest.mark.parametrize("schedule", [(4, 2), (1, 2), (2, 6), (), (2, 2)])
def test_bad_list_schedule(schedule):
    with pytest.raises(SpecError):
        CodeSpec(k_info=4, crc_size=0, crc_poly=0, rate=Fraction(1, 2), construction="5g",
                 list_schedule=schedule)


def test_spec_invariants():
    with pytest.raises(SpecError):
        toy_spec(n_mother=12)
    with pytest.raises(SpecError):
        toy_spec(n_mother=4)
    with pytest.raises(SpecError):
        toy_spec(construction="ga", design_snr_db=None)
    with pytest.raises(SpecError):
        CodeSpec(k_info=600, crc_size=0, crc_poly=0, rate=Fraction(1, 4),
                 construction="5g", list_schedule=(2,))
    assert toy_spec(n_mother=32).n_mother == 32


def test_doubling_schedule():
    assert doubling_schedule(64) == (2, 4, 8, 16, 32, 64)
    assert doubling_schedule(2) == (2,)


@given(specs(), st.sampled_from([PmMode.APPROXIMATE, PmMode.EXACT]))
@settings(max_examples=40, deadline=None)
def test_spec_text_round_trip(spec, mode):
    spec = spec.replace(pm_mode=mode)
    assert parse_spec(format_spec(spec)) == spec


def test_spec_file_round_trip(tmp_path):
    spec = TABLE1[0].spec()
    save_spec(spec, tmp_path / "a.cfg")
    assert load_spec(tmp_path / "a.cfg") == spec


@pytest.mark.parametrize("text, where", [
    ("k_info = 4\ncrc_size = 0\nrate = 1/2\nconstruction = 5g\nlist_schedule = 2\nbogus = 1\n",
     "line 6"),
    ("k_info = four\n", "line 1"),
    ("k_info = 4\ncrc_size = 0\nrate = 1/2\nconstruction = 5g\n", "list_schedule"),
    ("k_info = 4\nk_info = 5\n", "line 2"),
    ("k_info = 4\ncrc_size = 8\nrate = 1/2\nconstruction = 5g\nlist_schedule = 2\n", "crc_poly"),
    ("just words\n", "line 1"),
])
def test_parse_errors_name_location(text, where):
    with pytest.raises(SpecParseError, match=where):
        parse_spec(text)


def test_even_polynomial_warns():
    text = ("k_info = 16\ncrc_size = 8\ncrc_poly = 0x9A\nrate = 1/2\nconstruction = 5g\n"
            "list_schedule = 2\n")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parse_spec(text)
    assert any("constant term" in str(w.message) for w in caught)


@pytest.mark.parametrize("r", TABLE1, ids=lambda r: r.name)
def test_shipped_configs_match_table(r):
    spec = load_spec(CONFIGS / f"{r.name}.cfg")
    assert spec == r.spec()
    assert spec.l_max == r.l_max
    assert spec.info_count == frozen_set_for(spec).info_count


def test_table_lengths():
    for r in TABLE1:
        spec = r.spec()
        assert spec.n_tx == round(r.k_info / r.rate)
    assert row("1/2", 128).crc_poly == 0xF13

