import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from polar_lab.estimators import PolarDecoder, PolarEncoder
from polar_lab.sim.channel import FrameRng, bpsk_awgn_batch

from conftest import CONFIGS, resources


def test_params_and_clone():
    dec = PolarDecoder(CONFIGS / "r12_k64.cfg", decoder="scl", list_size=8)
    params = dec.get_params()
    assert params["decoder"] == "scl" and params["list_size"] == 8
    twin = clone(dec)
    assert twin.get_params() == params and not hasattr(twin, "decoder_")
    assert clone(PolarEncoder(resources("r12_k64").spec)).spec == resources("r12_k64").spec


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PolarEncoder(CONFIGS / "r12_k64.cfg").transform(np.zeros((1, 64)))
    with pytest.raises(NotFittedError):
        PolarDecoder(CONFIGS / "r12_k64.cfg").predict(np.zeros((1, 128)))
    with pytest.raises(ValueError):
        PolarEncoder().fit()


def test_encode_decode_round_trip(rng):
    spec = resources("r45_k64").spec
    msgs = rng.integers(0, 2, (50, spec.k_info), dtype=np.uint8)
    enc = PolarEncoder(spec).fit()
    assert enc.n_features_in_ == spec.k_info
    cws = enc.transform(msgs)
    assert cws.shape == (50, spec.n_tx)
    assert np.array_equal(cws[:, enc.resources_.info_positions[:spec.k_info]], msgs)
    llrs = bpsk_awgn_batch(cws, 0.0, FrameRng(1), spec.n_mother)
    for kind, backend in (("ascl", "numba"), ("sc", "reference"), ("scl", "reference")):
        dec = PolarDecoder(spec, kind, 4 if kind == "scl" else None, backend).fit()
        assert np.array_equal(dec.predict(llrs), msgs)
        assert dec.score(llrs, msgs) == 1.0
        cw, ok, stage, _ = dec.decode(llrs)
        assert ok.all()


def test_input_validation(rng):
    spec = resources("r45_k64").spec
    enc = PolarEncoder(spec).fit()
    with pytest.raises(ValueError):
        enc.transform(np.zeros((2, spec.k_info + 1)))
    with pytest.raises(ValueError):
        enc.transform(np.full((2, spec.k_info), 2))
    dec = PolarDecoder(spec).fit()
    with pytest.raises(ValueError):
        dec.decode(np.zeros((2, spec.n_tx)))


def test_noisy_score(rng):
    spec = resources("r12_k64").spec
    msgs = rng.integers(0, 2, (400, spec.k_info), dtype=np.uint8)
    cws = PolarEncoder(spec).fit_transform(msgs)
    llrs = bpsk_awgn_batch(cws, 0.8, FrameRng(2), spec.n_mother)
    score = PolarDecoder(spec).fit().score(llrs, msgs)
    assert 0.5 < score <= 1.0
