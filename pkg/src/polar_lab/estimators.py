"""scikit-learn style front end: fit builds the code, transform/predict run it."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .code_model import CodeSpec, load_spec
from .crc import crc_attach_batch
from .decoder.reference import DecoderResources
from .encoder import EncoderPlan, systematic_encode_batch
from .sim.fer import DecoderChoice
from .unroller.emit import DEFAULT_BACKEND


def _resolve(spec):
    if spec is None:
        raise ValueError("a code spec (CodeSpec or path to a .cfg file) is required")
    return spec if isinstance(spec, CodeSpec) else load_spec(spec)


class PolarEncoder(TransformerMixin, BaseEstimator):
    """Messages ``(frames, k_info)`` to transmitted codewords ``(frames, n_tx)``.

    ``fit`` derives the frozen set; the CRC is attached before encoding.
    """

    def __init__(self, spec=None):
        self.spec = spec

    def fit(self, X=None, y=None):
        self.spec_ = _resolve(self.spec)
        self.resources_ = DecoderResources(self.spec_)
        self.plan_ = EncoderPlan(self.resources_.frozen_set, self.spec_.n_tx)
        self.n_features_in_ = self.spec_.k_info
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
        if X.shape[1] != self.spec_.k_info:
            raise ValueError(f"expected {self.spec_.k_info} message bits, got {X.shape[1]}")
        if np.any(X > 1):
            raise ValueError("messages must be 0/1 bits")
        return systematic_encode_batch(crc_attach_batch(X, self.resources_.crc), self.plan_)


class PolarDecoder(BaseEstimator):
    """Channel LLR frames ``(frames, n_mother)`` to decoded messages.

    ``decoder`` is ``"ascl"``, ``"scl"`` (with ``list_size``) or ``"sc"``;
    ``backend`` is an emitter backend or ``"reference"`` for the tree walkers.
    """

    def __init__(self, spec=None, decoder="ascl", list_size=None, backend=DEFAULT_BACKEND):
        self.spec = spec
        self.decoder = decoder
        self.list_size = list_size
        self.backend = backend

    def fit(self, X=None, y=None):
        self.spec_ = _resolve(self.spec)
        self.resources_ = DecoderResources(self.spec_)
        self.choice_ = DecoderChoice(self.decoder, self.list_size, self.backend)
        self.decoder_ = self.choice_.build(self.resources_)
        self.n_features_in_ = self.spec_.n_mother
        return self

    def decode(self, X):
        """``(codewords, crc_ok, stages, work)`` for every frame."""
        check_is_fitted(self, "decoder_")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.spec_.n_mother:
            raise ValueError(f"expected {self.spec_.n_mother} LLRs per frame, got {X.shape[1]}")
        return self.decoder_.decode_batch(X)

    def predict(self, X):
        cws = self.decode(X)[0]
        return cws[:, self.resources_.info_positions[:self.spec_.k_info]]

    def score(self, X, y):
        """Fraction of frames decoded to the right message (1 - FER)."""
        return float(np.mean(np.all(self.predict(X) == np.asarray(y), axis=1)))
