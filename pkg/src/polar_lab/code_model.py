"""Code specifications and frozen-set construction (GA and 5G)."""
from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._nr_sequence import NR_RELIABILITY_1024


class SpecError(ValueError):
    """A code specification violates one of its invariants."""


class SpecParseError(SpecError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class Construction(enum.Enum):
    GA = "ga"
    FIVE_G = "5g"


class PmMode(enum.Enum):
    APPROXIMATE = "approximate"
    EXACT = "exact"


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def mother_dimensions(k_info, crc_size, rate):
    """Return ``(n_mother, n_tx)`` for ``k_info`` bits at ``rate``.

    ``n_tx`` is ``k_info / rate`` rounded to the nearest integer and
    ``n_mother`` the smallest power of two holding it.
    """
    rate = Fraction(rate)
    if not 0 < rate <= 1:
        raise SpecError(f"rate must lie in (0, 1], got {rate}")
    if k_info < 1:
        raise SpecError(f"k_info must be >= 1, got {k_info}")
    n_tx = round(Fraction(k_info) / rate)
    if k_info + crc_size > n_tx:
        raise SpecError(
            f"k_info + crc_size = {k_info + crc_size} exceeds n_tx = {n_tx}")
    n_mother = 1 << max(0, (n_tx - 1).bit_length())
    return n_mother, n_tx


def shortened_positions(n_mother, n_tx):
    """Tail-shortened indices ``{n_tx, ..., n_mother - 1}``.

    Freezing these source bits zeroes the same codeword positions because
    the polar transform is lower triangular, so they are never sent.
    """
    if n_tx > n_mother:
        raise SpecError(f"n_tx = {n_tx} exceeds n_mother = {n_mother}")
    return np.arange(n_tx, n_mother)


@dataclass(frozen=True)
class CodeSpec:
    k_info: int
    crc_size: int
    crc_poly: int
    rate: Fraction
    construction: Construction
    list_schedule: tuple
    design_snr_db: float | None = None
    pm_mode: PmMode = PmMode.APPROXIMATE
    n_mother: int | None = None
    n_tx: int | None = field(default=None)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "rate", Fraction(self.rate))
        set_(self, "construction", Construction(self.construction))
        set_(self, "pm_mode", PmMode(self.pm_mode))
        set_(self, "list_schedule", tuple(int(x) for x in self.list_schedule))
        n_min, n_tx = mother_dimensions(self.k_info, self.crc_size, self.rate)
        if self.n_tx is not None and self.n_tx != n_tx:
            raise SpecError(f"n_tx = {self.n_tx} but round(k_info / rate) = {n_tx}")
        set_(self, "n_tx", n_tx)
        if self.n_mother is None:
            set_(self, "n_mother", n_min)
        elif not _is_pow2(self.n_mother) or self.n_mother < n_min:
            raise SpecError(
                f"n_mother must be a power of two >= {n_min}, got {self.n_mother}")
        if self.crc_size < 0 or self.crc_size > 16:
            raise SpecError(f"crc_size must be in 0..16, got {self.crc_size}")
        if self.crc_size and not 0 <= self.crc_poly < (1 << self.crc_size):
            raise SpecError(
                f"crc_poly 0x{self.crc_poly:X} does not fit in {self.crc_size} bits")
        _check_schedule(self.list_schedule)
        if self.construction is Construction.GA:
            if self.design_snr_db is None or not math.isfinite(self.design_snr_db):
                raise SpecError("GA construction needs a finite design_snr_db")
        if self.construction is Construction.FIVE_G and self.n_mother > 1024:
            raise SpecError("5G construction is defined up to n_mother = 1024")

    @property
    def info_count(self):
        return self.k_info + self.crc_size

    @property
    def l_max(self):
        return self.list_schedule[-1]

    @property
    def info_rate(self):
        """Rate used for Eb/N0 bookkeeping (CRC bits count as overhead)."""
        return Fraction(self.k_info, self.n_tx)

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        if ("k_info" in changes or "crc_size" in changes or "rate" in changes) \
                and "n_mother" not in changes:
            values["n_mother"] = None
        values["n_tx"] = None
        return CodeSpec(**values)


def _check_schedule(schedule):
    if not schedule:
        raise SpecError("list_schedule must not be empty")
    if schedule[0] < 2:
        raise SpecError("list_schedule must start at a list size >= 2")
    for a, b in zip(schedule, schedule[1:]):
        if b <= a:
            raise SpecError(
                f"list_schedule must be strictly increasing, got {schedule}")
    for x in schedule:
        if not _is_pow2(x):
            raise SpecError(f"list sizes must be powers of two, got {x}")


def doubling_schedule(l_max):
    sched, x = [], 2
    while x <= l_max:
        sched.append(x)
        x *= 2
    return tuple(sched)


@dataclass(frozen=True)
class ReliabilityOrder:
    """Sub-channel indices sorted by ascending reliability."""

    order: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        if not np.array_equal(np.sort(order), np.arange(order.size)):
            raise ValueError("reliability order must be a permutation")
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def n(self):
        return self.order.size


@dataclass(frozen=True, eq=False)
class FrozenSet:
    """Per-index frozen flags of the mother code (``True`` means frozen)."""

    frozen: np.ndarray

    def __post_init__(self):
        frozen = np.array(self.frozen, dtype=bool)
        frozen.setflags(write=False)
        object.__setattr__(self, "frozen", frozen)

    @property
    def n(self):
        return self.frozen.size

    @property
    def info_count(self):
        return int(np.count_nonzero(~self.frozen))

    @property
    def info_positions(self):
        return np.flatnonzero(~self.frozen)

    def __eq__(self, other):
        return isinstance(other, FrozenSet) and np.array_equal(self.frozen, other.frozen)

    def __hash__(self):
        return hash(self.frozen.tobytes())


def build_reliability_5g(n_mother):
    if not _is_pow2(n_mother):
        raise SpecError(f"n_mother must be a power of two, got {n_mother}")
    if n_mother > 1024:
        raise SpecError("the 38.212 sequence is only defined up to length 1024")
    seq = np.asarray(NR_RELIABILITY_1024, dtype=np.int64)
    return ReliabilityOrder(seq[seq < n_mother])


# Two-piece approximation of phi(x) = 1 - E[tanh(L/2)], L ~ N(x, 2x).
_PHI_A = 0.4527
_PHI_B = 0.86
_PHI_C = 0.0218
_PHI_SWITCH = 10.0
_LOG_PHI_AT_SWITCH = -_PHI_A * _PHI_SWITCH ** _PHI_B + _PHI_C


def _log_phi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    lo = x < _PHI_SWITCH
    xl = x[lo]
    out[lo] = -_PHI_A * xl ** _PHI_B + _PHI_C
    xh = x[~lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~lo] = (0.5 * np.log(np.pi / xh) - xh / 4.0
                    + np.log1p(-10.0 / (7.0 * xh)))
    out[x == 0] = 0.0
    out[np.isinf(x)] = -np.inf
    return out


def _phi_inv_from_log(y):
    """Invert the approximation given ``log phi``; monotone branch choice."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    lo = y >= _LOG_PHI_AT_SWITCH
    out[lo] = ((_PHI_C - np.minimum(y[lo], 0.0)) / _PHI_A) ** (1.0 / _PHI_B)
    hi = ~lo
    if np.any(hi):
        yh = y[hi]
        finite = np.isfinite(yh)
        res = np.full(yh.shape, np.inf)
        if np.any(finite):
            t = yh[finite]
            a = np.full(t.shape, _PHI_SWITCH)
            # upper bracket: log phi(x) <= -x/4 + 0.5 log(pi/x) < -x/4 + 1 for x >= 10
            b = np.maximum(4.0 * (1.0 - t), 2 * _PHI_SWITCH)
            for _ in range(200):
                mid = 0.5 * (a + b)
                go_right = _log_phi(mid) > t
                a = np.where(go_right, mid, a)
                b = np.where(go_right, b, mid)
                if np.all(b - a <= 1e-12 * b):
                    break
            res[finite] = 0.5 * (a + b)
        out[hi] = res
    return out


def _ga_check_node(m1, m2):
    """Mean LLR through the degrading (check) kernel."""
    lp1, lp2 = _log_phi(m1), _log_phi(m2)
    # 1 - (1 - p1)(1 - p2) = p1 + p2 - p1 p2, evaluated in the log domain
    hi = np.maximum(lp1, lp2)
    lo = np.minimum(lp1, lp2)
    with np.errstate(invalid="ignore"):
        diff = np.where(np.isfinite(lo), lo - hi, -np.inf)
        log_target = hi + np.log1p(np.exp(diff) - np.exp(lo))
    log_target = np.where(np.isneginf(hi), -np.inf, log_target)
    return _phi_inv_from_log(log_target)


def ga_mean_llrs(n_mother, design_snr_db, rate=1.0, n_tx=None):
    """Per-sub-channel mean LLR under the Gaussian approximation.

    ``design_snr_db`` is an Eb/N0 for information rate ``rate``; positions at
    or beyond ``n_tx`` are known zeros and start with an infinite mean.
    """
    if not _is_pow2(n_mother):
        raise SpecError(f"n_mother must be a power of two, got {n_mother}")
    ebn0 = 10.0 ** (design_snr_db / 10.0)
    m0 = 4.0 * float(rate) * ebn0  # 2 / sigma^2
    means = np.full(n_mother, m0)
    if n_tx is not None:
        means[n_tx:] = np.inf
    # level-by-level: a block of size 2h splits into f over the first half
    # and g over the second half of the source index range
    blocks = means.reshape(1, n_mother)
    while blocks.shape[1] > 1:
        h = blocks.shape[1] // 2
        a, b = blocks[:, :h], blocks[:, h:]
        left = _ga_check_node(a.ravel(), b.ravel()).reshape(a.shape)
        right = a + b
        blocks = np.stack([left, right], axis=1).reshape(-1, h)
    return blocks.ravel()


def build_reliability_ga(n_mother, design_snr_db, rate=1.0, n_tx=None):
    if not math.isfinite(design_snr_db):
        raise SpecError("design_snr_db must be finite")
    means = ga_mean_llrs(n_mother, design_snr_db, rate, n_tx)
    return ReliabilityOrder(np.argsort(means, kind="stable"))


def build_reliability(spec):
    if spec.construction is Construction.FIVE_G:
        return build_reliability_5g(spec.n_mother)
    return build_reliability_ga(spec.n_mother, spec.design_snr_db,
                                float(spec.info_rate), spec.n_tx)


def derive_frozen_set(order, spec):
    n = spec.n_mother
    if order.n != n:
        raise SpecError(f"reliability order covers {order.n} indices, need {n}")
    shortened = np.zeros(n, dtype=bool)
    shortened[spec.n_tx:] = True
    candidates = order.order[~shortened[order.order]]
    if candidates.size < spec.info_count:
        raise SpecError(
            f"only {candidates.size} non-shortened positions for "
            f"{spec.info_count} info bits")
    frozen = np.ones(n, dtype=bool)
    if spec.info_count:
        frozen[candidates[-spec.info_count:]] = False
    return FrozenSet(frozen)


def frozen_set_for(spec):
    return derive_frozen_set(build_reliability(spec), spec)


# -- structured-text config files ------------------------------------------

_KEYS = ("k_info", "crc_size", "crc_poly", "rate", "construction",
         "design_snr_db", "list_schedule", "pm_mode", "n_mother")
_REQUIRED = ("k_info", "crc_size", "rate", "construction", "list_schedule")
_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _parse_value(key, raw, line):
    try:
        if key in ("k_info", "crc_size", "n_mother"):
            return int(raw)
        if key == "crc_poly":
            return int(raw, 16)
        if key == "rate":
            if not re.fullmatch(r"\d+\s*/\s*\d+|\d+", raw):
                raise ValueError("expected p/q")
            return Fraction(raw.replace(" ", ""))
        if key == "construction":
            return Construction(raw.lower())
        if key == "design_snr_db":
            return None if raw.lower() in ("", "none") else float(raw)
        if key == "list_schedule":
            return tuple(int(x) for x in re.split(r"[,\s]+", raw.strip("()[] ")) if x)
        if key == "pm_mode":
            return PmMode(raw.lower())
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecParseError(f"cannot parse {raw!r}: {exc}", line, key) from None
    raise SpecParseError("unknown field", line, key)


def parse_spec(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _LINE.match(stripped)
        if not m:
            raise SpecParseError(f"expected 'key = value', got {stripped!r}", lineno)
        key, raw = m.groups()
        if key not in _KEYS:
            raise SpecParseError("unknown field", lineno, key)
        if key in values:
            raise SpecParseError("duplicate field", lineno, key)
        values[key] = _parse_value(key, raw, lineno)
    for key in _REQUIRED:
        if key not in values:
            raise SpecParseError("missing required field", key=key)
    if values.get("crc_size", 0) and "crc_poly" not in values:
        raise SpecParseError("missing required field", key="crc_poly")
    values.setdefault("crc_poly", 0)
    spec = CodeSpec(**values)
    if spec.crc_size and spec.crc_poly % 2 == 0:
        warnings.warn(f"CRC polynomial 0x{spec.crc_poly:X} has no constant term",
                      stacklevel=2)
    return spec


def format_spec(spec):
    width = max(1, (spec.crc_size + 3) // 4)
    lines = [
        f"k_info = {spec.k_info}",
        f"crc_size = {spec.crc_size}",
        f"crc_poly = 0x{spec.crc_poly:0{width}X}",
        f"rate = {spec.rate.numerator}/{spec.rate.denominator}",
        f"construction = {spec.construction.value}",
        f"design_snr_db = {'none' if spec.design_snr_db is None else repr(spec.design_snr_db)}",
        f"list_schedule = {','.join(str(x) for x in spec.list_schedule)}",
        f"pm_mode = {spec.pm_mode.value}",
        f"n_mother = {spec.n_mother}",
    ]
    return "\n".join(lines) + "\n"


def load_spec(path):
    return parse_spec(Path(path).read_text())


def save_spec(spec, path):
    Path(path).write_text(format_spec(spec))
