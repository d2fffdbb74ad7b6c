"""The twelve contest operating points and their code configurations."""
from dataclasses import dataclass
from fractions import Fraction

from .code_model import CodeSpec, Construction, doubling_schedule


@dataclass(frozen=True)
class ContestRow:
    rate: Fraction
    k_info: int
    crc_size: int
    crc_poly: int
    construction: Construction
    encoder_worst_us: float
    l_max: int
    ebn0_fer_1e3: float
    latency_avg_1e3_us: float
    ebn0_fer_1e5: float
    latency_avg_1e5_us: float

    @property
    def name(self):
        return f"r{self.rate.numerator}{self.rate.denominator}_k{self.k_info}"

    def spec(self, **overrides):
        values = dict(
            k_info=self.k_info,
            crc_size=self.crc_size,
            crc_poly=self.crc_poly,
            rate=self.rate,
            construction=self.construction,
            design_snr_db=self.ebn0_fer_1e3,
            list_schedule=doubling_schedule(self.l_max),
        )
        values.update(overrides)
        return CodeSpec(**values)


_GA, _5G = Construction.GA, Construction.FIVE_G
_Q, _H, _F = Fraction(1, 4), Fraction(1, 2), Fraction(4, 5)

TABLE1 = (
    ContestRow(_Q, 64, 11, 0x385, _5G, 0.20, 64, 2.15, 2.53, 3.35, 0.55),
    ContestRow(_Q, 128, 12, 0xF13, _5G, 0.28, 64, 1.60, 6.44, 2.60, 1.07),
    ContestRow(_Q, 256, 12, 0xF13, _5G, 0.60, 64, 1.25, 10.58, 2.25, 1.66),
    ContestRow(_Q, 512, 12, 0xF13, _GA, 1.01, 32, 1.10, 14.92, 1.85, 3.53),
    ContestRow(_H, 64, 7, 0x65, _5G, 0.14, 32, 3.15, 0.70, 4.60, 0.33),
    ContestRow(_H, 128, 12, 0xF13, _5G, 0.21, 64, 2.55, 3.31, 3.45, 0.69),
    ContestRow(_H, 256, 12, 0xF13, _5G, 0.34, 64, 2.15, 6.55, 3.10, 1.18),
    ContestRow(_H, 512, 16, 0x8005, _5G, 0.68, 64, 1.90, 11.95, 2.70, 2.12),
    ContestRow(_F, 64, 8, 0x9B, _GA, 0.15, 32, 5.05, 0.48, 6.45, 0.16),
    ContestRow(_F, 128, 10, 0x3D9, _5G, 0.20, 32, 4.40, 1.21, 5.35, 0.41),
    ContestRow(_F, 256, 10, 0x3D9, _5G, 0.34, 32, 4.10, 2.20, 5.00, 0.67),
    ContestRow(_F, 512, 12, 0xF13, _5G, 0.66, 32, 3.75, 4.92, 4.55, 1.36),
)


def row(rate, k_info):
    rate = Fraction(rate)
    for r in TABLE1:
        if r.rate == rate and r.k_info == k_info:
            return r
    raise KeyError(f"no contest row for rate {rate}, K={k_info}")
