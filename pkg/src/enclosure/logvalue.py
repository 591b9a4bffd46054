"""Signed numbers stored as (sign, log|x|).

Indicator values scale like exp(-2*tau*l0/sqrt(gamma0)), which leaves the
double range around tau*l0 ~ 350.  Everything exponentially small is kept in
this form and only converted back to a float when the caller asks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class LogValue:
    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 and self.log_mag != -math.inf:
            object.__setattr__(self, "log_mag", -math.inf)
        if self.sign != 0 and not math.isfinite(self.log_mag):
            raise ValueError("non-zero LogValue needs a finite log magnitude")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if x == 0.0:
            return cls.zero()
        if not math.isfinite(x):
            raise ValueError(f"cannot represent {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_parts(cls, mantissa: float, exponent: float) -> "LogValue":
        """Value ``mantissa * exp(exponent)`` without forming exp(exponent)."""
        if mantissa == 0.0:
            return cls.zero()
        return cls(1 if mantissa > 0 else -1, math.log(abs(mantissa)) + exponent)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_mag)

    def __neg__(self) -> "LogValue":
        return LogValue(-self.sign, self.log_mag)

    def __mul__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("LogValue division by zero")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_mag - other.log_mag)

    def __add__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_float(float(other))
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_mag >= other.log_mag else (other, self)
        ratio = math.exp(lo.log_mag - hi.log_mag)
        if hi.sign == lo.sign:
            return LogValue(hi.sign, hi.log_mag + math.log1p(ratio))
        if ratio == 1.0:
            return LogValue.zero()
        return LogValue(hi.sign, hi.log_mag + math.log1p(-ratio))

    __radd__ = __add__

    def __sub__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_float(float(other))
        return self + (-other)

    def shifted(self, exponent: float) -> "LogValue":
        """Multiply by exp(exponent)."""
        if self.sign == 0:
            return self
        return LogValue(self.sign, self.log_mag + exponent)

    def to_float_shifted(self, exponent: float) -> float:
        """Return ``float(self) * exp(exponent)``, computed in log space."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_mag + exponent)


def log_sum(values: Iterable[LogValue]) -> LogValue:
    """Sum in a fixed order, largest magnitudes combined through a common scale."""
    vals = [v for v in values if v.sign != 0]
    if not vals:
        return LogValue.zero()
    top = max(v.log_mag for v in vals)
    # fsum keeps the result independent of summation order up to rounding
    total = math.fsum(v.sign * math.exp(v.log_mag - top) for v in vals)
    return LogValue.from_parts(total, top)


def as_arrays(values: Iterable[LogValue]) -> tuple[np.ndarray, np.ndarray]:
    vals = list(values)
    return (np.array([v.sign for v in vals], dtype=int),
            np.array([v.log_mag for v in vals], dtype=float))
