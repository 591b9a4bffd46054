"""Inverse step: shortest distance and limit class from indicator samples."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .logvalue import LogValue

ZERO, PLUS_INF, MINUS_INF, INDETERMINATE = "zero", "plus_infinity", "minus_infinity", "indeterminate"
MODELS = ("pure_slope", "slope_plus_log")
CSV_HEADER = ("tau", "sign", "log_mag")


@dataclass
class LogSeries:
    """Samples (tau, sign, log|I|) with tau strictly increasing."""

    taus: np.ndarray
    signs: np.ndarray
    log_mags: np.ndarray
    gamma0: float = 1.0
    source: str = "external"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float).reshape(-1)
        self.signs = np.asarray(self.signs, dtype=int).reshape(-1)
        self.log_mags = np.asarray(self.log_mags, dtype=float).reshape(-1)
        if not (self.taus.size == self.signs.size == self.log_mags.size):
            raise ValueError("taus, signs and log_mags must have equal length")
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("tau must be strictly increasing")
        if np.any(~np.isin(self.signs, (-1, 0, 1))):
            raise ValueError("signs must be -1, 0 or 1")

    @classmethod
    def from_values(cls, taus, values: Iterable[LogValue], gamma0: float = 1.0,
                    source: str = "external", meta: Optional[dict] = None) -> "LogSeries":
        vals = list(values)
        return cls(np.asarray(taus, float), [v.sign for v in vals], [v.log_mag for v in vals],
                   gamma0, source, dict(meta or {}))

    def __len__(self) -> int:
        return int(self.taus.size)

    def values(self) -> list[LogValue]:
        return [LogValue(int(s), float(m)) for s, m in zip(self.signs, self.log_mags)]

    def window(self, tau_min: float = -math.inf, tau_max: float = math.inf) -> "LogSeries":
        keep = (self.taus >= tau_min) & (self.taus <= tau_max)
        return LogSeries(self.taus[keep], self.signs[keep], self.log_mags[keep],
                         self.gamma0, self.source, dict(self.meta))

    @property
    def mixed_signs(self) -> bool:
        nz = self.signs[self.signs != 0]
        return bool(nz.size and (np.any(nz != nz[0]) or nz.size < self.signs.size))

    # -- CSV -------------------------------------------------------------------
    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        for t, s, m in zip(self.taus, self.signs, self.log_mags):
            buf.write(f"{t:.17g},{int(s)},{m:.17g}\n")
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, gamma0: float = 1.0) -> "LogSeries":
        """Read a series from a path or from CSV text with header tau,sign,log_mag."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)}")
        body = [r for r in rows[1:] if r]
        taus = [float(r[0]) for r in body]
        signs = [int(float(r[1])) for r in body]
        mags = [float(r[2]) for r in body]
        return cls(taus, signs, mags, gamma0, "external")


@dataclass(frozen=True)
class ReconstructionResult:
    l0_hat: float
    stderr: float
    sign_class: str
    model: str
    window: tuple[float, float]
    n_samples: int

    def to_dict(self) -> dict:
        return {"l0_hat": self.l0_hat, "stderr": self.stderr, "sign_class": self.sign_class,
                "model": self.model, "window": list(self.window), "n_samples": self.n_samples}


def _sign_class(series: LogSeries) -> str:
    if series.mixed_signs or np.all(series.signs == 0):
        return INDETERMINATE
    return "plus" if series.signs[series.signs != 0][0] > 0 else "minus"


def fit_shortest_length(series: LogSeries, model: str = "slope_plus_log",
                        window: Optional[tuple[float, float]] = None) -> ReconstructionResult:
    """l0 from the decay rate: log|I| ~ const - 2 tau l0 / sqrt(gamma0) [- 4 log tau].

    ``slope_plus_log`` removes the known tau^-4 prefactor before the linear
    fit; ``pure_slope`` fits log|I| against tau directly.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    s = series.window(*window) if window else series
    if len(s) < 4:
        raise ValueError("need at least 4 samples in the fit window")
    if s.mixed_signs:
        raise ValueError("mixed signs in fit window: pre-asymptotic regime")
    y = s.log_mags + (4.0 * np.log(s.taus) if model == "slope_plus_log" else 0.0)
    X = np.column_stack([np.ones_like(s.taus), s.taus])
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(s) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(X.T @ X)
    half = 0.5 * math.sqrt(series.gamma0)
    l0_hat = -coef[1] * half
    if not l0_hat > 0:
        raise ValueError(f"fitted decay rate is not positive (l0_hat = {l0_hat:.4g})")
    return ReconstructionResult(float(l0_hat), float(math.sqrt(max(cov[1, 1], 0.0)) * half),
                                _sign_class(s), model, (float(s.taus[0]), float(s.taus[-1])),
                                len(s))


def classify_sign(series: LogSeries, T: float, fit: Optional[ReconstructionResult] = None,
                  late_fraction: float = 0.5, margin_sigmas: float = 3.0) -> str:
    """Limit of exp(tau T) I_tau judged from the samples.

    T below 2 l0_hat / sqrt(gamma0) gives zero, above it the sign of the
    late-window samples decides.  A T within ``margin_sigmas`` standard
    errors of the threshold, or mixed late signs, gives indeterminate.
    """
    if len(series) == 0:
        return INDETERMINATE
    late = series.window(series.taus[min(int(len(series) * (1 - late_fraction)),
                                         len(series) - 1)])
    if late.mixed_signs or np.all(late.signs == 0):
        return INDETERMINATE
    if fit is None:
        try:
            fit = fit_shortest_length(late if series.mixed_signs else series)
        except ValueError:
            return INDETERMINATE
    scale = 2.0 / math.sqrt(series.gamma0)
    thr = scale * fit.l0_hat
    margin = max(margin_sigmas * scale * fit.stderr, 1e-9 * thr)
    if abs(T - thr) <= margin:
        return INDETERMINATE
    if T < thr:
        return ZERO
    return PLUS_INF if late.signs[late.signs != 0][0] > 0 else MINUS_INF
