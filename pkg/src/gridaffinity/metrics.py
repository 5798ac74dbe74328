"""Regression metrics for affinity predictions."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateRegressionError


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    pearson_r: float
    sd: float
    slope: float
    intercept: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        return (f"n={self.n} RMSE={self.rmse:.4f} MAE={self.mae:.4f} "
                f"SD={self.sd:.4f} R={self.pearson_r:.4f}")


def metrics(measured, predicted) -> MetricsReport:
    """RMSE, MAE, Pearson R and the regression SD of measured on predicted values.

    SD = sqrt(sum((t - (a*y + b))**2) / (N - 1)) where a, b are the
    least-squares slope and intercept of t regressed on y.
    """
    t = np.asarray(measured, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError(f"measured {t.shape} and predicted {y.shape} must be equal-length 1-D")
    n = len(t)
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    err = y - t
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    yc = y - y.mean()
    tc = t - t.mean()
    syy = float(yc @ yc)
    if syy == 0.0:
        nan = float("nan")
        raise DegenerateRegressionError(
            "predictions are constant; R and SD are undefined",
            partial=MetricsReport(rmse, mae, nan, nan, nan, nan, n))
    slope = float(yc @ tc) / syy
    intercept = float(t.mean() - slope * y.mean())
    resid = t - (slope * y + intercept)
    sd = float(np.sqrt(resid @ resid / (n - 1)))
    stt = float(tc @ tc)
    r = float(yc @ tc) / np.sqrt(syy * stt) if stt > 0 else float("nan")
    r = float(np.clip(r, -1.0, 1.0))
    return MetricsReport(rmse, mae, r, sd, slope, intercept, n)


def rmse(measured, predicted) -> float:
    t = np.asarray(measured, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    return float(np.sqrt(np.mean((y - t) ** 2)))
