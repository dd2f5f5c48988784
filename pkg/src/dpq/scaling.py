"""Weighted fits for decay laws and saturation plateaus.

All fits are weighted least squares on transformed coordinates: power laws
are straight lines in log-log, exponentials straight lines in lin-log.
Relative errors propagate into log space as ``stderr / value`` with a
floor of :data:`ERROR_FLOOR` so that a single zero error bar cannot pin
the fit.  ``chi2 / dof`` is reported for goodness-of-fit comparisons
between competing models.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InsufficientDataError, NonPositiveValueError, PoorFitError
from .observables import EstimatorSeries

__all__ = [
    "FitResult",
    "fit_power_law",
    "fit_exponential",
    "estimate_saturation",
    "default_window",
    "ERROR_FLOOR",
]

ERROR_FLOOR = 1e-12


@dataclass
class FitResult:
    """Parameters, one-sigma errors and fit quality of one model."""

    model: str
    params: dict
    errors: dict
    window: tuple
    n_points: int
    chi2: float
    dof: int
    flags: tuple = ()

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["window"] = list(self.window)
        out["flags"] = list(self.flags)
        out["reduced_chi2"] = self.reduced_chi2
        return out


def default_window(L: int) -> tuple[int, int]:
    """Standard fit window for a patch of linear size L.

    [8, L // 4] once the patch is large enough for that to make sense;
    below L = 64 the lower edge shrinks with the patch so the window
    keeps at least a few points.
    """
    lo = 8 if L >= 64 else max(1, L // 8)
    return (lo, max(L // 4, lo + 4))


def _select(series: EstimatorSeries, window):
    x = series.x
    if window is None:
        mask = np.ones(x.shape, dtype=bool)
        window = (float(x[0]), float(x[-1]))
    else:
        lo, hi = window
        mask = (x >= lo) & (x <= hi)
    return x[mask], series.values[mask], series.stderr[mask], tuple(window)


def _wls(xd: np.ndarray, yd: np.ndarray, sigma: np.ndarray):
    """Straight-line weighted least squares; returns coefficients,
    their errors and chi-squared."""
    w = 1.0 / np.maximum(sigma, ERROR_FLOOR) ** 2
    design = np.stack([np.ones_like(xd), xd], axis=1)
    gram = design.T @ (design * w[:, None])
    rhs = design.T @ (yd * w)
    cov = np.linalg.inv(gram)
    coef = cov @ rhs
    resid = yd - design @ coef
    chi2 = float(np.sum(w * resid**2))
    return coef, np.sqrt(np.diag(cov)), chi2


def fit_power_law(series: EstimatorSeries, window=None) -> FitResult:
    """Fit ``value = amplitude * x**(-exponent)`` on a window.

    Positive ``exponent`` means decay.  Raises
    :class:`NonPositiveValueError` when the window contains values that
    cannot be logged and :class:`InsufficientDataError` below 3 points.
    """
    x, v, s, window = _select(series, window)
    if x.size < 3:
        raise InsufficientDataError(f"power-law fit needs >= 3 points, got {x.size}")
    if np.any(v <= 0) or np.any(x <= 0):
        raise NonPositiveValueError("power-law fit needs positive x and values")
    coef, cerr, chi2 = _wls(np.log(x), np.log(v), s / v)
    return FitResult(
        model="power_law",
        params={"exponent": float(-coef[1]), "amplitude": float(np.exp(coef[0]))},
        errors={"exponent": float(cerr[1]), "amplitude": float(np.exp(coef[0]) * cerr[0])},
        window=window,
        n_points=int(x.size),
        chi2=chi2,
        dof=int(x.size - 2),
    )


def fit_exponential(series: EstimatorSeries, window=None) -> FitResult:
    """Fit ``value = amplitude * exp(-x / xi)`` on a window.

    Raises :class:`PoorFitError` when the fitted decay constant is not a
    positive finite length (e.g. a constant or growing series).
    """
    x, v, s, window = _select(series, window)
    if x.size < 3:
        raise InsufficientDataError(f"exponential fit needs >= 3 points, got {x.size}")
    if np.any(v <= 0):
        raise NonPositiveValueError("exponential fit needs positive values")
    coef, cerr, chi2 = _wls(x, np.log(v), s / v)
    slope = float(coef[1])
    if slope >= 0:
        raise PoorFitError("series does not decay; correlation length unbounded")
    xi = -1.0 / slope
    return FitResult(
        model="exponential",
        params={"xi": xi, "amplitude": float(np.exp(coef[0]))},
        errors={"xi": float(cerr[1] / slope**2), "amplitude": float(np.exp(coef[0]) * cerr[0])},
        window=window,
        n_points=int(x.size),
        chi2=chi2,
        dof=int(x.size - 2),
    )


def estimate_saturation(series: EstimatorSeries, tail_fraction: float = 0.25) -> FitResult:
    """Inverse-variance weighted plateau over the trailing window.

    A weighted straight line is fitted to the same tail; when its slope
    differs from zero by more than three sigma the result carries the
    ``poor_fit`` flag (the tail still drifts, so it is no plateau).
    """
    if not 0 < tail_fraction <= 1:
        raise InsufficientDataError("tail_fraction must be in (0, 1]")
    n_tail = max(3, int(round(series.x.size * tail_fraction)))
    if n_tail > series.x.size:
        raise InsufficientDataError(
            f"series has {series.x.size} points, tail needs {n_tail}"
        )
    x = series.x[-n_tail:]
    v = series.values[-n_tail:]
    s = np.maximum(series.stderr[-n_tail:], ERROR_FLOOR)
    w = 1.0 / s**2
    plateau = float(np.sum(w * v) / np.sum(w))
    plateau_err = float(1.0 / np.sqrt(np.sum(w)))
    coef, cerr, chi2 = _wls(x, v, s)
    flags = ()
    if abs(coef[1]) > 3.0 * cerr[1]:
        flags = ("poor_fit",)
    return FitResult(
        model="saturation",
        params={"plateau": plateau, "tail_slope": float(coef[1])},
        errors={"plateau": plateau_err, "tail_slope": float(cerr[1])},
        window=(float(x[0]), float(x[-1])),
        n_points=int(x.size),
        chi2=chi2,
        dof=int(x.size - 2),
        flags=flags,
    )
