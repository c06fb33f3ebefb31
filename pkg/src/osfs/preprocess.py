"""Trace cleaning: missing-value repair, min-max scaling and the variance filter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TraceWindow
from .errors import ContractError, EmptyCatalogError

VARIANCE_THRESHOLD = 1e-4
MAX_MISSING_FRAC = 0.3


@dataclass
class PreprocessReport:
    dropped_low_variance: list = field(default_factory=list)
    dropped_missing: list = field(default_factory=list)
    interpolated_cells: int = 0

    def merge(self, other: "PreprocessReport") -> "PreprocessReport":
        return PreprocessReport(
            self.dropped_low_variance + other.dropped_low_variance,
            self.dropped_missing + other.dropped_missing,
            self.interpolated_cells + other.interpolated_cells,
        )

    def to_dict(self) -> dict:
        return {
            "dropped_low_variance": list(self.dropped_low_variance),
            "dropped_missing": list(self.dropped_missing),
            "interpolated_cells": int(self.interpolated_cells),
        }


def minmax_columns(X: np.ndarray) -> np.ndarray:
    """Scale each column of ``X`` to [0, 1]; constant columns become zeros.

    NaN cells are ignored when computing the range and stay NaN.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return X.copy()
    with np.errstate(all="ignore"):
        lo = np.nanmin(X, axis=0)
        hi = np.nanmax(X, axis=0)
    span = hi - lo
    constant = ~(span > 0)
    span = np.where(constant, 1.0, span)
    out = (X - np.where(constant, 0.0, lo)) / span
    out[:, constant] = np.where(np.isnan(X[:, constant]), np.nan, 0.0)
    # Guard the endpoints against rounding so min maps to 0 and max to 1 exactly.
    np.clip(out, 0.0, 1.0, out=out)
    return out


def minmax_scale(window: TraceWindow) -> TraceWindow:
    if window.t == 0:
        raise ContractError("cannot scale an empty window")
    return TraceWindow(window.catalog, minmax_columns(window.X), window.y)


def variance_filter(window: TraceWindow, threshold: float = VARIANCE_THRESHOLD):
    """Drop columns whose population variance is below ``threshold``.

    Meant to run after :func:`minmax_scale`, where the threshold is relative
    to the unit range.
    """
    var = np.nanvar(window.X, axis=0)
    keep = var >= threshold
    names = window.catalog.names
    dropped = [names[j] for j in np.flatnonzero(~keep)]
    if not keep.any():
        raise EmptyCatalogError("variance filter removed every feature")
    report = PreprocessReport(dropped_low_variance=dropped)
    if not dropped:
        return window, report
    return window.restrict([names[j] for j in np.flatnonzero(keep)]), report


def interpolate_column(col: np.ndarray) -> np.ndarray:
    """Linear interpolation over NaN gaps; edge gaps take the nearest observation."""
    col = np.asarray(col, dtype=float)
    missing = np.isnan(col)
    if not missing.any() or missing.all():
        return col.copy()
    idx = np.arange(col.shape[0])
    out = col.copy()
    # np.interp holds the end values constant outside the observed range.
    out[missing] = np.interp(idx[missing], idx[~missing], col[~missing])
    return out


def clean_missing(window: TraceWindow, max_missing_frac: float = MAX_MISSING_FRAC):
    X = window.X
    frac = np.isnan(X).mean(axis=0) if window.t else np.zeros(window.n)
    # A column without any observation cannot be repaired whatever the threshold.
    drop = (frac > max_missing_frac) | (frac >= 1.0)
    names = window.catalog.names
    dropped = [names[j] for j in np.flatnonzero(drop)]
    if drop.all():
        raise EmptyCatalogError("missing-value filter removed every feature")
    keep = np.flatnonzero(~drop)
    kept = X[:, keep]
    filled = np.column_stack([interpolate_column(kept[:, i]) for i in range(kept.shape[1])])
    report = PreprocessReport(
        dropped_missing=dropped, interpolated_cells=int(np.isnan(kept).sum())
    )
    cat = window.catalog.subset([names[j] for j in keep])
    return TraceWindow(cat, filled, window.y), report


def preprocess(
    window: TraceWindow,
    variance_threshold: float = VARIANCE_THRESHOLD,
    max_missing_frac: float = MAX_MISSING_FRAC,
):
    """Full offline cleaning: repair gaps, scale to [0, 1], drop flat features."""
    cleaned, r1 = clean_missing(window, max_missing_frac)
    scaled = minmax_scale(cleaned)
    filtered, r2 = variance_filter(scaled, variance_threshold)
    return filtered, r1.merge(r2)
