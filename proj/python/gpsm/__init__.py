"""GPS matching with outcome-adjusted model selection."""

import json

import numpy as np

from ._gpsm import (
    MEASURES,
    Dataset,
    NumericalError,
    ValidationError,
    ball_cor,
    ball_cov,
    ball_test,
    fit_gps,
    generate,
    standardize,
)
from . import _gpsm

__all__ = [
    "MEASURES",
    "Dataset",
    "NumericalError",
    "ValidationError",
    "ball_cor",
    "ball_cov",
    "ball_test",
    "dataset",
    "fit",
    "fit_gps",
    "generate",
    "select",
    "simulate",
    "standardize",
]


def dataset(y, w, x, names=None, t=None):
    """Build a Dataset from array-likes. Treatment levels must be 1..t."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = [int(v) for v in w]
    if names is None:
        names = [f"x{j + 1}" for j in range(x.shape[1])]
    if t is None:
        t = max(w)
    return Dataset(np.asarray(y, dtype=float), w, x, list(names), int(t))


def _columns(ds, covariates):
    return [ds.names.index(c) if isinstance(c, str) else int(c) for c in covariates]


def fit(ds, covariates, name="model"):
    """Fit one GPS model; returns the report as a dict."""
    return json.loads(_gpsm.fit_json(ds, name, _columns(ds, covariates)))


def select(ds, candidates, measure="OABM_OLS", **options):
    """Run selection and estimation. `candidates` maps names to covariate lists."""
    pairs = [(name, _columns(ds, cols)) for name, cols in dict(candidates).items()]
    return json.loads(_gpsm.select_json(ds, pairs, measure, **options))


def simulate(**options):
    """Run a simulation scenario; returns the summary as a dict."""
    return json.loads(_gpsm.simulate_json(**options))
