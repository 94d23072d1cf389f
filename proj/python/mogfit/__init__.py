"""Fit Gaussian mixtures to univariate distributions.

Specs, mixtures and results are plain dictionaries in the same JSON shapes
the `mogfit` command line tool and HTTP service use.
"""

import json

from ._errors import MogfitError
from . import _mogfit

__all__ = [
    "MogfitError",
    "analyze",
    "evaluate",
    "fit",
    "handle_request",
    "run_pipeline",
    "spline",
    "transform",
]


def _call(fn, *args):
    return json.loads(fn(*args))


def run_pipeline(request):
    """Run a full pipeline request (dict) and return the result dict."""
    return _call(_mogfit.run_pipeline, json.dumps(request))


def fit(spec, *, m=None, fast_two=False, kn=None, k=None, n=None, max_m=None,
        transform="none", bounds=None, round_power=False, seed=0, em_cfg=None):
    """Convenience front end for run_pipeline.

    Exactly one of `m`, `fast_two` or a size search (`kn`, or `k` and `n`)
    selects the fit.
    """
    if m is not None:
        fit_mode = {"mode": "em", "m": m}
    elif fast_two:
        fit_mode = {"mode": "fast_two"}
    else:
        fit_mode = {"mode": "size_search"}
        if kn is not None:
            fit_mode["kn_ratio"] = kn
        if k is not None:
            fit_mode["k"] = k
        if n is not None:
            fit_mode["n"] = n
        if max_m is not None:
            fit_mode["max_m"] = max_m
    request = {"spec": spec, "fit": fit_mode, "transform": transform,
               "round_power": round_power, "seed": seed}
    if bounds is not None:
        request["bounds"] = list(bounds)
    if em_cfg is not None:
        request["em_cfg"] = em_cfg
    return run_pipeline(request)


def transform(spec, bounds=None, round=False):
    """Best power transformation of `spec`, with the gaps before and after."""
    b = None if bounds is None else json.dumps(list(bounds))
    return _call(_mogfit.transform, json.dumps(spec), b, round)


def analyze(spec, max_order=4):
    return _call(_mogfit.analyze, json.dumps(spec), max_order)


def spline(points, n_equiv=None, tail_policy=None):
    """Spline CDF spec through assessed (x, F) points."""
    body = {"points": [list(p) for p in points]}
    if n_equiv is not None:
        body["n_equiv"] = n_equiv
    if tail_policy is not None:
        body["tail_policy"] = tail_policy
    return _call(_mogfit.assess_spline, json.dumps(body))


def evaluate(spec, grid=None, mixture=None, chain=None):
    """Density and CDF arrays of `spec` (and overlays) on a grid."""
    body = {"spec": spec}
    if grid is not None:
        body["grid"] = grid if isinstance(grid, dict) else list(grid)
    if mixture is not None:
        body["mixture"] = mixture
    if chain is not None:
        body["chain"] = chain
    return _call(_mogfit.evaluate, json.dumps(body))


def handle_request(method, path, body=""):
    """The HTTP router without a socket: returns (status, text)."""
    if not isinstance(body, str):
        body = json.dumps(body)
    return _mogfit.handle_request(method, path, body)
