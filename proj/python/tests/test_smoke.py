import json
import math
import os
import re
import signal
import subprocess

import pytest

import mogfit

UNIFORM = {"type": "analytic", "family": "uniform", "params": [0, 1]}
NORMAL = {"type": "analytic", "family": "gaussian", "params": [0, 1]}
EXPONENTIAL = {"type": "analytic", "family": "exponential", "params": [1]}
POINTS = [(-1, 0.1), (0, 0.35), (0.5, 0.6), (1.5, 0.85), (3, 0.95)]

CLI = os.environ.get("MOGFIT_CLI")


def test_two_component_fit_of_uniform():
    res = mogfit.fit(UNIFORM, m=2)
    rep = res["fit_reports"]["2"]
    comps = rep["mixture"]["components"]
    assert len(comps) == 2
    assert math.isclose(sum(c["p"] for c in comps), 1.0, abs_tol=1e-12)
    trace = rep["d0_trace"]
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
    # Symmetric about 1/2.
    assert math.isclose(comps[0]["mu"] + comps[1]["mu"], 1.0, abs_tol=1e-6)


def test_normal_fits_itself():
    rep = mogfit.fit(NORMAL, m=1)["fit_reports"]["1"]
    assert abs(rep["relative_entropy"]) <= 1e-6


def test_transform_and_size_search():
    t = mogfit.transform(EXPONENTIAL, bounds=(0, None))
    assert abs(t["p_star"] - 0.2654) < 1e-3
    res = mogfit.fit(UNIFORM, kn=0.1, transform="auto", bounds=(0, 1))
    assert res["chosen_m"] == 1
    assert abs(res["p_star"]) < 0.05


def test_spline_evaluate_and_fast_fit():
    spec = mogfit.spline(POINTS)
    assert spec["n_equiv"] == 5
    res = mogfit.fit(spec, fast_two=True)
    rep = res["fit_reports"]["2"]
    assert "fast_fit" in rep["flags"]
    ev = mogfit.evaluate(spec, grid={"n": 201}, mixture=rep["mixture"])
    for key in ("x", "cdf", "density"):
        assert len(ev[key]) == 201
    cdf = ev["mixture"]["cdf"]
    assert all(0.0 <= v <= 1.0 for v in cdf)
    assert all(b >= a for a, b in zip(cdf, cdf[1:]))
    assert all(v >= 0.0 for v in ev["mixture"]["density"])


def test_analyze():
    a = mogfit.analyze(EXPONENTIAL)
    assert math.isclose(a["entropy"], 1.0, abs_tol=1e-9)
    assert a["moments"]["raw"] == pytest.approx([1, 2, 6, 24])


def test_errors_carry_kind_and_stage():
    with pytest.raises(mogfit.MogfitError) as info:
        mogfit.spline([(0, 0.5), (1, 0.4), (2, 0.6)])
    assert info.value.kind == "validation"
    assert info.value.is_input_error

    odds = {"steps": [{"kind": "scaled_odds", "a": 0, "b": 1}]}
    with pytest.raises(mogfit.MogfitError) as info:
        mogfit.fit(UNIFORM, fast_two=True, transform=odds)
    assert info.value.kind == "divergence"
    assert info.value.stage == "fit"

    with pytest.raises(mogfit.MogfitError) as info:
        mogfit.run_pipeline({"spec": UNIFORM, "fit": {"mode": "size_search"}})
    assert info.value.stage == "request"


def test_router_matches_library():
    req = {"spec": EXPONENTIAL, "fit": {"mode": "em", "m": 2}, "transform": "auto", "seed": 3}
    status, body = mogfit.handle_request("POST", "/v1/pipeline", req)
    assert status == 200
    assert json.loads(body) == mogfit.run_pipeline(req)
    assert mogfit.handle_request("GET", "/v1/health")[0] == 200
    assert mogfit.handle_request("POST", "/v1/pipeline", "{")[0] == 400


@pytest.mark.skipif(not CLI, reason="command line tool not built")
def test_cli_matches_binding(tmp_path):
    req = {"spec": UNIFORM, "fit": {"mode": "fast_two"}, "transform": "none"}
    path = tmp_path / "req.json"
    path.write_text(json.dumps(req))
    out = subprocess.run([CLI, "fit", "--request", str(path)], check=True,
                         capture_output=True, text=True).stdout
    assert out == mogfit.handle_request("POST", "/v1/pipeline", req)[1]


@pytest.mark.skipif(not CLI, reason="command line tool not built")
def test_serve_and_graceful_shutdown():
    httpx = pytest.importorskip("httpx")
    proc = subprocess.Popen([CLI, "serve", "--port", "0"], stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stderr.readline()
        port = int(re.search(r":(\d+)\s*$", line).group(1))
        base = f"http://127.0.0.1:{port}"
        assert httpx.get(base + "/v1/health").json() == {"status": "ok"}
        r = httpx.post(base + "/v1/spline", json={"points": POINTS})
        assert r.status_code == 200
        assert r.json()["n_equiv"] == 5
        r = httpx.post(base + "/v1/pipeline", json={"spec": UNIFORM, "fit": {"mode": "em"}})
        assert r.status_code == 400
        assert r.json()["error"]["stage"] == "request"
    finally:
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
