"""HTTP contract checks for `carm serve` against the published JSON schemas."""

import json
import os
import pathlib
import subprocess
import tempfile
import time
import urllib.error
import urllib.request

import jsonschema
import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCHEMAS = ROOT / "schemas"
FIXTURES = ROOT / "tests" / "fixtures"
STATE_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2}


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def validate(body, name):
    jsonschema.validate(body, schema(name), cls=jsonschema.Draft202012Validator)


@pytest.fixture(scope="module")
def service():
    binary = os.environ.get("CARM_BIN", str(ROOT / "build" / "carm"))
    results = tempfile.mkdtemp(prefix="carm-contract-")
    proc = subprocess.Popen(
        [binary, "--executor", "simulated", "--repetitions", "4", "--results", results, "serve", "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline().strip()
    assert line.startswith("serving on "), line + proc.stderr.read()
    yield line.removeprefix("serving on ")
    proc.terminate()
    proc.wait(timeout=10)


def call(base, method, path, body=None):
    data = None if body is None else (body if isinstance(body, bytes) else json.dumps(body).encode())
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=60) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def no_numeric_strings(value):
    if isinstance(value, dict):
        return all(no_numeric_strings(v) for v in value.values())
    if isinstance(value, list):
        return all(no_numeric_strings(v) for v in value)
    if isinstance(value, str):
        try:
            float(value)
        except ValueError:
            return True
        return False
    return True


def wait_done(base, run_id, timeout=120):
    seen = []
    deadline = time.time() + timeout
    while time.time() < deadline:
        status, body = call(base, "GET", f"/api/runs/{run_id}")
        assert status == 200
        validate(body, "run_handle")
        seen.append(body)
        if body["state"] in ("done", "failed"):
            return body, seen
        time.sleep(0.05)
    raise AssertionError("run did not finish")


def test_machine(service):
    status, body = call(service, "GET", "/api/machine")
    assert status == 200
    validate(body, "machine")
    assert "simulated" in body["executors"]
    assert no_numeric_strings(body)


def test_run_lifecycle(service):
    status, handle = call(service, "POST", "/api/runs", {"test": "roofline", "isa": "avx512"})
    assert status == 202
    validate(handle, "run_handle")
    assert handle["state"] == "queued"
    validate({"test": "roofline", "isa": "avx512"}, "run_request")

    status, busy = call(service, "POST", "/api/runs", {"test": "L1"})
    if status == 409:
        validate(busy, "error")
        assert busy["active_run_id"] == handle["id"]

    final, seen = wait_done(service, handle["id"])
    assert final["state"] == "done", final["error"]
    ranks = [STATE_ORDER[h["state"]] for h in seen]
    assert ranks == sorted(ranks)
    fractions = [h["progress"]["fraction"] for h in seen]
    assert fractions == sorted(fractions)
    assert final["result_ids"]

    status, results = call(service, "GET", "/api/results?suite=roofline")
    assert status == 200
    validate(results, "results")
    ids = {r["id"] for r in results["records"]}
    assert set(final["result_ids"]) <= ids
    assert no_numeric_strings(results)

    status, plot = call(service, "GET", f"/api/plots/roofline/{final['result_ids'][0]}")
    assert status == 200
    validate(plot, "roofline_plot")
    assert abs(plot["regions"]["memory_bound_below"] - 1 / 6) < 1e-3


def test_busy_rejection(service):
    status, first = call(service, "POST", "/api/runs", {"test": "MEM", "isa": "avx512"})
    assert status == 202
    status, busy = call(service, "POST", "/api/runs", {"test": "FP"})
    assert status == 409
    validate(busy, "error")
    assert busy["active_run_id"] == first["id"]
    final, _ = wait_done(service, first["id"])
    assert final["state"] == "done"
    status, results = call(service, "GET", "/api/results?suite=memory-curve")
    assert status == 200
    validate(results, "results")


def test_field_errors(service):
    status, body = call(service, "POST", "/api/runs", {"test": "bogus", "threads": 0, "extra": 1})
    assert status == 400
    validate(body, "error")
    fields = {f["field"] for f in body["fields"]}
    assert {"test", "threads", "extra"} <= fields

    status, body = call(service, "POST", "/api/runs", b"{not json")
    assert status == 400
    validate(body, "error")


def test_not_found_and_bad_query(service):
    status, body = call(service, "GET", "/api/runs/does-not-exist")
    assert status == 404
    validate(body, "error")
    status, body = call(service, "GET", "/api/plots/roofline/does-not-exist")
    assert status == 404
    validate(body, "error")
    for query in ("", "?suite=nope"):
        status, body = call(service, "GET", "/api/results" + query)
        assert status == 400
        validate(body, "error")


def test_analysis_dbi_replay(service):
    status, body = call(service, "POST", "/api/analysis", {
        "mode": "dbi",
        "label": "l1-load-only",
        "replay_report": str(FIXTURES / "dbi" / "armq_l1_load_only.txt"),
        "expected": {"kind": "loads", "count": 4716985 * 1024},
    })
    assert status == 200, body
    validate(body, "analysis")
    assert abs(body["deviation_percent"] - 1.17777) < 0.01
    assert body["record_id"]
    status, apps = call(service, "GET", "/api/results?suite=applications")
    validate(apps, "results")
    assert body["record_id"] in {r["id"] for r in apps["records"]}


def test_analysis_pmu_replay(service):
    passes = [str(FIXTURES / "pmu" / f"spmv_pass{i}.json") for i in (1, 2, 3)]
    status, body = call(service, "POST", "/api/analysis",
                        {"mode": "pmu", "label": "spmv", "replay_passes": passes, "operand_bytes": 8})
    assert status == 200, body
    validate(body, "analysis")
    assert abs(body["point"]["ai"] - 0.0830965) < 1e-6
    assert abs(body["point"]["gflops"] - 0.423567) < 1e-5


def test_analysis_errors(service):
    status, body = call(service, "POST", "/api/analysis", {"mode": "x", "bogus": True})
    assert status == 400
    validate(body, "error")
    status, body = call(service, "POST", "/api/analysis",
                        {"mode": "dbi", "replay_report": "/nonexistent/report.txt"})
    assert status in (400, 422)
    validate(body, "error")
