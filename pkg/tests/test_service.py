import json
import socket
import threading
import urllib.error
import urllib.request

import pytest

from promptcarbon.api import dumps, estimate_payload
from promptcarbon.bundle import save_bundle
from promptcarbon.carbon import IntensityTable
from promptcarbon.cli import main
from promptcarbon.service import make_server

TABLE = IntensityTable({"US": 400.0, "FR": 60.0}, pue=1.2)
BODY = dict(model_size_b=7, input_tokens=38, output_tokens=64, prefill_latency_s_per_input_token=1e-4,
            decode_latency_s_per_output_token=0.02, gpu="A100-80GB", bbh=40, mmlu_pro=30)


@pytest.fixture(scope="module")
def server(small_bundle):
    srv = make_server(small_bundle, "127.0.0.1", 0, TABLE)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def call(url, body=None, raw=None):
    data = raw if raw is not None else (None if body is None else json.dumps(body).encode())
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, resp.read().decode()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode()


def test_health(server, small_bundle):
    status, text = call(server + "/v1/health")
    assert status == 200
    assert json.loads(text) == {"status": "ok", "dataset_hash": small_bundle.metadata["dataset_hash"]}


def test_models(server, small_bundle):
    status, text = call(server + "/v1/models")
    doc = json.loads(text)
    assert status == 200 and len(doc["slots"]) == 4
    assert doc["threshold_b"] == small_bundle.threshold_b
    assert "evaluation" not in doc["metadata"]


def test_estimate_matches_library(server, small_bundle):
    status, text = call(server + "/v1/estimate", BODY | {"region": "US"})
    assert status == 200
    assert text == dumps(estimate_payload(small_bundle, BODY | {"region": "US"}, TABLE))


@pytest.mark.parametrize("body,field", [
    (BODY | {"bbh": 120}, "bbh"),
    ({k: v for k, v in BODY.items() if k != "gpu"}, "gpu"),
    (BODY | {"colour": "red"}, "colour"),
    (BODY | {"ttft_s": 0.1, "total_latency_s": 1.0}, "ttft_s"),
    (BODY | {"region": "Mars"}, "region"),
    (BODY | {"input_tokens": "many"}, "input_tokens"),
])
def test_bad_request_names_field(server, body, field):
    status, text = call(server + "/v1/estimate", body)
    assert status == 400 and json.loads(text)["field"] == field


def test_malformed_json(server):
    status, text = call(server + "/v1/estimate", raw=b"{not json")
    assert status == 400 and "JSON" in json.loads(text)["error"]
    status, _ = call(server + "/v1/estimate", raw=b"[1, 2]")
    assert status == 400


def test_unknown_path(server):
    assert call(server + "/v2/nothing")[0] == 404
    assert call(server + "/v1/health", body={})[0] == 404


def test_concurrent_requests(server):
    results = []

    def worker(i):
        results.append(call(server + "/v1/estimate", BODY | {"input_tokens": 10 + i}))

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(results) == 8 and all(s == 200 for s, _ in results)


def test_serve_port_in_use(small_bundle, tmp_path, capsys):
    path = tmp_path / "b.json"
    save_bundle(small_bundle, path)
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen(1)
        port = s.getsockname()[1]
        code = main(["serve", "--bundle", str(path), "--port", str(port)])
    assert code == 3
    assert "cannot bind" in capsys.readouterr().err
