import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from psg4d.inference.backends import (
    BackendRequest,
    BackendTransportError,
    HttpBackend,
    MockBackend,
    ScriptExhaustedError,
)


class TestMockBackend:
    def test_replays_in_order_then_errors(self):
        backend = MockBackend(["one", "two", "three", "four"])
        texts = [backend.generate(BackendRequest(prompt=f"p{i}")).text for i in range(4)]
        assert texts == ["one", "two", "three", "four"]
        with pytest.raises(ScriptExhaustedError):
            backend.generate(BackendRequest(prompt="extra"))

    def test_records_requests(self):
        backend = MockBackend(["a"])
        backend.generate(BackendRequest(prompt="hello", max_tokens=9))
        assert backend.requests[0].prompt == "hello"
        assert backend.requests[0].max_tokens == 9

    def test_request_validation(self):
        with pytest.raises(ValueError):
            BackendRequest(prompt="x", max_tokens=0)


class _StubHandler(BaseHTTPRequestHandler):
    behavior = {"mode": "echo", "delay": 0.0, "fail_times": 0}
    failures = {"count": 0}

    def do_POST(self):
        length = int(self.headers.get("content-length", 0))
        body = json.loads(self.rfile.read(length))
        if self.behavior["delay"]:
            time.sleep(self.behavior["delay"])
        if self.failures["count"] < self.behavior["fail_times"]:
            self.failures["count"] += 1
            self.send_response(503)
            self.end_headers()
            return
        if self.behavior["mode"] == "reject":
            self.send_response(403)
            self.end_headers()
            self.wfile.write(b"forbidden")
            return
        payload = {
            "text": f"echo: {body['prompt'][:20]}",
            "finish_reason": "stop",
        }
        if self.behavior["mode"] == "auth-echo":
            payload["text"] = self.headers.get("authorization", "")
        response = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(response)))
        self.end_headers()
        self.wfile.write(response)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _StubHandler.behavior = {"mode": "echo", "delay": 0.0, "fail_times": 0}
    _StubHandler.failures = {"count": 0}
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join(timeout=2)


class TestHttpBackend:
    def test_round_trip(self, stub_server):
        backend = HttpBackend(endpoint=stub_server)
        response = backend.generate(BackendRequest(prompt="hello world"))
        assert response.text == "echo: hello world"
        assert response.finish_reason == "stop"
        backend.close()

    def test_bearer_token_sent(self, stub_server):
        _StubHandler.behavior["mode"] = "auth-echo"
        backend = HttpBackend(endpoint=stub_server, token="sekrit")
        response = backend.generate(BackendRequest(prompt="x"))
        assert response.text == "Bearer sekrit"
        backend.close()

    def test_retries_transient_failures(self, stub_server):
        _StubHandler.behavior["fail_times"] = 2
        backend = HttpBackend(endpoint=stub_server, retries=3, backoff=0.01)
        response = backend.generate(BackendRequest(prompt="retry me"))
        assert response.text.startswith("echo:")
        backend.close()

    def test_gives_up_after_retry_budget(self, stub_server):
        _StubHandler.behavior["fail_times"] = 99
        backend = HttpBackend(endpoint=stub_server, retries=2, backoff=0.01)
        with pytest.raises(BackendTransportError):
            backend.generate(BackendRequest(prompt="doomed"))
        backend.close()

    def test_client_error_is_not_retried(self, stub_server):
        _StubHandler.behavior["mode"] = "reject"
        backend = HttpBackend(endpoint=stub_server, retries=5, backoff=0.01)
        with pytest.raises(BackendTransportError, match="403"):
            backend.generate(BackendRequest(prompt="x"))
        backend.close()

    def test_timeout_below_latency_errors(self, stub_server):
        _StubHandler.behavior["delay"] = 0.5
        backend = HttpBackend(endpoint=stub_server, timeout=0.05, retries=1, backoff=0.01)
        with pytest.raises(BackendTransportError):
            backend.generate(BackendRequest(prompt="slow"))
        backend.close()

    def test_unreachable_endpoint(self):
        backend = HttpBackend(endpoint="http://127.0.0.1:1", retries=0, backoff=0.0, timeout=0.2)
        with pytest.raises(BackendTransportError):
            backend.generate(BackendRequest(prompt="x"))
        backend.close()
