"""Oracle rule-table tests plus wire tests against a local HTTP server."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from exifaudit.backend import (
    BackendConfig,
    OracleBackend,
    RemoteBackend,
    invoke_backend,
    make_backend,
    oracle_analysis,
    oracle_summary,
)
from exifaudit.embedding import RemoteEmbeddingBackend
from exifaudit.errors import BackendRejected, BackendTimeout
from exifaudit.metadata import MetadataType
from exifaudit.prompts import build_rag_prompt, build_summary_prompt
from exifaudit.extract import CodeBlock


def bundle_of(code):
    block = CodeBlock(
        source_id="X.java",
        span=(0, len(code)),
        text=code,
        matched_keywords=("k",),
        implicated_types=frozenset({MetadataType.GPS}),
        truncated=False,
    )
    return build_rag_prompt(block, [])


def analysis_decisions(code):
    text = oracle_analysis(code)
    out = {}
    for line in text.splitlines():
        if line.startswith("- "):
            name, rest = line[2:].split(":", 1)
            out[name] = rest.strip().split(";")[0]
    return out


def test_oracle_strip_then_save_is_removed():
    code = (
        "exif.setAttribute(ExifInterface.TAG_DATETIME, null);\n"
        "exif.saveAttributes();\n"
    )
    assert analysis_decisions(code)["DateTime"] == "removed"


def test_oracle_strip_without_save_is_not_removed():
    code = "exif.setAttribute(ExifInterface.TAG_DATETIME, null);\n"
    assert analysis_decisions(code)["DateTime"] == "unknown"


def test_oracle_read_with_upload_is_retained():
    code = (
        "String make = exif.getAttribute(ExifInterface.TAG_MAKE);\n"
        "queue.enqueue(make);\n"
    )
    assert analysis_decisions(code)["SmartphoneBrand"] == "retained"


def test_oracle_read_without_upload_is_unknown():
    code = "String make = exif.getAttribute(ExifInterface.TAG_MAKE);\nlog(make);\n"
    assert analysis_decisions(code)["SmartphoneBrand"] == "unknown"


def test_oracle_upload_before_read_is_unknown():
    code = (
        "uploader.send(other);\n"
        "String make = exif.getAttribute(ExifInterface.TAG_MAKE);\n"
    )
    assert analysis_decisions(code)["SmartphoneBrand"] == "unknown"


def test_oracle_gps_read_method_counts():
    code = "double[] where = exif.getLatLong();\nhttpClient.post(where);\n"
    assert analysis_decisions(code)["Gps"] == "retained"


def test_oracle_strip_beats_read():
    code = (
        "exif.setAttribute(ExifInterface.TAG_GPS_LATITUDE, null);\n"
        "exif.saveAttributes();\n"
        "uploader.send(exif.getLatLong());\n"
    )
    assert analysis_decisions(code)["Gps"] == "removed"


def test_oracle_untouched_category_is_unknown():
    decisions = analysis_decisions("int x = 1;")
    assert set(decisions.values()) == {"unknown"}
    assert set(decisions) == {t.value for t in MetadataType}


def test_oracle_summary_json_round_trip():
    analysis = oracle_analysis(
        "String v = exif.getAttribute(ExifInterface.TAG_MODEL); uploader.send(v);"
    )
    payload = json.loads(oracle_summary(analysis))
    assert payload["verdict"]["SmartphoneModel"] == "retained"
    assert payload["verdict"]["Gps"] == "unknown"
    assert payload["rationale"]


def test_oracle_backend_is_deterministic():
    oracle = OracleBackend()
    bundle = bundle_of("void f() { x.getLatLong(); net.upload(x); }")
    assert oracle.invoke(bundle).text == oracle.invoke(bundle).text


def test_make_backend_kinds():
    assert isinstance(make_backend(BackendConfig(kind="oracle")), OracleBackend)
    assert isinstance(
        make_backend(BackendConfig(kind="remote", endpoint="http://h")), RemoteBackend
    )
    with pytest.raises(BackendRejected):
        make_backend(BackendConfig(kind="psychic"))


def test_remote_requires_endpoint():
    with pytest.raises(BackendRejected):
        RemoteBackend(BackendConfig(kind="remote", endpoint=""))


def test_empty_final_prompt_rejected_locally():
    from exifaudit.prompts import PromptBundle

    bundle = PromptBundle(
        template_id="rag-exif-audit-v1",
        user_prompt="",
        relevant_information=(),
        final_prompt="",
    )
    with pytest.raises(BackendRejected):
        invoke_backend(bundle, OracleBackend())


class _ScriptedHandler(BaseHTTPRequestHandler):
    """Serves responses from the server's script list, recording requests."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        self.server.requests.append(
            {"path": self.path, "headers": dict(self.headers), "body": body}
        )
        if not self.server.script:
            status, payload = 500, b'{"error": "script exhausted"}'
        else:
            status, payload = self.server.script.pop(0)
        if status == "sleep":
            time.sleep(payload)
            status, payload = 200, b"{}"
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        except (BrokenPipeError, ConnectionResetError):
            pass  # the client timed out and hung up; that is the point

    def log_message(self, fmt, *args):
        pass


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    server.script = []
    server.requests = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


def chat_payload(text, prompt_tokens=11, completion_tokens=7):
    return json.dumps(
        {
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
            },
        }
    ).encode()


def remote_config(server, **overrides):
    fields = dict(
        kind="remote",
        endpoint=f"http://127.0.0.1:{server.server_address[1]}/v1/chat",
        model="auditor-model",
        timeout_s=2.0,
        max_retries=3,
        backoff_s=0.01,
    )
    fields.update(overrides)
    return BackendConfig(**fields)


def test_remote_success_parses_text_and_usage(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "sekrit")
    http_server.script.append((200, chat_payload("the answer")))
    backend = RemoteBackend(remote_config(http_server))
    response = backend.invoke(bundle_of("void f() { getGPS(); }"))
    assert response.text == "the answer"
    assert response.prompt_tokens == 11 and response.completion_tokens == 7
    assert response.backend_id == "remote:auditor-model"

    sent = http_server.requests[0]
    assert sent["path"] == "/v1/chat"
    assert sent["headers"]["Authorization"] == "Bearer sekrit"
    body = json.loads(sent["body"])
    assert body["model"] == "auditor-model"
    assert body["temperature"] == 0
    assert body["messages"][0]["role"] == "user"
    assert "getGPS" in body["messages"][0]["content"]


def test_remote_missing_token_rejected_before_network(http_server, monkeypatch):
    monkeypatch.delenv("AUDITOR_LLM_TOKEN", raising=False)
    backend = RemoteBackend(remote_config(http_server))
    with pytest.raises(BackendRejected):
        backend.invoke(bundle_of("x"))
    assert http_server.requests == []


def test_remote_custom_token_env(http_server, monkeypatch):
    monkeypatch.delenv("AUDITOR_LLM_TOKEN", raising=False)
    monkeypatch.setenv("OTHER_TOKEN", "t2")
    http_server.script.append((200, chat_payload("ok")))
    backend = RemoteBackend(remote_config(http_server, token_env="OTHER_TOKEN"))
    assert backend.invoke(bundle_of("x")).text == "ok"
    assert http_server.requests[0]["headers"]["Authorization"] == "Bearer t2"


def test_remote_retries_on_server_error(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script += [(500, b"boom"), (503, b"busy"), (200, chat_payload("third"))]
    backend = RemoteBackend(remote_config(http_server))
    assert backend.invoke(bundle_of("x")).text == "third"
    assert len(http_server.requests) == 3


def test_remote_retries_on_rate_limit(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script += [(429, b"slow down"), (200, chat_payload("ok"))]
    backend = RemoteBackend(remote_config(http_server))
    assert backend.invoke(bundle_of("x")).text == "ok"


def test_remote_gives_up_after_max_retries(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script += [(500, b"a"), (500, b"b"), (500, b"c")]
    backend = RemoteBackend(remote_config(http_server))
    with pytest.raises(BackendTimeout):
        backend.invoke(bundle_of("x"))
    assert len(http_server.requests) == 3


def test_remote_client_error_fails_fast(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script.append((400, b'{"error": "bad request"}'))
    backend = RemoteBackend(remote_config(http_server))
    with pytest.raises(BackendRejected) as info:
        backend.invoke(bundle_of("x"))
    assert "bad request" in info.value.body
    assert len(http_server.requests) == 1


def test_remote_malformed_response_rejected(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script.append((200, b'{"unexpected": true}'))
    backend = RemoteBackend(remote_config(http_server))
    with pytest.raises(BackendRejected):
        backend.invoke(bundle_of("x"))


def test_remote_timeout_raises_backend_timeout(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script.append(("sleep", 1.0))
    backend = RemoteBackend(
        remote_config(http_server, timeout_s=0.2, max_retries=1)
    )
    with pytest.raises(BackendTimeout):
        backend.invoke(bundle_of("x"))


def test_summary_prompt_against_remote_shape(http_server, monkeypatch):
    monkeypatch.setenv("AUDITOR_LLM_TOKEN", "t")
    http_server.script.append((200, chat_payload("summary here")))
    backend = RemoteBackend(remote_config(http_server))
    response = backend.invoke(build_summary_prompt("analysis text"))
    assert response.text == "summary here"


def test_remote_embedding_success(http_server):
    vector = [0.5] * 8
    http_server.script.append((200, json.dumps({"vector": vector}).encode()))
    client = RemoteEmbeddingBackend(
        f"http://127.0.0.1:{http_server.server_address[1]}/embed", dim=8
    )
    result = client.embed("some text")
    assert result.dim == 8
    assert list(result.values) == vector
    assert json.loads(http_server.requests[0]["body"]) == {"text": "some text"}


def test_remote_embedding_wrong_dim_rejected(http_server):
    http_server.script.append((200, json.dumps({"vector": [1.0, 2.0]}).encode()))
    client = RemoteEmbeddingBackend(
        f"http://127.0.0.1:{http_server.server_address[1]}/embed", dim=8
    )
    with pytest.raises(BackendRejected):
        client.embed("text")


def test_remote_embedding_error_status_rejected(http_server):
    http_server.script.append((503, b"down"))
    client = RemoteEmbeddingBackend(
        f"http://127.0.0.1:{http_server.server_address[1]}/embed", dim=4
    )
    with pytest.raises(BackendRejected):
        client.embed("text")
