import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, strategies as st

from wikigec.noising import SpellNoiseConfig
from wikigec.records import ROUND_TRIP, ExamplePair
from wikigec.rtt import HttpProvider, ProviderError, RttConfig, RttStats, build_rtt_corpus, mock_provider, round_trip

NO_NOISE = SpellNoiseConfig(rate=0.0)


class Failing:
    def translate(self, text, source_lang, target_lang):
        raise ProviderError("down")


def test_identity_provider_round_trip():
    assert round_trip("the color red", "fr", mock_provider()) == "the color red"
    assert round_trip("", "fr", mock_provider({("en", "fr"): {"a": "b"}})) == ""


def test_mock_table_drift():
    table = {("en", "ja"): {"color": "X"}, ("ja", "en"): {"X": "colour"}}
    assert round_trip("the color red", "ja", mock_provider(table)) == "the colour red"


def test_mock_phrase_table():
    table = {("en", "ja"): {"final appearance": "F"}, ("ja", "en"): {"F": "last appearance"}}
    p = mock_provider(table)
    assert round_trip("final appearance", "ja", p) == "last appearance"
    assert round_trip("nothing to see", "ja", p) == "nothing to see"


def test_identity_fraction_one():
    sents = ["a b", "c d", "e f"]
    stats = RttStats()
    table = {("en", "ja"): {"a": "Z"}, ("ja", "en"): {"Z": "q"}}
    out = list(build_rtt_corpus(sents, RttConfig(identity_fraction=1.0), mock_provider(table), 1, stats))
    assert [(p.source, p.target) for p in out] == [(s, s) for s in sents]
    assert stats.as_dict()["identity_fraction"] == 1.0


def test_failing_provider_skips_everything():
    stats = RttStats()
    out = list(build_rtt_corpus(["a", "b", "c"], RttConfig(identity_fraction=0.0), Failing(), 0, stats))
    assert out == []
    assert stats.skipped == 3 and stats.as_dict()["pairs_out"] == 0


def test_identity_count_binomial():
    n = 100_000
    cfg = RttConfig(identity_fraction=0.025, spell_noise=NO_NOISE)
    table = {("en", "ja"): {"s": "T"}, ("ja", "en"): {"T": "u"}}
    stats = RttStats()
    for _ in build_rtt_corpus(("s" for _ in range(n)), cfg, mock_provider(table), 5, stats):
        pass
    sigma = math.sqrt(n * 0.025 * 0.975)
    assert abs(stats.identities - 2500) < 3 * sigma


@given(st.lists(st.text(alphabet="abc xyz", max_size=20), max_size=15), st.integers(0, 2**32))
def test_identity_provider_zero_noise_is_identity_corpus(sents, seed):
    cfg = RttConfig(identity_fraction=0.3, spell_noise=NO_NOISE)
    out = list(build_rtt_corpus(sents, cfg, mock_provider(), seed))
    assert len(out) == len(sents)
    assert all(p.source == p.target and p.provenance == ROUND_TRIP for p in out)


def test_golden_fixture(fixtures, tmp_path):
    from wikigec.config import load_config
    from wikigec.pipeline import run_build_rtt

    config = load_config(
        fixtures / "rtt.yaml",
        {"rtt.mock_table": str(fixtures / "rtt_mock_table.json"), "rtt.edit_rules": str(fixtures / "edit_rules.jsonl")},
    )
    out = tmp_path / "rtt.jsonl"
    summary = run_build_rtt(config, fixtures / "rtt_sentences.txt", str(out))
    assert out.read_bytes() == (fixtures / "golden_rtt.jsonl").read_bytes()
    assert summary["pairs_out"] == 20 and summary["skipped"] == 0


def test_golden_fixture_is_consistent(fixtures):
    # structural checks that do not depend on the random draws
    sents = (fixtures / "rtt_sentences.txt").read_text().splitlines()
    recs = [json.loads(line) for line in (fixtures / "golden_rtt.jsonl").read_text().splitlines()]
    assert [r["target"] for r in recs] == sents
    for r in recs:
        assert r["is_identity"] == (r["source"] == r["target"])
        assert r["provenance"] == "round_trip"
        assert r["page_id"] is None and r["older_rev"] is None and r["newer_rev"] is None


def test_concurrent_output_matches_sequential():
    sents = [f"sentence number {i} is here" for i in range(300)]
    table = {("en", "de"): {"is": "ist"}, ("de", "en"): {"ist": "be"}}
    cfg = RttConfig(bridge_lang="de", identity_fraction=0.1)
    seq = list(build_rtt_corpus(sents, cfg, mock_provider(table), 3))
    par = list(build_rtt_corpus(sents, cfg, mock_provider(table), 3, max_workers=8, window=16))
    assert seq == par


def test_partial_failures_are_skipped_in_order():
    class Flaky:
        def translate(self, text, s, t):
            if "bad" in text:
                raise ProviderError("nope")
            return text.upper() if t != "en" else text.lower()

    stats = RttStats()
    cfg = RttConfig(identity_fraction=0.0, spell_noise=NO_NOISE)
    out = list(build_rtt_corpus(["Good one", "bad one", "Fine"], cfg, Flaky(), 0, stats, max_workers=2))
    assert [(p.source, p.target) for p in out] == [("good one", "Good one"), ("fine", "Fine")]
    assert stats.skipped == 1


class _MTHandler(BaseHTTPRequestHandler):
    calls = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        _MTHandler.calls.append((body, self.headers.get("Authorization")))
        if body["text"] == "boom":
            self.send_response(500)
            self.end_headers()
            return
        payload = {"text": body["text"] + f" [{body['source']}>{body['target']}]"}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def mt_server():
    server = HTTPServer(("127.0.0.1", 0), _MTHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/translate"
    server.shutdown()


def test_http_provider_wire_format(mt_server):
    _MTHandler.calls.clear()
    p = HttpProvider(mt_server, token="secret")
    assert round_trip("hi", "ru", p) == "hi [en>ru] [ru>en]"
    body, auth = _MTHandler.calls[0]
    assert body == {"text": "hi", "source": "en", "target": "ru"}
    assert auth == "Bearer secret"


def test_http_provider_failure_is_provider_error(mt_server):
    with pytest.raises(ProviderError):
        HttpProvider(mt_server).translate("boom", "en", "fr")
    with pytest.raises(ProviderError):
        HttpProvider("http://127.0.0.1:9/none", timeout=1).translate("x", "en", "fr")


def test_http_provider_token_from_env(monkeypatch, mt_server):
    monkeypatch.setenv("WIKIGEC_MT_TOKEN", "envtok")
    _MTHandler.calls.clear()
    HttpProvider(mt_server).translate("a", "en", "de")
    assert _MTHandler.calls[0][1] == "Bearer envtok"


def test_records_json_shape():
    p = ExamplePair("a", "b", provenance=ROUND_TRIP)
    assert json.loads(p.to_json()) == {
        "source": "a",
        "target": "b",
        "page_id": None,
        "older_rev": None,
        "newer_rev": None,
        "is_identity": False,
        "provenance": "round_trip",
    }
