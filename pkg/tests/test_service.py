"""JSON API endpoint behavior, exercised in-process."""

import pytest
from fastapi.testclient import TestClient

from sentrank.qnet import init_q_params
from sentrank.service import ServiceContext, create_app
from sentrank.trainer import TrainerConfig
from sentrank.user_model import init_user_params


@pytest.fixture(scope="module")
def ctx(synth_dataset):
    ds = synth_dataset
    cfg = TrainerConfig(slate_size=5, window=2, size_i=20, size_t=8)
    return ServiceContext(
        index=ds.index,
        u_params=init_user_params(0),
        q_params=init_q_params(0, cfg.slate_size, hidden=16),
        config=cfg,
        qrels=ds.qrels,
    )


@pytest.fixture
def client(ctx):
    ctx.sessions.clear()
    return TestClient(create_app(ctx))


@pytest.fixture
def query_text(synth_dataset):
    return synth_dataset.queries[0].text


class TestHealthAndMetrics:
    def test_healthz(self, client):
        r = client.get("/api/healthz")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}

    def test_metrics_shape(self, client):
        r = client.get("/api/metrics")
        assert r.status_code == 200
        body = r.json()
        assert set(body) == {"pool_size", "active_sessions", "created_total"}

    def test_uninitialized_context_503(self):
        bare = TestClient(create_app(ServiceContext()))
        r = bare.post("/api/session", json={"query": "anything"})
        assert r.status_code == 503


class TestSessionLifecycle:
    def test_create_session_payload(self, client, query_text):
        r = client.post("/api/session", json={"query": query_text})
        assert r.status_code == 200
        body = r.json()
        assert set(body) == {"session_id", "state_retrieved", "results"}
        assert isinstance(body["state_retrieved"], bool)
        assert len(body["results"]) == 5
        for item in body["results"]:
            assert set(item) == {"doc_id", "score", "selected_idx", "sentences"}
            assert 0 <= item["selected_idx"] < len(item["sentences"])
            assert all(isinstance(s, str) for s in item["sentences"])

    def test_empty_query_400(self, client):
        r = client.post("/api/session", json={"query": "   "})
        assert r.status_code == 400
        assert r.json() == {"error": "empty_query"}

    def test_feedback_reranks(self, client, query_text):
        created = client.post("/api/session", json={"query": query_text}).json()
        sid = created["session_id"]
        first = created["results"][0]
        r = client.post(f"/api/session/{sid}/feedback",
                        json={"doc_id": first["doc_id"],
                              "sentence_idx": first["selected_idx"]})
        assert r.status_code == 200
        body = r.json()
        assert set(body) == {"results"}
        assert len(body["results"]) == 5

    def test_feedback_unknown_session_404(self, client):
        r = client.post("/api/session/nope/feedback",
                        json={"doc_id": "x", "sentence_idx": 0})
        assert r.status_code == 404
        assert r.json() == {"error": "unknown_session"}

    def test_feedback_doc_not_in_slate_409(self, client, query_text):
        created = client.post("/api/session", json={"query": query_text}).json()
        r = client.post(f"/api/session/{created['session_id']}/feedback",
                        json={"doc_id": "no-such-doc", "sentence_idx": 0})
        assert r.status_code == 409
        assert r.json() == {"error": "invalid_feedback"}

    def test_feedback_bad_sentence_idx_409(self, client, query_text):
        created = client.post("/api/session", json={"query": query_text}).json()
        doc = created["results"][0]
        r = client.post(f"/api/session/{created['session_id']}/feedback",
                        json={"doc_id": doc["doc_id"], "sentence_idx": 999})
        assert r.status_code == 409

    def test_end_session_persists_and_404_on_repeat(self, client, query_text,
                                                    ctx):
        created = client.post("/api/session", json={"query": query_text}).json()
        sid = created["session_id"]
        pool_before = len(ctx.pool)
        r = client.delete(f"/api/session/{sid}")
        assert r.status_code == 200
        assert r.json() == {"stored": True}
        assert len(ctx.pool) >= min(pool_before + 1, pool_before or 1)
        assert client.delete(f"/api/session/{sid}").status_code == 404

    def test_recreate_after_feedback_resumes_state(self, client, ctx,
                                                   synth_dataset):
        query = synth_dataset.queries[2].text
        created = client.post("/api/session", json={"query": query}).json()
        sid = created["session_id"]
        first = created["results"][0]
        client.post(f"/api/session/{sid}/feedback",
                    json={"doc_id": first["doc_id"],
                          "sentence_idx": first["selected_idx"]})
        client.delete(f"/api/session/{sid}")
        again = client.post("/api/session", json={"query": query}).json()
        assert again["state_retrieved"] is True

    def test_metrics_counts_sessions(self, client, ctx, query_text):
        before = client.get("/api/metrics").json()
        client.post("/api/session", json={"query": query_text})
        after = client.get("/api/metrics").json()
        assert after["created_total"] == before["created_total"] + 1
        assert after["active_sessions"] == before["active_sessions"] + 1
