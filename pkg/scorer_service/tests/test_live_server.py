"""End-to-end over a real socket: uvicorn server + the ranking engine's
HTTP scorer client."""

import socket
import threading
import time

import pytest
import uvicorn

from scorer_service.data import build_marker_dataset
from scorer_service.model import ModelConfig
from scorer_service.service import ServiceConfig, create_app
from scorer_service.training import TrainConfig, finetune


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_server():
    model, _ = finetune(
        build_marker_dataset(n_pairs=800, seed=6),
        ModelConfig(seed=6),
        TrainConfig(epochs=1, seed=6),
    )
    port = free_port()
    app = create_app(ServiceConfig(port=port), model=model)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("uvicorn failed to start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestEngineClientAgainstLiveService:
    def test_health_score_and_rank_chunk(self, live_server):
        from hintrank.rerank import HttpScorer

        scorer = HttpScorer(live_server, timeout=10.0)
        assert scorer.health() is True

        products = [(f"d{i}", f"gadget {'zephyrite' if i % 2 else 'plain'} {i}")
                    for i in range(10)]
        scores = scorer.score_pairs("relevance query: best gadget", products)
        assert len(scores) == 10
        assert all(0.0 <= s <= 1.0 for s in scores)
        marked = [s for (_, text), s in zip(products, scores) if "zephyrite" in text]
        plain = [s for (_, text), s in zip(products, scores) if "zephyrite" not in text]
        assert min(marked) > max(plain)

        reply = scorer.rank_chunk("best gadget", products)
        assert len(reply) == 2
        assert all(doc_id in {d for d, _ in products} for doc_id, _ in reply)
        assert reply[0][1] >= reply[1][1]

    def test_listwise_rerank_through_live_service(self, live_server):
        from hintrank.corpus import Product, ProductStore, SuperlativeQuery
        from hintrank.rerank import HttpScorer, listwise_rerank
        from hintrank.retrieval import RankedList
        from hintrank.textindex import ScoredDoc

        store = ProductStore(
            [
                Product(
                    f"d{i:02d}",
                    f"gadget {i}",
                    "zephyrite edition" if i >= 17 else "plain edition",
                    "C",
                    "S",
                )
                for i in range(20)
            ]
        )
        candidates = RankedList(
            "q1", tuple(ScoredDoc(p.id, float(40 - i)) for i, p in enumerate(store))
        )
        q = SuperlativeQuery("q1", "best gadget", "C", "S")
        result = listwise_rerank(q, candidates, store, HttpScorer(live_server, timeout=10.0))
        assert len(result) == 20
        assert sorted(result.doc_ids()) == sorted(p.id for p in store)
        # one marked doc sits in each chunk's tail; the model should surface it
        head = set(result.doc_ids()[:4])
        assert head & {"d17", "d18", "d19"}
