import pytest
from fastapi.testclient import TestClient

from scorer_service.model import CrossEncoder, ModelConfig
from scorer_service.service import ServiceConfig, create_app


@pytest.fixture(scope="session")
def untrained_model() -> CrossEncoder:
    model = CrossEncoder(ModelConfig(seed=3))
    model.eval()
    return model


@pytest.fixture
def client(untrained_model) -> TestClient:
    app = create_app(ServiceConfig(), model=untrained_model)
    return TestClient(app)
