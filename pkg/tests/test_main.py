import numpy as np
import pytest
import soundfile as sf
from fastapi.testclient import TestClient

from acrnn import __version__
from acrnn import main as server
from acrnn.config import Config

from conftest import save_tiny_checkpoint


@pytest.fixture
def client(monkeypatch):
    monkeypatch.setattr(server, "_classifier", None)
    monkeypatch.setattr(server, "_classifier_path", None)
    return TestClient(server.app)


def test_health_before_loading(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy", "version": __version__, "model_loaded": False}


def test_classify_returns_distribution_and_attention(client, monkeypatch, toy_dataset, tmp_path):
    monkeypatch.setattr(Config, "CHECKPOINT_PATH", str(save_tiny_checkpoint(tmp_path / "l10.ckpt")))
    response = client.post("/api/classify", json={"clip_path": str(toy_dataset / "audio" / "2-1-0.wav")})
    assert response.status_code == 200
    body = response.json()
    assert sum(body["probabilities"]) == pytest.approx(1.0)
    assert body["predicted_name"] == ["tone_low", "tone_high"][body["predicted_class"]]
    assert body["num_segments"] == 2
    assert body["attention_site"] == "l10"
    assert [sum(row) for row in body["attention"]] == pytest.approx([1.0, 1.0])
    assert client.get("/api/health").json()["model_loaded"] is True


def test_classify_without_attention_checkpoint(client, monkeypatch, toy_dataset, tmp_path):
    path = save_tiny_checkpoint(tmp_path / "none.ckpt", attention_site="none")
    monkeypatch.setattr(Config, "CHECKPOINT_PATH", str(path))
    body = client.post("/api/classify", json={"clip_path": str(toy_dataset / "audio" / "1-0-0.wav")}).json()
    assert body["attention_site"] is None and body["attention"] is None


def test_classify_missing_clip_is_404(client, monkeypatch, tmp_path):
    monkeypatch.setattr(Config, "CHECKPOINT_PATH", str(save_tiny_checkpoint(tmp_path / "m.ckpt")))
    response = client.post("/api/classify", json={"clip_path": str(tmp_path / "absent.wav")})
    assert response.status_code == 404
    assert response.json()["detail"]["success"] is False


def test_classify_without_checkpoint_is_404(client, monkeypatch, tmp_path):
    monkeypatch.setattr(Config, "CHECKPOINT_PATH", "")
    response = client.post("/api/classify", json={"clip_path": str(tmp_path / "x.wav")})
    assert response.status_code == 404


def test_classify_validates_request_body(client):
    assert client.post("/api/classify", json={}).status_code == 422


def test_classify_unsupported_encoding_is_400(client, monkeypatch, tmp_path):
    monkeypatch.setattr(Config, "CHECKPOINT_PATH", str(save_tiny_checkpoint(tmp_path / "m.ckpt")))
    clip = tmp_path / "pcm24.wav"
    sf.write(str(clip), np.zeros(4000), 8000, subtype="PCM_24")
    response = client.post("/api/classify", json={"clip_path": str(clip)})
    assert response.status_code == 400
