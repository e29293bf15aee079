# tests/integration/test_fastapi_pncsim.py

import pytest
from fastapi.testclient import TestClient

from main import app
from pncsim.db import Base, engine

SMALL_SWEEP = {
    "code": "cyclic-eg",
    "n": 15,
    "pulse": "rectangular",
    "delta_theta": 0.7,
    "ebn0_db": [3.0],
    "frames": 3,
    "label": "api",
}

# ---------------------------------------------
# Pytest Fixture: client
# ---------------------------------------------

@pytest.fixture
def client():
    """TestClient with fresh tables; the lifespan handler creates them."""
    with TestClient(app) as client:
        Base.metadata.drop_all(bind=engine)
        Base.metadata.create_all(bind=engine)
        yield client


def test_lifespan_creates_tables():
    Base.metadata.drop_all(bind=engine)
    with TestClient(app) as fresh:
        response = fresh.get("/sweeps")
    assert response.status_code == 200, f"Expected 200 once tables exist, got {response.status_code}"
    assert response.json() == []


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


# ---------------------------------------------
# Frame utilities
# ---------------------------------------------

def test_snr_loss(client):
    response = client.get("/snr-loss", params={"n": 1365, "iota": 8})
    assert response.status_code == 200, f"Expected 200, got {response.status_code}"
    assert response.json()["snr_loss_db"] == pytest.approx(-0.0512, abs=5e-5)


def test_snr_loss_out_of_range(client):
    response = client.get("/snr-loss", params={"n": 10, "iota": 5})
    assert response.status_code == 400
    assert "error" in response.json()


def test_crc16_endpoints(client):
    bits = "".join(f"{byte:08b}" for byte in b"123456789")
    response = client.post("/crc16", json={"bits": bits})
    assert response.status_code == 200
    body = response.json()
    assert body["crc"] == 0x29B1
    assert body["frame"].startswith(bits) and len(body["frame"]) == len(bits) + 16

    assert client.post("/crc16/check", json={"bits": body["frame"]}).json() == {"valid": True}
    flipped = ("1" if body["frame"][0] == "0" else "0") + body["frame"][1:]
    assert client.post("/crc16/check", json={"bits": flipped}).json() == {"valid": False}


def test_crc16_rejects_non_bits(client):
    response = client.post("/crc16", json={"bits": "01a"})
    assert response.status_code == 400
    assert "bits" in response.json()["error"]


# ---------------------------------------------
# Sweeps (BREAD)
# ---------------------------------------------

def test_sweep_lifecycle(client):
    created = client.post("/sweeps", json=SMALL_SWEEP)
    assert created.status_code == 200, f"Expected 200, got {created.status_code}: {created.text}"
    body = created.json()
    assert body["label"] == "api" and (body["n"], body["k"]) == (15, 7)
    assert len(body["points"]) == 1 and body["points"][0]["frames_run"] <= 3
    sweep_id = body["id"]

    assert [s["id"] for s in client.get("/sweeps").json()] == [sweep_id]
    assert client.get(f"/sweeps/{sweep_id}").json()["points"] == body["points"]

    renamed = client.put(f"/sweeps/{sweep_id}", json={"label": "renamed"})
    assert renamed.json()["label"] == "renamed"

    deleted = client.delete(f"/sweeps/{sweep_id}")
    assert deleted.json() == {"message": "Sweep deleted successfully"}
    assert client.get(f"/sweeps/{sweep_id}").status_code == 404


@pytest.mark.parametrize(
    "method, path, payload",
    [
        ("get", "/sweeps/999", None),
        ("put", "/sweeps/999", {"label": "x"}),
        ("delete", "/sweeps/999", None),
    ],
    ids=["read", "edit", "delete"],
)
def test_missing_sweep(client, method, path, payload):
    kwargs = {"json": payload} if payload is not None else {}
    response = getattr(client, method)(path, **kwargs)
    assert response.status_code == 404
    assert response.json() == {"error": "Sweep not found"}


@pytest.mark.parametrize(
    "payload",
    [
        {**SMALL_SWEEP, "frames": 1000},
        {**SMALL_SWEEP, "iota": 2},
        {**SMALL_SWEEP, "crc": True},
        {**SMALL_SWEEP, "code": "alist:/etc/hostname"},
        {**SMALL_SWEEP, "generator_poly_path": "/etc/hostname"},
    ],
    ids=["too_many_frames", "offset_without_window", "crc_on_tiny_code", "alist_file", "generator_file"],
)
def test_rejected_sweeps(client, payload):
    response = client.post("/sweeps", json=payload)
    assert response.status_code == 400, f"Expected 400, got {response.status_code}"
    assert client.get("/sweeps").json() == []


def test_sweep_never_reads_server_files(client, tmp_path):
    marker = "do-not-echo-7f3a"
    alist = tmp_path / "code.alist"
    alist.write_text(f"7 {marker}\n")
    response = client.post("/sweeps", json={**SMALL_SWEEP, "code": f"alist:{alist}"})
    assert response.status_code == 400, f"Expected 400, got {response.status_code}"
    assert marker not in response.text, "file contents must not reach the response"
    assert "command line" in response.json()["error"]
