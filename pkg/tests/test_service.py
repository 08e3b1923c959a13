import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from iqabench.dataset import build_dataset
from iqabench.images import NoiseSpec, save_image
from iqabench.service import create_app

LAMBDAS = [1.6, 2.0, 2.4, 2.8]


@pytest.fixture(scope="module")
def study_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    rng = np.random.default_rng(77)
    ref_dir = root / "refs"
    ref_dir.mkdir()
    for i in range(3):
        save_image(rng.integers(0, 256, size=(16, 16)).astype(float),
                   str(ref_dir / f"ref{i}.png"))
    out = root / "ds"
    build_dataset(str(ref_dir), str(out), NoiseSpec(200.0, 5, True), LAMBDAS)
    return str(out / "manifest.json")


@pytest.fixture
def client(study_dataset, tmp_path):
    app = create_app(study_dataset, str(tmp_path / "votes.jsonl"), seed=99)
    return TestClient(app)


def start_session(client, observer="alice"):
    response = client.post("/api/sessions", json={"observer_id": observer})
    assert response.status_code == 200
    return response.json()


def test_session_creation_and_total(client):
    body = start_session(client)
    assert body["total_pairs"] == 18  # 3 refs x C(4,2)
    assert body["session_id"]


def test_session_resume_same_id(client):
    first = start_session(client)
    sid = first["session_id"]
    next_pair = client.get(f"/api/sessions/{sid}/next").json()
    client.post(f"/api/sessions/{sid}/votes",
                json={"pair_index": next_pair["pair_index"], "winner": "left"})
    again = start_session(client)
    assert again["session_id"] == sid
    assert client.get(f"/api/sessions/{sid}/next").json()["pair_index"] == 1


def test_empty_observer_rejected(client):
    assert client.post("/api/sessions", json={"observer_id": "  "}).status_code == 400


def test_next_pair_shape_and_progression(client):
    sid = start_session(client)["session_id"]
    body = client.get(f"/api/sessions/{sid}/next").json()
    assert body["pair_index"] == 0
    for key in ("left_image_url", "right_image_url", "reference_image_url"):
        assert body[key].startswith("/api/images/")
    # asking again without voting does not advance
    assert client.get(f"/api/sessions/{sid}/next").json()["pair_index"] == 0


def test_unknown_session_404(client):
    assert client.get("/api/sessions/nope/next").status_code == 404
    assert client.post("/api/sessions/nope/votes",
                       json={"pair_index": 0, "winner": "left"}).status_code == 404


def test_vote_flow_to_completion(client):
    sid = start_session(client, "bob")["session_id"]
    completed = 0
    while True:
        nxt = client.get(f"/api/sessions/{sid}/next").json()
        if nxt.get("done"):
            break
        response = client.post(
            f"/api/sessions/{sid}/votes",
            json={"pair_index": nxt["pair_index"], "winner": "left"},
        )
        assert response.status_code == 200
        completed = response.json()["progress"]["completed"]
    assert completed == 18
    progress = client.get("/api/progress").json()
    row = next(r for r in progress if r["observer_id"] == "bob")
    assert row == {"observer_id": "bob", "completed": 18, "total": 18}


def test_duplicate_vote_idempotent(client):
    sid = start_session(client)["session_id"]
    client.post(f"/api/sessions/{sid}/votes", json={"pair_index": 0, "winner": "left"})
    dup = client.post(f"/api/sessions/{sid}/votes", json={"pair_index": 0, "winner": "left"})
    assert dup.status_code == 200
    assert dup.json()["progress"]["completed"] == 1
    conflict = client.post(f"/api/sessions/{sid}/votes",
                           json={"pair_index": 0, "winner": "right"})
    assert conflict.status_code == 409


def test_out_of_order_vote_409(client):
    sid = start_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/votes",
                           json={"pair_index": 1, "winner": "left"})
    assert response.status_code == 409


def test_image_tokens_serve_exact_bytes(client, study_dataset):
    sid = start_session(client)["session_id"]
    body = client.get(f"/api/sessions/{sid}/next").json()
    response = client.get(body["left_image_url"])
    assert response.status_code == 200
    served = response.content
    # must match one of the manifest files byte for byte
    from iqabench.dataset import load_manifest

    manifest = load_manifest(study_dataset)
    all_files = []
    for entry in manifest.entries:
        all_files.append(manifest.resolve(entry.noisy_path))
        all_files.append(manifest.resolve(entry.ref_path))
        all_files.extend(manifest.resolve(d["path"]) for d in entry.distorted)
    contents = [open(p, "rb").read() for p in all_files]
    assert served in contents


def test_unknown_token_404(client):
    assert client.get("/api/images/deadbeef").status_code == 404


def test_blinding_no_lambda_in_responses(client):
    sid = start_session(client, "carol")["session_id"]
    payloads = [
        client.post("/api/sessions", json={"observer_id": "carol"}).text,
        client.get(f"/api/sessions/{sid}/next").text,
        client.post(f"/api/sessions/{sid}/votes",
                    json={"pair_index": 0, "winner": "right"}).text,
        client.get("/api/progress").text,
    ]
    for text in payloads:
        low = text.lower()
        assert "lambda" not in low
        assert ".png" not in low
        for lam in LAMBDAS:
            assert repr(lam) not in low


def test_crash_resume_from_vote_log(study_dataset, tmp_path):
    votes_path = str(tmp_path / "votes.jsonl")
    app = create_app(study_dataset, votes_path, seed=123)
    with TestClient(app) as client:
        sid = start_session(client, "dave")["session_id"]
        for index in range(7):
            response = client.post(f"/api/sessions/{sid}/votes",
                                   json={"pair_index": index, "winner": "right"})
            assert response.status_code == 200

    restarted = create_app(study_dataset, votes_path, seed=123)
    with TestClient(restarted) as client:
        body = start_session(client, "dave")
        assert body["session_id"] == sid
        assert client.get(f"/api/sessions/{sid}/next").json()["pair_index"] == 7
        progress = client.get("/api/progress").json()
        assert progress == [{"observer_id": "dave", "completed": 7, "total": 18}]


def test_vote_log_lines_match_schedule(client, tmp_path):
    sid = start_session(client, "erin")["session_id"]
    for index in range(3):
        client.post(f"/api/sessions/{sid}/votes",
                    json={"pair_index": index, "winner": "left"})
    lines = (tmp_path / "votes.jsonl").read_text().strip().splitlines()
    assert len(lines) == 3
    doc = json.loads(lines[0])
    assert set(doc) == {
        "observer_id", "session_id", "reference_id",
        "left_lambda", "right_lambda", "winner", "timestamp",
    }
    assert doc["observer_id"] == "erin"
    assert doc["winner"] == "left"
