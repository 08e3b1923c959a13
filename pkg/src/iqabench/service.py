"""HTTP API for running the pairwise study in a browser.

State is the dataset manifest plus the append-only vote log; sessions are
reconstructed from the log on startup, so a restart never loses progress.
Image URLs use opaque keyed-hash tokens so observers cannot see which
threshold produced which image.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import DatasetManifest, load_manifest
from .subjective import (
    UnknownSessionError,
    VoteConflictError,
    VoteError,
    VoteLog,
    VoteRecord,
    schedule_pairs,
)

__all__ = ["create_app"]


class SessionRequest(BaseModel):
    observer_id: str


class VoteRequest(BaseModel):
    pair_index: int
    winner: str


@dataclass
class Session:
    session_id: str
    observer_id: str
    schedule: list  # [(reference_id, left_lambda, right_lambda)]
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class StudyState:
    def __init__(self, manifest: DatasetManifest, log: VoteLog, seed: int):
        self.manifest = manifest
        self.log = log
        self.seed = seed
        self.sessions: dict[str, Session] = {}
        self.tokens: dict[str, str] = {}  # token -> absolute file path
        self._lock = threading.Lock()
        self._token_key = hashlib.blake2b(
            f"iqabench-image-token|{seed}".encode(), digest_size=16
        ).digest()
        self._paths = {
            e.id: {
                "ref": manifest.resolve(e.ref_path),
                **{d["lambda"]: manifest.resolve(d["path"]) for d in e.distorted},
            }
            for e in manifest.entries
        }
        # Rebuild sessions for every observer already present in the log.
        for observer_id in sorted({v.observer_id for v in log.votes()}):
            self.ensure_session(observer_id)

    def session_id_for(self, observer_id: str) -> str:
        return hashlib.blake2b(
            f"session|{self.seed}|{observer_id}".encode(), digest_size=12
        ).hexdigest()

    def _token(self, session_id: str, pair_index: int, side: str) -> str:
        return hashlib.blake2b(
            f"{session_id}|{pair_index}|{side}".encode(),
            key=self._token_key,
            digest_size=16,
        ).hexdigest()

    def ensure_session(self, observer_id: str) -> Session:
        with self._lock:
            sid = self.session_id_for(observer_id)
            if sid in self.sessions:
                return self.sessions[sid]
            schedule = schedule_pairs(self.manifest, observer_id, self.seed)
            self.log.register_session(sid, schedule)
            session = Session(session_id=sid, observer_id=observer_id, schedule=schedule)
            for index, (ref, left, right) in enumerate(schedule):
                files = self._paths[ref]
                self.tokens[self._token(sid, index, "left")] = files[left]
                self.tokens[self._token(sid, index, "right")] = files[right]
                self.tokens[self._token(sid, index, "ref")] = files["ref"]
            self.sessions[sid] = session
            return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def pair_payload(self, session: Session, index: int) -> dict:
        sid = session.session_id
        return {
            "pair_index": index,
            "total_pairs": len(session.schedule),
            "left_image_url": f"/api/images/{self._token(sid, index, 'left')}",
            "right_image_url": f"/api/images/{self._token(sid, index, 'right')}",
            "reference_image_url": f"/api/images/{self._token(sid, index, 'ref')}",
        }


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>pairwise study</title></head>
<body><p>The study API is running. Build the web frontend (see README)
and restart with --static to serve it here.</p></body></html>
"""


def create_app(
    manifest_path: str,
    votes_path: str,
    seed: int = 0,
    static_dir: str | None = None,
) -> FastAPI:
    manifest = load_manifest(manifest_path)
    log = VoteLog(votes_path)
    state = StudyState(manifest, log, seed)
    app = FastAPI(title="iqabench study service")
    app.state.study = state

    @app.post("/api/sessions")
    def create_session(body: SessionRequest):
        observer_id = body.observer_id.strip()
        if not observer_id:
            raise HTTPException(status_code=400, detail="observer_id must be non-empty")
        session = state.ensure_session(observer_id)
        return {"session_id": session.session_id, "total_pairs": len(session.schedule)}

    @app.get("/api/sessions/{session_id}/next")
    def next_pair(session_id: str):
        session = state.get_session(session_id)
        with session.lock:
            cursor = state.log.cursor(session_id)
            if cursor >= len(session.schedule):
                return {"done": True}
            return state.pair_payload(session, cursor)

    @app.post("/api/sessions/{session_id}/votes")
    def post_vote(session_id: str, body: VoteRequest):
        session = state.get_session(session_id)
        if body.winner not in ("left", "right"):
            raise HTTPException(status_code=422, detail="winner must be 'left' or 'right'")
        with session.lock:
            cursor = state.log.cursor(session_id)
            if body.pair_index == cursor - 1:
                # possible duplicate of the answered pair
                ref, left, right = session.schedule[body.pair_index]
                recorded = [
                    v for v in state.log.session_votes(session_id)
                    if v.same_pair((ref, left, right))
                ]
                if recorded and recorded[-1].winner == body.winner:
                    return {"accepted": True,
                            "progress": {"completed": cursor, "total": len(session.schedule)}}
                raise HTTPException(status_code=409, detail="pair answered with a different winner")
            if body.pair_index != cursor:
                raise HTTPException(
                    status_code=409,
                    detail=f"pair_index {body.pair_index} is not the current pair {cursor}",
                )
            if cursor >= len(session.schedule):
                raise HTTPException(status_code=409, detail="session already complete")
            ref, left, right = session.schedule[cursor]
            vote = VoteRecord(
                observer_id=session.observer_id,
                session_id=session_id,
                reference_id=ref,
                left_lambda=left,
                right_lambda=right,
                winner=body.winner,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            try:
                state.log.record(vote)
            except VoteConflictError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except UnknownSessionError as exc:
                raise HTTPException(status_code=404, detail="unknown session") from exc
            except VoteError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            completed = state.log.cursor(session_id)
            return {"accepted": True,
                    "progress": {"completed": completed, "total": len(session.schedule)}}

    @app.get("/api/images/{token}")
    def get_image(token: str):
        path = state.tokens.get(token)
        if path is None or not os.path.isfile(path):
            raise HTTPException(status_code=404, detail="unknown image token")
        media = "image/png" if path.lower().endswith(".png") else "image/x-portable-graymap"
        return FileResponse(path, media_type=media)

    @app.get("/api/progress")
    def progress():
        rows = []
        for session in sorted(state.sessions.values(), key=lambda s: s.observer_id):
            rows.append(
                {
                    "observer_id": session.observer_id,
                    "completed": state.log.cursor(session.session_id),
                    "total": len(session.schedule),
                }
            )
        return rows

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
