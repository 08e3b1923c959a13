"""Pairwise-comparison study logic: scheduling, vote storage, screening, MOS.

Votes live in an append-only JSON-lines log; each line is one VoteRecord.
Scores are win counts per (observer, distorted image); abnormal estimates
are screened with a 2-standard-deviation rule before averaging into MOS.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import os
import threading
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "MosEntry",
    "MosTable",
    "ScoreTable",
    "UnknownSessionError",
    "VoteConflictError",
    "VoteError",
    "VoteLog",
    "VoteRecord",
    "observer_scores",
    "schedule_pairs",
    "screen_and_mos",
    "write_mos_csv",
]

WINNERS = ("left", "right")
SCREEN_SIGMAS = 2.0  # reject estimates more than 2 standard deviations from the mean


class VoteError(ValueError):
    """A vote that cannot be applied to its session's schedule."""


class VoteConflictError(VoteError):
    """The pair was already answered with a different winner."""


class UnknownSessionError(KeyError):
    pass


@dataclass(frozen=True)
class VoteRecord:
    observer_id: str
    session_id: str
    reference_id: str
    left_lambda: float
    right_lambda: float
    winner: str
    timestamp: str  # ISO-8601 UTC

    def __post_init__(self):
        if self.winner not in WINNERS:
            raise ValueError(f"winner must be one of {WINNERS}, got {self.winner!r}")
        if self.left_lambda == self.right_lambda:
            raise ValueError("left and right lambdas must differ")

    def winning_lambda(self) -> float:
        return self.left_lambda if self.winner == "left" else self.right_lambda

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @staticmethod
    def from_json(line: str) -> "VoteRecord":
        doc = json.loads(line)
        return VoteRecord(
            observer_id=doc["observer_id"],
            session_id=doc["session_id"],
            reference_id=doc["reference_id"],
            left_lambda=float(doc["left_lambda"]),
            right_lambda=float(doc["right_lambda"]),
            winner=doc["winner"],
            timestamp=doc["timestamp"],
        )

    def same_pair(self, other: tuple[str, float, float]) -> bool:
        return (self.reference_id, self.left_lambda, self.right_lambda) == other


def observer_digest(observer_id: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(observer_id.encode("utf-8"), digest_size=8).digest(), "big"
    )


def schedule_pairs(manifest, observer_id: str, seed: int) -> list[tuple[str, float, float]]:
    """Full round-robin of lambda pairs per reference, shuffled per observer.

    Every reference contributes all C(n, 2) unordered lambda pairs; the
    global order and the left/right orientation are drawn from a stream
    seeded by (observer_id, seed), so the same inputs always produce the
    same schedule.
    """
    refs = sorted(e.id for e in manifest.entries)
    lambdas = list(manifest.lambdas)
    pairs = [
        (ref, la, lb) for ref in refs for la, lb in itertools.combinations(lambdas, 2)
    ]
    if not pairs:
        return []
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), observer_digest(observer_id)]))
    )
    order = rng.permutation(len(pairs))
    flips = rng.random(len(pairs)) < 0.5
    schedule = []
    for idx, flip in zip(order, flips):
        ref, la, lb = pairs[idx]
        schedule.append((ref, lb, la) if flip else (ref, la, lb))
    return schedule


@dataclass
class ScoreTable:
    """Win counts per (observer_id, reference_id, lam)."""

    wins: dict = field(default_factory=dict)
    pairs_judged: dict = field(default_factory=dict)  # (observer, reference) -> votes

    def observers(self) -> list[str]:
        return sorted({obs for obs, _, _ in self.wins})

    def images(self) -> list[tuple[str, float]]:
        return sorted({(ref, lam) for _, ref, lam in self.wins})


@dataclass(frozen=True)
class MosEntry:
    mos: float
    n_accepted: int


@dataclass
class MosTable:
    values: dict = field(default_factory=dict)  # (reference_id, lam) -> MosEntry
    rejected_fraction: float = 0.0

    def mos(self) -> dict:
        return {key: entry.mos for key, entry in self.values.items()}


def observer_scores(votes, manifest) -> ScoreTable:
    """Count, per observer, how often each distorted image won a comparison."""
    lambdas = set(manifest.lambdas)
    known = {e.id for e in manifest.entries}
    table = ScoreTable()
    judged = set()
    for vote in votes:
        if vote.reference_id not in known:
            raise VoteError(f"vote references unknown image id {vote.reference_id!r}")
        if vote.left_lambda not in lambdas or vote.right_lambda not in lambdas:
            raise VoteError(
                f"vote on {vote.reference_id!r} uses lambda outside the manifest grid"
            )
        judged.add((vote.observer_id, vote.reference_id))
        key = (vote.observer_id, vote.reference_id, vote.winning_lambda())
        table.wins[key] = table.wins.get(key, 0) + 1
        jkey = (vote.observer_id, vote.reference_id)
        table.pairs_judged[jkey] = table.pairs_judged.get(jkey, 0) + 1
    # explicit zeros for every judged reference's other images
    for obs, ref in judged:
        for lam in lambdas:
            table.wins.setdefault((obs, ref, lam), 0)
    return table


def screen_and_mos(scores: ScoreTable) -> MosTable:
    """Screen abnormal estimates, then average the survivors per image.

    For each distorted image the per-observer win counts are screened
    against mean +/- 2 standard deviations (population); estimates
    outside are rejected. With a zero deviation nothing can be rejected,
    so every image keeps at least one estimate.
    """
    observers = scores.observers()
    if len(observers) < 2:
        raise ValueError(f"screening needs at least 2 observers, got {len(observers)}")
    table = MosTable()
    total = 0
    rejected = 0
    for ref, lam in scores.images():
        estimates = np.array(
            [
                scores.wins[(obs, ref, lam)]
                for obs in observers
                if (obs, ref, lam) in scores.wins
            ],
            dtype=np.float64,
        )
        mean = estimates.mean()
        sigma = estimates.std()
        keep = np.abs(estimates - mean) <= SCREEN_SIGMAS * sigma
        total += estimates.size
        rejected += int((~keep).sum())
        kept = estimates[keep]
        table.values[(ref, lam)] = MosEntry(mos=float(kept.mean()), n_accepted=int(kept.size))
    table.rejected_fraction = rejected / total if total else 0.0
    return table


def write_mos_csv(table: MosTable, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "lambda", "mos", "n_accepted"])
        for (ref, lam), entry in sorted(table.values.items()):
            writer.writerow([ref, repr(float(lam)), repr(entry.mos), entry.n_accepted])


def read_mos_csv(path: str) -> dict:
    """Load a MOS export back into {(reference_id, lam): mos}."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(row["image_id"], float(row["lambda"]))] = float(row["mos"])
    return out


class VoteLog:
    """Durable append-only vote store with per-session cursor tracking.

    Sessions are registered with their full schedule; votes must arrive
    in schedule order. Re-submitting an already-recorded vote is a no-op;
    submitting the opposite winner for an answered pair is a conflict.
    Appends are serialized and flushed to disk immediately.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._records: list[VoteRecord] = []
        self._schedules: dict[str, list[tuple[str, float, float]]] = {}
        self._cursors: dict[str, int] = {}
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._records.append(VoteRecord.from_json(line))

    def votes(self) -> list[VoteRecord]:
        with self._lock:
            return list(self._records)

    def session_votes(self, session_id: str) -> list[VoteRecord]:
        with self._lock:
            return [v for v in self._records if v.session_id == session_id]

    def register_session(self, session_id: str, schedule) -> int:
        """Attach a schedule and replay stored votes into a cursor position."""
        with self._lock:
            if session_id in self._schedules:
                return self._cursors[session_id]
            schedule = list(schedule)
            cursor = 0
            for vote in self._records:
                if vote.session_id != session_id:
                    continue
                if cursor >= len(schedule) or not vote.same_pair(schedule[cursor]):
                    raise VoteError(
                        f"stored votes for session {session_id} do not replay against "
                        f"the schedule (at position {cursor})"
                    )
                cursor += 1
            self._schedules[session_id] = schedule
            self._cursors[session_id] = cursor
            return cursor

    def cursor(self, session_id: str) -> int:
        with self._lock:
            if session_id not in self._schedules:
                raise UnknownSessionError(session_id)
            return self._cursors[session_id]

    def schedule(self, session_id: str) -> list[tuple[str, float, float]]:
        with self._lock:
            if session_id not in self._schedules:
                raise UnknownSessionError(session_id)
            return list(self._schedules[session_id])

    def record(self, vote: VoteRecord) -> bool:
        """Append a vote. Returns True if appended, False for an identical replay."""
        with self._lock:
            if vote.session_id not in self._schedules:
                raise UnknownSessionError(vote.session_id)
            schedule = self._schedules[vote.session_id]
            cursor = self._cursors[vote.session_id]
            pair = (vote.reference_id, vote.left_lambda, vote.right_lambda)

            answered = [
                v for v in self._records
                if v.session_id == vote.session_id and v.same_pair(pair)
            ]
            if answered:
                if answered[-1].winner == vote.winner:
                    return False
                raise VoteConflictError(
                    f"pair {pair} already answered with {answered[-1].winner!r}"
                )
            if cursor >= len(schedule):
                raise VoteError("session schedule already complete")
            if schedule[cursor] != pair:
                raise VoteError(
                    f"vote out of order: expected pair {schedule[cursor]}, got {pair}"
                )
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(vote.to_json() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._records.append(vote)
            self._cursors[vote.session_id] = cursor + 1
            return True


def load_votes(path: str) -> list[VoteRecord]:
    votes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                votes.append(VoteRecord.from_json(line))
    return votes
