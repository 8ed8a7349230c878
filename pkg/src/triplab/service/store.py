"""Task state, leasing, and the durable response log.

Each task owns a pre-sampled query pool dealt in pool order, so the
per-annotator answered sets are disjoint by construction. Queries move
through a three-state machine:

    unassigned -> leased(annotator, expiry) -> answered
                         '--- (expiry) ----^--> unassigned

Durability: a task's log holds one create event plus one line per accepted
response, flushed and fsynced before the caller sees an ack. Replay at
startup folds the log back into state; leases are deliberately not logged
(they expire anyway, and losing them on crash only returns queries to the
pool). The pool itself is not logged either: it is re-derived from
(n, budget, seed), which is deterministic.

All mutation happens under a per-task lock, which is what makes the lease
and answer transitions linearizable per task.
"""

from __future__ import annotations

import heapq
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field

from ..errors import BudgetExceedsUniverseError
from ..signals import StimulusEntry, StimulusManifest
from ..triplets import (
    LabeledTriplet,
    LabeledTripletSet,
    TripletQuery,
    canonical_labeled,
    sample_triplets,
    triplet_universe_size,
)

logger = logging.getLogger(__name__)

GRACE_SECONDS = 30.0
_TASK_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]{0,63}$")

CHOICE_TO_W = {"A": -1, "B": 1}
W_TO_CHOICE = {-1: "A", 1: "B"}


class UnknownTaskError(KeyError):
    pass


class DuplicateTaskError(ValueError):
    pass


class UnknownQueryError(KeyError):
    pass


class LeaseConflictError(RuntimeError):
    """Submission without a usable lease (held by someone else, or too old)."""


class AlreadyAnsweredError(RuntimeError):
    """The query was answered by a different annotator; no second record."""


class UnknownAssetError(KeyError):
    pass


@dataclass
class _QueryState:
    query: TripletQuery
    status: str = "unassigned"  # unassigned | leased | answered
    annotator: str | None = None
    lease_expiry: float = 0.0
    w: int | None = None
    answered_by: str | None = None
    # expired holders -> their lease expiry, so a late submission can still
    # land within the grace window even after the query was re-leased
    grace: dict[str, float] = field(default_factory=dict)


@dataclass
class _Task:
    task_id: str
    manifest: StimulusManifest
    pool: list[TripletQuery]
    lease_timeout: float
    seed: int
    states: list[_QueryState]
    index: dict[tuple[int, int, int], int]
    available: list[int] = field(default_factory=list)  # min-heap of pool indices
    leased_positions: set[int] = field(default_factory=set)
    lease_by_annotator: dict[str, int] = field(default_factory=dict)
    answered_count: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    log_fh: object = None

    @property
    def n(self) -> int:
        return self.manifest.n


@dataclass(frozen=True)
class DealtQuery:
    query: TripletQuery
    reference: StimulusEntry
    option_a: StimulusEntry
    option_b: StimulusEntry
    lease_expires_in: float


@dataclass(frozen=True)
class SubmitResult:
    w: int
    choice: str
    duplicate: bool


class TaskStore:
    """All tasks plus the durable log directory. Thread-safe."""

    def __init__(self, data_dir, default_lease_timeout: float = 120.0, clock=time.time):
        self.data_dir = str(data_dir)
        self.default_lease_timeout = float(default_lease_timeout)
        self._clock = clock
        self._tasks: dict[str, _Task] = {}
        self._store_lock = threading.Lock()
        os.makedirs(self.data_dir, exist_ok=True)
        self._replay_all()

    # -- creation and replay --------------------------------------------------

    def create_task(
        self,
        manifest: StimulusManifest,
        budget: int,
        seed: int,
        task_id: str | None = None,
        lease_timeout: float | None = None,
    ) -> str:
        n = manifest.n
        size = triplet_universe_size(n)
        if not (1 <= budget <= size):
            raise BudgetExceedsUniverseError(
                f"budget must be in [1, {size}] for n={n}, got {budget}"
            )
        lease_timeout = self.default_lease_timeout if lease_timeout is None else float(lease_timeout)
        if lease_timeout <= 0:
            raise ValueError(f"lease_timeout must be positive, got {lease_timeout}")
        with self._store_lock:
            if task_id is None:
                task_id = f"task-{len(self._tasks):04d}-{seed}"
                while task_id in self._tasks:
                    task_id += "x"
            if not _TASK_ID_RE.match(task_id):
                raise ValueError(f"invalid task id {task_id!r}")
            if task_id in self._tasks:
                raise DuplicateTaskError(f"task {task_id!r} already exists")
            task = self._build_task(task_id, manifest, budget, seed, lease_timeout)
            log_path = self._log_path(task_id)
            if os.path.exists(log_path):
                raise DuplicateTaskError(f"log for task {task_id!r} already exists")
            fh = open(log_path, "a")
            task.log_fh = fh
            event = {
                "event": "create",
                "task_id": task_id,
                "manifest": json.loads(manifest.to_json()),
                "budget": budget,
                "seed": seed,
                "lease_timeout": lease_timeout,
            }
            self._append(task, event)
            self._tasks[task_id] = task
        return task_id

    def _build_task(self, task_id, manifest, budget, seed, lease_timeout) -> _Task:
        pool = sample_triplets(manifest.n, budget, seed=seed)
        states = [_QueryState(query=q) for q in pool]
        index = {q.as_tuple(): pos for pos, q in enumerate(pool)}
        task = _Task(
            task_id=task_id,
            manifest=manifest,
            pool=pool,
            lease_timeout=lease_timeout,
            seed=seed,
            states=states,
            index=index,
        )
        task.available = list(range(len(pool)))
        heapq.heapify(task.available)
        return task

    def _log_path(self, task_id: str) -> str:
        return os.path.join(self.data_dir, f"{task_id}.log.jsonl")

    def _append(self, task: _Task, event: dict) -> None:
        """Write one event durably; the ack must not outrun the disk."""
        fh = task.log_fh
        fh.write(json.dumps(event, separators=(",", ":")) + "\n")
        fh.flush()
        os.fsync(fh.fileno())

    def _replay_all(self) -> None:
        for name in sorted(os.listdir(self.data_dir)):
            if name.endswith(".log.jsonl"):
                self._replay_file(os.path.join(self.data_dir, name))

    def _replay_file(self, path: str) -> None:
        task: _Task | None = None
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    # torn tail after a crash; everything acked is intact
                    logger.warning("%s: ignoring torn line %d", path, line_no)
                    break
                if event["event"] == "create":
                    manifest = StimulusManifest.from_json(json.dumps(event["manifest"]))
                    task = self._build_task(
                        event["task_id"],
                        manifest,
                        int(event["budget"]),
                        int(event["seed"]),
                        float(event["lease_timeout"]),
                    )
                elif event["event"] == "response" and task is not None:
                    self._replay_response(task, event)
        if task is None:
            return
        task.log_fh = open(path, "a")
        self._tasks[task.task_id] = task

    def _replay_response(self, task: _Task, event: dict) -> None:
        key = (int(event["i"]), int(event["j"]), int(event["k"]))
        pos = task.index.get(key)
        if pos is None:
            logger.warning("%s: replayed response for unknown query %s", task.task_id, key)
            return
        state = task.states[pos]
        if state.status == "answered":
            return  # duplicate line; first answer wins
        state.status = "answered"
        state.w = int(event["w"])
        state.answered_by = str(event["annotator"])
        state.annotator = state.answered_by
        task.answered_count += 1

    # -- dealing and answering -------------------------------------------------

    def _get(self, task_id: str) -> _Task:
        task = self._tasks.get(task_id)
        if task is None:
            raise UnknownTaskError(f"unknown task {task_id!r}")
        return task

    def next_query(self, task_id: str, annotator: str) -> DealtQuery | None:
        """Lease the first available query to the annotator, or None if done.

        Calling again while holding an active lease renews and returns the
        same query, so a reloading client cannot burn through the pool.
        """
        task = self._get(task_id)
        now = self._clock()
        with task.lock:
            held = task.lease_by_annotator.get(annotator)
            if held is not None:
                state = task.states[held]
                if (
                    state.status == "leased"
                    and state.annotator == annotator
                    and state.lease_expiry > now
                ):
                    state.lease_expiry = now + task.lease_timeout
                    return self._dealt(task, state, now)
                del task.lease_by_annotator[annotator]
            self._reclaim_expired(task, now)
            while task.available:
                pos = heapq.heappop(task.available)
                state = task.states[pos]
                if state.status != "unassigned":
                    continue  # answered via the grace path while still heaped
                state.status = "leased"
                state.annotator = annotator
                state.lease_expiry = now + task.lease_timeout
                task.leased_positions.add(pos)
                task.lease_by_annotator[annotator] = pos
                return self._dealt(task, state, now)
            return None

    def _reclaim_expired(self, task: _Task, now: float) -> None:
        for pos in list(task.leased_positions):
            state = task.states[pos]
            if state.status == "leased" and state.lease_expiry <= now:
                state.grace[state.annotator] = state.lease_expiry
                for holder, expiry in list(state.grace.items()):
                    if expiry + GRACE_SECONDS <= now:
                        del state.grace[holder]
                state.status = "unassigned"
                state.annotator = None
                task.leased_positions.discard(pos)
                heapq.heappush(task.available, pos)
            elif state.status != "leased":
                task.leased_positions.discard(pos)

    def _dealt(self, task: _Task, state: _QueryState, now: float) -> DealtQuery:
        q = state.query
        entries = task.manifest.entries
        return DealtQuery(
            query=q,
            reference=entries[q.i - 1],
            option_a=entries[q.j - 1],
            option_b=entries[q.k - 1],
            lease_expires_in=state.lease_expiry - now,
        )

    def submit_response(
        self,
        task_id: str,
        annotator: str,
        i: int,
        j: int,
        k: int,
        choice: str,
        latency_ms: int | None = None,
    ) -> SubmitResult:
        """Record one answer durably; see CHOICE_TO_W for the sign mapping.

        Mirrored submissions (j and k swapped relative to the dealt query)
        are normalized together with the choice, so the stored w is the same
        answer either way.
        """
        if choice not in CHOICE_TO_W:
            raise ValueError(f"choice must be A or B, got {choice!r}")
        task = self._get(task_id)
        query, w = canonical_labeled(i, j, k, CHOICE_TO_W[choice])
        pos = task.index.get(query.as_tuple())
        if pos is None:
            raise UnknownQueryError(
                f"query {(i, j, k)} is not in the pool of task {task_id!r}"
            )
        now = self._clock()
        with task.lock:
            state = task.states[pos]
            if state.status == "answered":
                if state.answered_by == annotator and state.w == w:
                    return SubmitResult(w=w, choice=W_TO_CHOICE[w], duplicate=True)
                if state.answered_by == annotator:
                    raise LeaseConflictError(
                        f"annotator {annotator!r} already answered {query.as_tuple()} differently"
                    )
                raise AlreadyAnsweredError(
                    f"query {query.as_tuple()} was answered by another annotator"
                )
            if state.status == "leased" and state.annotator == annotator:
                expiry = state.lease_expiry
            elif annotator in state.grace:
                expiry = state.grace[annotator]
            elif state.status == "leased":
                raise LeaseConflictError(
                    f"query {query.as_tuple()} is leased to another annotator"
                )
            else:
                raise LeaseConflictError(
                    f"query {query.as_tuple()} is not leased to {annotator!r}"
                )
            # the lease may have lapsed; accept within the grace period while
            # the query is unanswered
            if expiry + GRACE_SECONDS <= now:
                raise LeaseConflictError(
                    f"lease on {query.as_tuple()} expired beyond the grace period"
                )
            event = {
                "event": "response",
                "task_id": task_id,
                "i": query.i,
                "j": query.j,
                "k": query.k,
                "w": w,
                "annotator": annotator,
                "choice": W_TO_CHOICE[w],
                "latency_ms": int(latency_ms) if latency_ms is not None else None,
                "submitted_at": now,
            }
            self._append(task, event)
            state.status = "answered"
            state.w = w
            state.answered_by = annotator
            state.grace.clear()
            task.answered_count += 1
            task.leased_positions.discard(pos)
            for holder, held_pos in list(task.lease_by_annotator.items()):
                if held_pos == pos:
                    del task.lease_by_annotator[holder]
            return SubmitResult(w=w, choice=W_TO_CHOICE[w], duplicate=False)

    # -- read-side -------------------------------------------------------------

    def export_labels(self, task_id: str) -> LabeledTripletSet:
        """All answered queries as one set; construction re-checks uniqueness."""
        task = self._get(task_id)
        with task.lock:
            labels = [
                LabeledTriplet(
                    query=state.query,
                    w=state.w,
                    annotator_id=state.answered_by,
                    source="human",
                )
                for state in task.states
                if state.status == "answered"
            ]
        return LabeledTripletSet(labels, n=task.n)

    def progress(self, task_id: str) -> dict:
        task = self._get(task_id)
        now = self._clock()
        with task.lock:
            leased = 0
            per_annotator: dict[str, int] = {}
            for state in task.states:
                if state.status == "leased" and state.lease_expiry > now:
                    leased += 1
                elif state.status == "answered":
                    per_annotator[state.answered_by] = (
                        per_annotator.get(state.answered_by, 0) + 1
                    )
            answered = task.answered_count
            return {
                "task_id": task_id,
                "n": task.n,
                "total": len(task.pool),
                "answered": answered,
                "leased": leased,
                "unassigned": len(task.pool) - answered - leased,
                "per_annotator": dict(sorted(per_annotator.items())),
            }

    def task_ids(self) -> list[str]:
        with self._store_lock:
            return sorted(self._tasks)

    def find_asset(self, asset_id: str) -> StimulusEntry:
        for task_id in self.task_ids():
            task = self._tasks[task_id]
            for entry in task.manifest.entries:
                if entry.asset_id == asset_id:
                    return entry
        raise UnknownAssetError(f"unknown asset {asset_id!r}")

    def close(self) -> None:
        with self._store_lock:
            for task in self._tasks.values():
                if task.log_fh is not None:
                    task.log_fh.close()
                    task.log_fh = None
