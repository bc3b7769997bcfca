"""Contractor / subcontractor workflow simulation.

Two independently keyed sites exchange work through an in-process,
append-only event log (JSON lines). Task payloads are sealed under a fresh
GT session key encrypted with the owning site's policy; outsourcing
re-encrypts that key towards a subcontractor user, so payload plaintext
never appears in the log.

Task states::

    Requested -> UnderReview -> Approved -> Completed
                                        \\-> Outsourced -> Completed

Issue states::

    Created -> Assigned -> Resolved -> Verified -> Closed

Created issues are hidden until assigned.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Union

from . import envelope
from .errors import DeadlineInPast, InvalidTransition, TargetUserUnknown, WrongActor
from .groups import Backend, DebugBackend
from .policy import parse_policy, to_text
from .scheme import (
    MODE_CORRECTED,
    Ciphertext,
    CrossDomainUserKey,
    MasterSecretKey,
    PublicKey,
    ReEncryptedCiphertext,
    UserSecretKey,
    decrypt,
    decrypt_reencrypted,
    dem_open,
    dem_seal,
    encrypt,
    issue_crossdomain_key,
    keygen,
    kdf,
    random_symmetric_key,
    reencrypt_corrected,
    setup,
)

GENERAL_CONTRACTOR = "general-contractor"
SUBCONTRACTOR = "subcontractor"

REQUESTED, UNDER_REVIEW, APPROVED, OUTSOURCED, COMPLETED = (
    "Requested", "UnderReview", "Approved", "Outsourced", "Completed")
TASK_TRANSITIONS = {
    None: {REQUESTED},
    REQUESTED: {UNDER_REVIEW},
    UNDER_REVIEW: {APPROVED},
    APPROVED: {OUTSOURCED, COMPLETED},
    OUTSOURCED: {COMPLETED},
    COMPLETED: set(),
}

CREATED, ASSIGNED, RESOLVED, VERIFIED, CLOSED = "Created", "Assigned", "Resolved", "Verified", "Closed"
ISSUE_TRANSITIONS = {
    None: {CREATED},
    CREATED: {ASSIGNED},
    ASSIGNED: {RESOLVED},
    RESOLVED: {VERIFIED},
    VERIFIED: {CLOSED},
    CLOSED: set(),
}


# ---------------------------------------------------------------------------
# event log


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: str
    site: str
    actor: str
    event_type: str
    object_id: str
    payload_digest: Optional[str]

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "site": self.site,
            "actor": self.actor,
            "event_type": self.event_type,
            "object_id": self.object_id,
            "payload_digest": self.payload_digest,
        }


class SimClock:
    """Deterministic clock: every reading advances by ``step``."""

    def __init__(self, start: datetime, step: timedelta = timedelta(minutes=1)):
        self._now = start
        self._step = step

    def peek(self) -> datetime:
        return self._now

    def tick(self) -> datetime:
        self._now += self._step
        return self._now


class EventLog:
    def __init__(self):
        self.events: list[Event] = []

    def append(self, timestamp: datetime, site: str, actor: str, event_type: str, object_id: str,
               digest: Optional[str] = None) -> Event:
        ev = Event(len(self.events) + 1, timestamp.isoformat(), site, actor, event_type, object_id, digest)
        self.events.append(ev)
        return ev

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in self.events)

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path) -> "EventLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                log.events.append(Event(**json.loads(line)))
        return log


def replay(events) -> dict[str, str]:
    """Last recorded state of every task and issue in the log."""
    state: dict[str, str] = {}
    for ev in events:
        kind, _, name = ev.event_type.partition(".")
        if kind in ("task", "issue"):
            state[ev.object_id] = name
    return state


def _digest(obj) -> str:
    return hashlib.sha256(envelope.dumps(obj).encode()).hexdigest()


# ---------------------------------------------------------------------------
# records


@dataclass
class Site:
    id: str
    role: str
    msk: MasterSecretKey = field(repr=False)
    pk: PublicKey = field(repr=False)
    users: dict[str, UserSecretKey] = field(default_factory=dict, repr=False)
    crossdomain_users: dict[str, CrossDomainUserKey] = field(default_factory=dict, repr=False)

    @property
    def backend(self) -> Backend:
        return self.pk.backend


@dataclass
class TaskRecord:
    id: str
    site: str
    initiator: str
    title: str
    deadline: datetime
    policy: str
    payload_ct: Union[Ciphertext, ReEncryptedCiphertext] = field(repr=False)
    sealed: bytes = field(repr=False)
    state: str = REQUESTED
    history: list[tuple[str, str, str]] = field(default_factory=list)


@dataclass
class IssueRecord:
    id: str
    task_id: str
    initiator: str
    resolver: Optional[str] = None
    state: str = CREATED
    visible: bool = False
    history: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class DelegationRecord:
    task_id: str
    from_site: str
    to_site: str
    mode: str
    target_policy: str
    target_user: str
    timestamp: str
    active: bool = True


@dataclass
class ValidationReport:
    task_id: str
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# simulation


class Simulation:
    """Single-threaded driver owning the clock, the RNG and the shared event log."""

    def __init__(self, seed: int = 0, backend: Optional[Backend] = None,
                 start: datetime = datetime(2025, 1, 6, 8, 0, tzinfo=timezone.utc)):
        self.rng = random.Random(seed)
        self.backend = backend or DebugBackend()
        self.clock = SimClock(start)
        self.log = EventLog()
        self.sites: dict[str, Site] = {}
        self.tasks: dict[str, TaskRecord] = {}
        self.issues: dict[str, IssueRecord] = {}
        self.delegations: list[DelegationRecord] = []

    def _emit(self, site: str, actor: str, event_type: str, object_id: str, digest=None) -> Event:
        return self.log.append(self.clock.tick(), site, actor, event_type, object_id, digest)

    # sites and users ----------------------------------------------------
    def add_site(self, site_id: str, role: str, universe) -> Site:
        if site_id in self.sites:
            raise ValueError(f"duplicate site id {site_id!r}")
        msk, pk = setup(universe, self.rng, self.backend)
        site = Site(site_id, role, msk, pk)
        self.sites[site_id] = site
        self._emit(site_id, "system", "site.created", site_id)
        return site

    def register_user(self, site: Site, name: str, attrs) -> UserSecretKey:
        site.users[name] = keygen(site.msk, site.pk, attrs, self.rng)
        self._emit(site.id, "system", "user.registered", name)
        return site.users[name]

    def register_crossdomain_user(self, site: Site, name: str, attrs) -> CrossDomainUserKey:
        site.crossdomain_users[name] = issue_crossdomain_key(site.backend, site.msk.beta, attrs)
        self._emit(site.id, "system", "user.registered_crossdomain", name)
        return site.crossdomain_users[name]

    # tasks ----------------------------------------------------------------
    def _move(self, task: TaskRecord, new_state: str, actor: str) -> None:
        current = task.state if task.history else None
        if new_state not in TASK_TRANSITIONS[current]:
            raise InvalidTransition(f"task {task.id}: {current} -> {new_state}")
        task.state = new_state
        ev = self._emit(task.site, actor, f"task.{new_state}", task.id, _digest(task.payload_ct))
        task.history.append((new_state, actor, ev.timestamp))

    def create_request(self, site: Site, initiator: str, title: str, deadline: datetime, payload: bytes,
                       policy: str) -> TaskRecord:
        if deadline <= self.clock.peek():
            raise DeadlineInPast(f"deadline {deadline.isoformat()} is not after {self.clock.peek().isoformat()}")
        tree = parse_policy(policy)
        K = random_symmetric_key(site.backend, self.rng)
        ct = encrypt(site.pk, tree, K, self.rng)
        task = TaskRecord(f"T{len(self.tasks) + 1}", site.id, initiator, title, deadline, to_text(tree), ct,
                          dem_seal(kdf(K), payload))
        self._move(task, REQUESTED, initiator)
        self.tasks[task.id] = task
        return task

    def review_and_approve(self, site: Site, approver: str, task: TaskRecord) -> TaskRecord:
        if task.state not in (REQUESTED, UNDER_REVIEW):
            raise InvalidTransition(f"task {task.id} is {task.state}; only Requested/UnderReview can be approved")
        # approval requires being able to open the request
        decrypt(site.pk, site.users[approver], task.payload_ct)
        if task.state == REQUESTED:
            self._move(task, UNDER_REVIEW, approver)
        self._move(task, APPROVED, approver)
        return task

    def outsource_task(self, from_site: Site, to_site: Site, task: TaskRecord, target_policy: str,
                       target_user: str) -> tuple[TaskRecord, DelegationRecord]:
        if task.state != APPROVED:
            raise InvalidTransition(f"task {task.id} is {task.state}; only Approved tasks can be outsourced")
        if target_user not in to_site.crossdomain_users:
            raise TargetUserUnknown(f"{target_user!r} is not registered at {to_site.id}")
        tree = parse_policy(target_policy)
        target_pk = to_site.crossdomain_users[target_user].K0
        task.payload_ct = reencrypt_corrected(from_site.msk, from_site.pk, target_pk, task.payload_ct, tree,
                                              self.rng)
        self._move(task, OUTSOURCED, from_site.id)
        rec = DelegationRecord(task.id, from_site.id, to_site.id, task.payload_ct.mode, to_text(tree),
                               target_user, task.history[-1][2])
        self.delegations.append(rec)
        self._emit(from_site.id, from_site.id, "delegation.created", task.id, _digest(task.payload_ct))
        return task, rec

    def open_task_payload(self, site: Site, user: str, task: TaskRecord) -> bytes:
        if isinstance(task.payload_ct, ReEncryptedCiphertext):
            K = decrypt_reencrypted(site.crossdomain_users[user], task.payload_ct)
        else:
            K = decrypt(site.pk, site.users[user], task.payload_ct)
        payload = dem_open(kdf(K), task.sealed)
        self._emit(site.id, user, "payload.opened", task.id, hashlib.sha256(task.sealed).hexdigest())
        return payload

    def complete_task(self, task: TaskRecord, actor: str) -> TaskRecord:
        self._move(task, COMPLETED, actor)
        return task

    # issues ---------------------------------------------------------------
    def _move_issue(self, issue: IssueRecord, new_state: str, actor: str, site: str) -> None:
        if new_state not in ISSUE_TRANSITIONS[issue.state if issue.history else None]:
            raise InvalidTransition(f"issue {issue.id}: {issue.state} -> {new_state}")
        issue.state = new_state
        issue.history.append((new_state, actor))
        self._emit(site, actor, f"issue.{new_state}", issue.id)

    def open_issue(self, site: Site, initiator: str, task: TaskRecord) -> IssueRecord:
        issue = IssueRecord(f"I{len(self.issues) + 1}", task.id, initiator)
        self._move_issue(issue, CREATED, initiator, site.id)
        self.issues[issue.id] = issue
        return issue

    def assign_issue(self, site: Site, issue: IssueRecord, resolver: str, actor: Optional[str] = None) -> IssueRecord:
        if issue.state != CREATED:
            raise InvalidTransition(f"issue {issue.id}: {issue.state} -> {ASSIGNED}")
        issue.resolver = resolver
        issue.visible = True
        self._move_issue(issue, ASSIGNED, actor or resolver, site.id)
        return issue

    def resolve_issue(self, site: Site, issue: IssueRecord, actor: str) -> IssueRecord:
        if issue.state != ASSIGNED:
            raise InvalidTransition(f"issue {issue.id}: {issue.state} -> {RESOLVED}")
        if actor != issue.resolver:
            raise WrongActor(f"only the assigned resolver {issue.resolver!r} can resolve {issue.id}")
        self._move_issue(issue, RESOLVED, actor, site.id)
        return issue

    def verify_and_close(self, site: Site, issue: IssueRecord, actor: str) -> IssueRecord:
        if issue.state != RESOLVED:
            raise InvalidTransition(f"issue {issue.id}: {issue.state} -> {VERIFIED}")
        if actor != issue.initiator:
            raise WrongActor(f"only the initiator {issue.initiator!r} can verify {issue.id}")
        self._move_issue(issue, VERIFIED, actor, site.id)
        self._move_issue(issue, CLOSED, actor, site.id)
        return issue


def track_task(task: TaskRecord, delegations: list[DelegationRecord]) -> ValidationReport:
    """Check a task's history and delegation chain; problems are reported, not raised."""
    violations = []
    prev = None
    for state, _actor, _ts in task.history:
        if state not in TASK_TRANSITIONS.get(prev, set()):
            violations.append(f"illegal transition {prev} -> {state}")
        prev = state
    if task.history and task.history[-1][0] != task.state:
        violations.append(f"state {task.state} does not match history tail {task.history[-1][0]}")

    mine = [d for d in delegations if d.task_id == task.id]
    active = [d for d in mine if d.active]
    if len(active) > 1:
        violations.append("multiple active delegations")
    outsourced = any(state == OUTSOURCED for state, _, _ in task.history)
    if outsourced and not active:
        violations.append("outsourced without an active delegation")
    if active and not outsourced:
        violations.append("delegation recorded for a task that was never outsourced")
    for d in active:
        ct = task.payload_ct
        if not isinstance(ct, ReEncryptedCiphertext) or ct.mode != d.mode:
            violations.append(f"ciphertext mode does not match delegation mode {d.mode}")
    return ValidationReport(task.id, violations)


# ---------------------------------------------------------------------------
# scripted scenario


DEMO_PAYLOAD = b"Install switchgear on level 3; energize after inspection sign-off."


@dataclass
class DemoResult:
    sim: Simulation
    task: TaskRecord
    issue: IssueRecord
    opened_payload: bytes
    report: ValidationReport


def run_demo(seed: int = 0, backend: Optional[Backend] = None, log_path=None) -> DemoResult:
    """Create, approve, outsource and open one task, then run one issue to closure."""
    sim = Simulation(seed, backend)
    gc = sim.add_site("contractor", GENERAL_CONTRACTOR, ["Engineer", "Manager", "Safety"])
    sub = sim.add_site("subcontractor", SUBCONTRACTOR, ["Electrician", "Foreman"])
    sim.register_user(gc, "alice", ["Engineer"])
    sim.register_user(gc, "bob", ["Engineer", "Manager"])
    sim.register_crossdomain_user(sub, "carol", ["Electrician", "Foreman"])
    sim.register_crossdomain_user(sub, "dave", ["Foreman"])

    task = sim.create_request(gc, "alice", "Level 3 switchgear", sim.clock.peek() + timedelta(days=5),
                              DEMO_PAYLOAD, "(Manager AND Engineer)")
    sim.review_and_approve(gc, "bob", task)
    sim.outsource_task(gc, sub, task, "(Electrician AND Foreman)", "carol")
    opened = sim.open_task_payload(sub, "carol", task)
    sim.complete_task(task, "carol")

    issue = sim.open_issue(gc, "alice", task)
    sim.assign_issue(gc, issue, "carol", actor="bob")
    sim.resolve_issue(gc, issue, "carol")
    sim.verify_and_close(gc, issue, "alice")

    if log_path is not None:
        sim.log.write(log_path)
    return DemoResult(sim, task, issue, opened, track_task(task, sim.delegations))
