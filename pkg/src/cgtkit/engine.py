"""Consultation engine: walks a guidance tree against patient information.

A pluggable judge maps (condition text, branch labels, complaint, dialog
history) to a branch choice or "unable to determine".  The engine moves
through condition nodes on matches; on the first UNABLE at a node it asks
the patient a follow-up question, and on a second UNABLE (or an explicit
"I don't know") it falls back to hypothesis mode: the current subtree is
serialized to IEET and every leaf outcome is listed as a candidate.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Protocol, Sequence

from . import ieet, retrieval
from .model import Cgt, CgtNode, NodeKind, subtree

DONT_KNOW = frozenset({
    "i don't know", "don't know", "dont know", "unsure", "not sure", "不知道",
})

QUESTION_TEMPLATE = (
    "Regarding your condition: {condition} — which applies: {labels}? "
    "If unsure, say 'I don't know'."
)

JUDGE_PROMPT_TEMPLATE = """You are a clinical triage assistant working through a decision tree.
Condition under evaluation: {condition}
Possible branch answers: {labels}
Patient's chief complaint: {complaint}
Dialogue so far:
{history}

Decide which branch answer the patient's information supports.
Reply with exactly one line:
VERDICT: <one of the branch answers verbatim>
or, if the information is insufficient:
VERDICT: UNABLE
"""


class EngineError(Exception):
    code = "ENGINE_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class WrongStateError(EngineError):
    code = "WRONG_STATE"


class UnknownTreeError(EngineError):
    code = "UNKNOWN_TREE"


@dataclass(frozen=True)
class Verdict:
    label: str | None  # None means unable to determine

    @property
    def unable(self) -> bool:
        return self.label is None


UNABLE = Verdict(None)


def match(label: str) -> Verdict:
    return Verdict(label)


@dataclass(frozen=True)
class Turn:
    role: str  # "patient" | "system"
    text: str
    index: int


class Judge(Protocol):
    def __call__(self, condition_text: str, branch_labels: Sequence[str],
                 complaint: str, history: Sequence[Turn]) -> Verdict: ...


class SessionStatus(str, Enum):
    ACTIVE = "active"
    AWAITING_ANSWER = "awaiting_answer"
    DIAGNOSED = "diagnosed"
    HYPOTHESIZED = "hypothesized"
    EXHAUSTED = "exhausted"


@dataclass
class Session:
    id: str
    tree: Cgt
    current_node_id: int
    history: list[Turn] = field(default_factory=list)
    path: list[tuple[int, str | None]] = field(default_factory=list)
    status: SessionStatus = SessionStatus.ACTIVE
    asked_counts: dict[int, int] = field(default_factory=dict)
    turn_limit: int = 20

    @property
    def complaint(self) -> str:
        return self.history[0].text if self.history else ""

    def add_turn(self, role: str, text: str) -> None:
        self.history.append(Turn(role, text, len(self.history)))


# --- events ----------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    pass


@dataclass(frozen=True)
class Moved(Event):
    node_id: int


@dataclass(frozen=True)
class Ask(Event):
    node_id: int
    question: str


@dataclass(frozen=True)
class Diagnosis(Event):
    node_id: int
    text: str
    path: tuple[tuple[int, str | None], ...]


@dataclass(frozen=True)
class Hypotheses(Event):
    node_id: int
    ieet_text: str
    candidates: tuple[str, ...]


def event_to_dict(ev: Event) -> dict:
    if isinstance(ev, Ask):
        return {"type": "ask", "node_id": ev.node_id, "question": ev.question}
    if isinstance(ev, Diagnosis):
        return {"type": "diagnosis", "node_id": ev.node_id, "text": ev.text,
                "path": [{"node_id": n, "label": l} for n, l in ev.path]}
    if isinstance(ev, Hypotheses):
        return {"type": "hypotheses", "node_id": ev.node_id, "ieet": ev.ieet_text,
                "candidates": list(ev.candidates)}
    if isinstance(ev, Moved):
        return {"type": "moved", "node_id": ev.node_id}
    raise EngineError(f"unknown event {ev!r}")


# --- judges ----------------------------------------------------------------

_YES_WORDS = frozenset({"yes", "y", "yeah", "yep"})
_NO_WORDS = frozenset({"no", "n", "nope"})


def _tokens(text: str) -> list[str]:
    return re.findall(r"[^\W_]+", text.lower(), re.UNICODE)


def keyword_judge(condition_text: str, branch_labels: Sequence[str],
                  complaint: str, history: Sequence[Turn]) -> Verdict:
    """Deterministic stand-in for an LLM judge: token lookup in the latest
    patient turn (the chief complaint counts as a patient turn)."""
    last = None
    for turn in reversed(list(history)):
        if turn.role == "patient":
            last = turn.text
            break
    if last is None:
        last = complaint
    toks = set(_tokens(last))
    for label in branch_labels:
        if label.lower() in toks:
            return match(label)
        if label.lower() == "yes" and toks & _YES_WORDS:
            return match(label)
        if label.lower() == "no" and toks & _NO_WORDS:
            return match(label)
    return UNABLE


class ScriptedJudge:
    """Judge driven by a script: condition text -> label, "UNABLE", or a
    list of those consumed one per call."""

    def __init__(self, script: Mapping[str, object]):
        self._script = {k: (list(v) if isinstance(v, (list, tuple)) else [v])
                        for k, v in script.items()}
        self._calls: dict[str, int] = {}

    def __call__(self, condition_text: str, branch_labels: Sequence[str],
                 complaint: str, history: Sequence[Turn]) -> Verdict:
        seq = self._script.get(condition_text)
        if not seq:
            return UNABLE
        i = min(self._calls.get(condition_text, 0), len(seq) - 1)
        self._calls[condition_text] = i + 1
        value = seq[i]
        if value is None or value == "UNABLE":
            return UNABLE
        return match(str(value))


def format_question(node: CgtNode, labels: Sequence[str]) -> str:
    return QUESTION_TEMPLATE.format(condition=node.text, labels="/".join(labels))


def render_judge_prompt(condition_text: str, branch_labels: Sequence[str],
                        complaint: str, history: Sequence[Turn]) -> str:
    lines = [f"{'Patient' if t.role == 'patient' else 'System'}: {t.text}" for t in history]
    return JUDGE_PROMPT_TEMPLATE.format(
        condition=condition_text, labels=", ".join(branch_labels),
        complaint=complaint, history="\n".join(lines) or "(none)")


def parse_judge_reply(reply: str, branch_labels: Sequence[str]) -> Verdict:
    """Extract ``VERDICT: <label>`` from a model reply; anything else is UNABLE."""
    for line in reply.splitlines():
        line = line.strip()
        if line.upper().startswith("VERDICT:"):
            value = line[len("VERDICT:"):].strip()
            if value.upper() == "UNABLE":
                return UNABLE
            for label in branch_labels:
                if value == label or value.lower() == label.lower():
                    return match(label)
            return UNABLE
    return UNABLE


# --- state machine ---------------------------------------------------------

def _hypotheses(session: Session, terminal: SessionStatus) -> Hypotheses:
    node_id = session.current_node_id
    sub = subtree(session.tree, node_id)
    doc = ieet.serialize(sub)
    candidates = tuple(
        n.text for n in sorted(sub.nodes, key=lambda n: n.id)
        if not sub.children(n.id)
    )
    session.status = terminal
    return Hypotheses(node_id=node_id, ieet_text=doc.text, candidates=candidates)


def step(session: Session, judge: Judge) -> Event:
    """Advance until a patient-visible event (never returns Moved)."""
    if session.status is not SessionStatus.ACTIVE:
        raise WrongStateError(f"cannot step a session in status {session.status.value}")
    tree = session.tree
    while True:
        if len(session.history) > session.turn_limit:
            return _hypotheses(session, SessionStatus.EXHAUSTED)

        node = tree.node(session.current_node_id)
        kids = tree.children(node.id)

        if node.kind is NodeKind.ACTION:
            raise WrongStateError("session is already at an action node")

        if not kids:
            # Degenerate tree: a root with no children has nothing to decide.
            return _hypotheses(session, SessionStatus.HYPOTHESIZED)

        if node.kind is NodeKind.ROOT and len(kids) == 1:
            child = kids[0]
            session.current_node_id = child.id
            session.path.append((child.id, child.edge_label))
            if child.kind is NodeKind.ACTION:
                session.status = SessionStatus.DIAGNOSED
                return Diagnosis(child.id, child.text, tuple(session.path))
            continue

        labels = [c.edge_label or "" for c in kids]
        verdict = judge(node.text, labels, session.complaint, session.history)
        if not verdict.unable and verdict.label in labels:
            child = kids[labels.index(verdict.label)]
            session.current_node_id = child.id
            session.path.append((child.id, child.edge_label))
            if child.kind is NodeKind.ACTION:
                session.status = SessionStatus.DIAGNOSED
                return Diagnosis(child.id, child.text, tuple(session.path))
            continue

        # Unable to determine (an out-of-set label counts as unable too).
        if session.asked_counts.get(node.id, 0) == 0:
            session.asked_counts[node.id] = 1
            question = format_question(node, labels)
            session.add_turn("system", question)
            session.status = SessionStatus.AWAITING_ANSWER
            return Ask(node.id, question)
        return _hypotheses(session, SessionStatus.HYPOTHESIZED)


def answer(session: Session, text: str, judge: Judge) -> Event:
    """Feed a patient reply into an awaiting session."""
    if session.status is not SessionStatus.AWAITING_ANSWER:
        raise WrongStateError(f"cannot answer a session in status {session.status.value}")
    if text.strip().lower() in DONT_KNOW:
        return _hypotheses(session, SessionStatus.HYPOTHESIZED)
    session.add_turn("patient", text)
    session.status = SessionStatus.ACTIVE
    return step(session, judge)


def start(
    kb: Mapping[str, Cgt],
    complaint: str,
    judge: Judge,
    tree_id: str | None = None,
    index: "retrieval.Index | None" = None,
    turn_limit: int = 20,
    session_id: str | None = None,
) -> tuple[Session, Event]:
    """Open a session: pick a tree (explicitly or by retrieval) and run the
    first steps until a patient-visible event."""
    if not kb:
        raise EngineError("knowledge base is empty", code="EMPTY_KB")
    if not complaint.strip():
        raise EngineError("complaint must not be empty", code="EMPTY_COMPLAINT")
    if tree_id is None:
        if index is None:
            index = retrieval.build_index(list(kb.values()))
        query = retrieval.rewrite_dialogue([Turn("patient", complaint, 0)])
        ranked = retrieval.retrieve(index, query, k=1)
        tree_id = ranked[0][0]
    if tree_id not in kb:
        raise UnknownTreeError(f"tree {tree_id!r} is not in the knowledge base")
    tree = kb[tree_id]
    session = Session(
        id=session_id or uuid.uuid4().hex,
        tree=tree,
        current_node_id=tree.root.id,
        turn_limit=turn_limit,
    )
    session.add_turn("patient", complaint)
    session.path.append((tree.root.id, None))
    event = step(session, judge)
    return session, event
