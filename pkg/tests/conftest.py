"""Shared fixtures: a small hand-built knowledge base and random tree makers."""

from __future__ import annotations

import random

import pytest

from cgtkit.model import Cgt, CgtNode, NodeKind


def make_dyspnea() -> Cgt:
    """Root symptom, one fever condition, yes/no action leaves."""
    return Cgt(
        id="dyspnea",
        title="Dyspnea differential",
        kind="differential_diagnosis",
        department="Department of Internal medicine",
        nodes=(
            CgtNode(id=1, kind=NodeKind.ROOT, text="dyspnea"),
            CgtNode(id=2, kind=NodeKind.CONDITION, text="Have any fever symptom?",
                    parent_id=1, edge_label="next"),
            CgtNode(id=3, kind=NodeKind.ACTION, text="flu workup",
                    parent_id=2, edge_label="yes"),
            CgtNode(id=4, kind=NodeKind.ACTION, text="cardiac workup",
                    parent_id=2, edge_label="no"),
        ),
    )


def make_knee() -> Cgt:
    return Cgt(
        id="knee-pain",
        title="Knee pain treatment",
        kind="treatment_suggestion",
        department="Department of surgery",
        nodes=(
            CgtNode(id=1, kind=NodeKind.ROOT, text="knee pain"),
            CgtNode(id=2, kind=NodeKind.CONDITION, text="Was there a recent injury?",
                    parent_id=1, edge_label="next"),
            CgtNode(id=3, kind=NodeKind.ACTION, text="imaging and orthopedic referral",
                    parent_id=2, edge_label="yes"),
            CgtNode(id=4, kind=NodeKind.ACTION, text="physiotherapy",
                    parent_id=2, edge_label="no"),
        ),
    )


def make_deep() -> Cgt:
    """Three levels with a nested condition, for subtree/paths/ieet checks."""
    return Cgt(
        id="chest-pain",
        title="Chest pain differential",
        kind="differential_diagnosis",
        department="Department of Emergency",
        nodes=(
            CgtNode(id=1, kind=NodeKind.ROOT, text="chest pain"),
            CgtNode(id=2, kind=NodeKind.CONDITION, text="Is the pain exertional?",
                    parent_id=1, edge_label="next"),
            CgtNode(id=3, kind=NodeKind.CONDITION, text="Any ST elevation?",
                    parent_id=2, edge_label="yes"),
            CgtNode(id=4, kind=NodeKind.ACTION, text="musculoskeletal workup",
                    parent_id=2, edge_label="no"),
            CgtNode(id=5, kind=NodeKind.ACTION, text="activate cath lab",
                    parent_id=3, edge_label="yes"),
            CgtNode(id=6, kind=NodeKind.ACTION, text="serial troponins",
                    parent_id=3, edge_label="no"),
        ),
    )


@pytest.fixture
def dyspnea() -> Cgt:
    return make_dyspnea()


@pytest.fixture
def deep_tree() -> Cgt:
    return make_deep()


@pytest.fixture
def fixture_kb() -> dict[str, Cgt]:
    trees = [make_dyspnea(), make_knee(), make_deep()]
    return {t.id: t for t in trees}


_TEXT_WORDS = (
    "fever", "cough", "rash", "onset", "acute", "severe", "chest", "renal",
    "cardiac", "observe", "treat", "refer", "review", "stage", "risk",
)
_LABEL_WORDS = ("yes", "no", "high", "low", "mild", "severe", "present", "absent")


def random_tree(rng: random.Random, max_depth: int = 6, max_branch: int = 4,
                tree_id: str = "random") -> Cgt:
    """Random valid tree whose root-child labels follow the canonical
    "next"/"next-N" convention, so IEET round-trips are exact."""
    nodes: list[CgtNode] = []
    next_id = 1

    def add(kind, text, parent_id, label):
        nonlocal next_id
        nodes.append(CgtNode(id=next_id, kind=kind, text=text,
                             parent_id=parent_id, edge_label=label))
        next_id += 1
        return next_id - 1

    def grow(parent_id: int, label: str, depth: int):
        is_leaf = depth >= max_depth or rng.random() < 0.35
        if is_leaf:
            add(NodeKind.ACTION, f"{rng.choice(_TEXT_WORDS)} plan", parent_id, label)
            return
        cond = add(NodeKind.CONDITION, f"{rng.choice(_TEXT_WORDS)} present?",
                   parent_id, label)
        n_kids = rng.randint(1, max_branch)
        labels = rng.sample(_LABEL_WORDS, n_kids)
        for lab in labels:
            grow(cond, lab, depth + 1)

    root = add(NodeKind.ROOT, rng.choice(_TEXT_WORDS), None, None)
    n_children = rng.randint(1, max_branch)
    for i in range(n_children):
        grow(root, "next" if i == 0 else f"next-{i + 1}", 1)
    return Cgt(id=tree_id, title="random fixture", kind="differential_diagnosis",
               department="", nodes=tuple(sorted(nodes, key=lambda n: n.id)))


def tree_shape(tree: Cgt, node_id: int | None = None):
    """Canonical structure: ids abstracted away, child order preserved."""
    node = tree.root if node_id is None else tree.by_id[node_id]
    return (node.kind.value, node.text, node.edge_label,
            tuple(tree_shape(tree, c.id) for c in tree.children(node.id)))
