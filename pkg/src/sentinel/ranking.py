"""Ranking subgraphs for audit: nearest-neighbor and synthetic mutation rank.

NN orders candidates by minimum embedding distance to a small set of
interesting subgraphs. SMR mutates natural subgraphs to resemble
unexpected behavior, trains a feed-forward classifier to separate
natural from mutated embeddings, and ranks naturals by the classifier's
probability of being mutated.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from sentinel import neuralnet as nn
from sentinel.corpus import ActionRecord, EntityRef
from sentinel.neuralnet import Adam, Parameters
from sentinel.sampler import Edge, RootedSubgraph
from sentinel.validation import DimensionMismatch, check_embedding_matrix, check_same_dimension

TICKET_TYPE_PREFIX = "TicketManagement."


class EmptyInterestingSet(ValueError):
    """NN ranking requires at least one interesting subgraph."""


class InapplicableMutation(ValueError):
    """The subgraph lacks the structure this mutation targets."""


class MutationKind(enum.Enum):
    DETACH_TICKET_CONTEXT = "detach_ticket_context"
    SWAP_SUBJECT_USER = "swap_subject_user"
    TIME_INVERT_JUSTIFICATION = "time_invert_justification"


@dataclass(frozen=True)
class RankedFinding:
    subgraph_id: str
    method: str  # "NN" | "SMR"
    score: float
    rank: int

    def to_json(self) -> str:
        return json.dumps(
            {"subgraph_id": self.subgraph_id, "method": self.method, "score": self.score, "rank": self.rank},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "RankedFinding":
        obj = json.loads(text)
        return cls(obj["subgraph_id"], obj["method"], obj["score"], obj["rank"])


# ---------------------------------------------------------------------------
# nearest neighbor
# ---------------------------------------------------------------------------


def pairwise_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two unit-norm embeddings; in [0, 2]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_dimension(a, b)
    return float(np.linalg.norm(a - b))


def nn_rank(embeddings: dict[str, np.ndarray], interesting: list[str], k: int) -> list[RankedFinding]:
    """The k candidates closest to the interesting set, ascending distance.

    score(x) = min over i in I of ||x - i||; members of I are excluded
    from the output; ties break on id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    interesting = list(dict.fromkeys(interesting))
    if not interesting:
        raise EmptyInterestingSet("interesting set is empty")
    missing = [i for i in interesting if i not in embeddings]
    if missing:
        raise KeyError(f"interesting ids missing from embeddings: {missing}")

    ids = sorted(set(embeddings) - set(interesting))
    if not ids:
        return []
    X = check_embedding_matrix([embeddings[i] for i in ids])
    anchors = check_embedding_matrix([embeddings[i] for i in interesting])
    check_same_dimension(X, anchors)
    # ||x - a||^2 = ||x||^2 + ||a||^2 - 2 x.a, computed for all pairs at once
    sq = (X * X).sum(axis=1)[:, None] + (anchors * anchors).sum(axis=1)[None, :] - 2.0 * (X @ anchors.T)
    scores = np.sqrt(np.maximum(sq, 0.0)).min(axis=1)
    order = sorted(range(len(ids)), key=lambda i: (scores[i], ids[i]))[:k]
    return [RankedFinding(ids[i], "NN", float(scores[i]), rank + 1) for rank, i in enumerate(order)]


# ---------------------------------------------------------------------------
# mutations
# ---------------------------------------------------------------------------


def _prune_unreachable(g: RootedSubgraph) -> RootedSubgraph:
    """Drop actions unreachable from the root and entities left edgeless."""
    adj_a: dict[str, set[tuple[str, str]]] = {a.id: set() for a in g.actions}
    adj_e: dict[tuple[str, str], set[str]] = {}
    for aid, etype, eid, _rel in g.edges:
        adj_a[aid].add((etype, eid))
        adj_e.setdefault((etype, eid), set()).add(aid)
    keep_a, keep_e = {g.root_id}, set()
    stack: list[tuple[str, object]] = [("a", g.root_id)]
    while stack:
        kind, node = stack.pop()
        if kind == "a":
            for key in adj_a.get(node, ()):
                if key not in keep_e:
                    keep_e.add(key)
                    stack.append(("e", key))
        else:
            for aid in adj_e.get(node, ()):
                if aid not in keep_a:
                    keep_a.add(aid)
                    stack.append(("a", aid))
    return replace(
        g,
        actions=tuple(a for a in g.actions if a.id in keep_a),
        entities=tuple(e for e in g.entities if (e[0], e[1]) in keep_e),
        edges=tuple(e for e in g.edges if e[0] in keep_a and (e[1], e[2]) in keep_e),
    )


def _detach_ticket_context(g: RootedSubgraph) -> RootedSubgraph:
    ticket_ids = {a.id for a in g.actions if a.action_type.startswith(TICKET_TYPE_PREFIX) and a.id != g.root_id}
    if not ticket_ids:
        raise InapplicableMutation("no ticket-management actions besides the root")
    stripped = replace(
        g,
        actions=tuple(a for a in g.actions if a.id not in ticket_ids),
        edges=tuple(e for e in g.edges if e[0] not in ticket_ids),
    )
    return _prune_unreachable(stripped)


def _swap_subject_user(
    g: RootedSubgraph,
    donor_pool: list[RootedSubgraph],
    rng: np.random.Generator,
    user_entity_type: str,
) -> RootedSubgraph:
    def root_user(sub: RootedSubgraph) -> tuple[str, str] | None:
        for aid, etype, eid, _rel in sorted(sub.edges):
            if aid == sub.root_id and etype == user_entity_type:
                return (etype, eid)
        return None

    old_user = root_user(g)
    if old_user is None:
        raise InapplicableMutation("root has no user entity")
    donors = [d for d in donor_pool if d.root_id != g.root_id and root_user(d) not in (None, old_user)]
    if not donors:
        raise InapplicableMutation("no donor subgraph with a different subject user")
    donor = donors[rng.integers(0, len(donors))]
    new_user = root_user(donor)
    assert new_user is not None

    our_ids = {a.id for a in g.actions}
    # the donor user's background: donor actions linked to that user
    imported: list[ActionRecord] = []
    imported_edges: list[Edge] = []
    for aid, etype, eid, rel in sorted(donor.edges):
        if (etype, eid) == new_user and aid != donor.root_id and aid not in our_ids:
            action = next(a for a in donor.actions if a.id == aid)
            if action.id not in {a.id for a in imported}:
                imported.append(action)
            imported_edges.append((aid, etype, eid, rel))

    # rewire: drop the old user entirely, attach the root to the new user
    edges = [e for e in g.edges if (e[1], e[2]) != old_user]
    for aid, etype, eid, rel in g.edges:
        if aid == g.root_id and (etype, eid) == old_user:
            edges.append((g.root_id, new_user[0], new_user[1], rel))
    edges.extend(imported_edges)

    entities = [e for e in g.entities if (e[0], e[1]) != old_user]
    entities.append((new_user[0], new_user[1], 1))

    mutated = replace(
        g,
        actions=tuple(sorted(set(g.actions) | set(imported), key=lambda a: (a.start_ms, a.id))),
        entities=tuple(sorted(set(entities))),
        edges=tuple(sorted(set(edges))),
    )
    return _prune_unreachable(mutated)


def _time_invert_justification(g: RootedSubgraph) -> RootedSubgraph:
    root_start = g.root.start_ms
    early = {
        a.id: a
        for a in g.actions
        if a.action_type.startswith(TICKET_TYPE_PREFIX) and a.id != g.root_id and a.start_ms < root_start
    }
    if not early:
        raise InapplicableMutation("no ticket-management actions before the root")
    moved = []
    for a in g.actions:
        if a.id in early:
            shift = 2 * (root_start - a.start_ms)  # mirror around the root start
            moved.append(replace(a, start_ms=a.start_ms + shift, end_ms=a.end_ms + shift))
        else:
            moved.append(a)
    return replace(g, actions=tuple(sorted(moved, key=lambda a: (a.start_ms, a.id))))


def mutate(
    g: RootedSubgraph,
    kind: MutationKind,
    donor_pool: list[RootedSubgraph] | None = None,
    rng: np.random.Generator | None = None,
    user_entity_type: str = "user",
) -> RootedSubgraph:
    """Apply one mutation; the result is a structurally valid subgraph with
    the mutation recorded in its provenance."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if kind is MutationKind.DETACH_TICKET_CONTEXT:
        out = _detach_ticket_context(g)
    elif kind is MutationKind.SWAP_SUBJECT_USER:
        out = _swap_subject_user(g, donor_pool or [], rng, user_entity_type)
    elif kind is MutationKind.TIME_INVERT_JUSTIFICATION:
        out = _time_invert_justification(g)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown mutation kind {kind!r}")
    out = replace(out, provenance=g.provenance + (kind.value,))
    out.validate()
    return out


def mutate_corpus(
    subgraphs: list[RootedSubgraph],
    rng: np.random.Generator,
    user_entity_type: str = "user",
) -> list[RootedSubgraph]:
    """One mutation per subgraph, kind uniform over the applicable kinds."""
    out = []
    kinds = list(MutationKind)
    for g in subgraphs:
        applicable = []
        for kind in kinds:
            try:
                applicable.append(
                    (kind, mutate(g, kind, donor_pool=subgraphs, rng=rng, user_entity_type=user_entity_type))
                )
            except InapplicableMutation:
                continue
        if applicable:
            out.append(applicable[rng.integers(0, len(applicable))][1])
    return out


# ---------------------------------------------------------------------------
# synthetic mutation rank
# ---------------------------------------------------------------------------


class MutationClassifier(BaseEstimator, ClassifierMixin):
    """Two-layer feed-forward net scoring how mutated an embedding looks."""

    def __init__(self, hidden: int = 64, epochs: int = 200, batch_size: int = 32, learning_rate: float = 1e-3, seed: int = 0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X = check_embedding_matrix(X, unit=False)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y length mismatch")
        if set(np.unique(y)) - {0.0, 1.0}:
            raise ValueError("y must be binary")
        rng = np.random.default_rng(self.seed)
        self.params_ = Parameters(
            {
                "w1": nn.glorot_uniform(rng, (X.shape[1], self.hidden)),
                "b1": np.zeros(self.hidden),
                "w2": nn.glorot_uniform(rng, (self.hidden, 1)),
                "b2": np.zeros(1),
            }
        )
        optimizer = Adam(self.params_, lr=self.learning_rate)
        n = X.shape[0]
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_losses = []
            for lo in range(0, n, self.batch_size):
                idx = order[lo : lo + self.batch_size]
                _, loss = nn.train_step(
                    self.params_,
                    (X[idx], y[idx]),
                    optimizer,
                    lambda p, b: self._loss(p, b),
                )
                epoch_losses.append(loss)
            self.loss_curve_.append(float(np.mean(epoch_losses)))
        return self

    def _logits(self, params: Parameters, X: np.ndarray) -> nn.Tensor:
        h = nn.tanh(nn.constant(X) @ params["w1"] + params["b1"])
        return nn.reshape(h @ params["w2"] + params["b2"], (X.shape[0],))

    def _loss(self, params: Parameters, batch) -> nn.Tensor:
        Xb, yb = batch
        return nn.mean(nn.bce_with_logits(self._logits(params, Xb), yb))

    def predict_proba(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise RuntimeError("MutationClassifier is not fitted; call fit first")
        X = check_embedding_matrix(X, unit=False)
        z = self._logits(self.params_, X).data
        p = 1.0 / (1.0 + np.exp(-z))
        return np.stack([1.0 - p, p], axis=1)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        self.params_.save(os.path.join(directory, "params"))
        with open(os.path.join(directory, "model.json"), "w", encoding="utf-8") as fh:
            json.dump(self.get_params(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "MutationClassifier":
        with open(os.path.join(directory, "model.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        model = cls(**meta)
        model.params_ = Parameters.load(os.path.join(directory, "params"))
        return model


def train_smr(
    natural_embeddings: np.ndarray,
    mutated_embeddings: np.ndarray,
    seed: int = 0,
    **classifier_kwargs,
) -> MutationClassifier:
    """Fit the natural-vs-mutated classifier on a labeled mixture."""
    natural = check_embedding_matrix(natural_embeddings, unit=False)
    mutated = check_embedding_matrix(mutated_embeddings, unit=False)
    if natural.shape[0] == 0 or mutated.shape[0] == 0:
        raise ValueError("both natural and mutated sets must be non-empty")
    X = np.concatenate([natural, mutated])
    y = np.concatenate([np.zeros(len(natural)), np.ones(len(mutated))])
    return MutationClassifier(seed=seed, **classifier_kwargs).fit(X, y)


def smr_rank(classifier: MutationClassifier, embeddings: dict[str, np.ndarray], k: int) -> list[RankedFinding]:
    """Top-k naturals by descending probability-of-mutated; ties break on id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = sorted(embeddings)
    if not ids:
        return []
    X = check_embedding_matrix([embeddings[i] for i in ids], unit=False)
    probs = classifier.predict_proba(X)[:, 1]
    order = sorted(range(len(ids)), key=lambda i: (-probs[i], ids[i]))[:k]
    return [RankedFinding(ids[i], "SMR", float(probs[i]), rank + 1) for rank, i in enumerate(order)]
