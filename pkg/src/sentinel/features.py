"""Handcrafted subgraph embeddings.

For each action type, count the non-root actions that share a user, an
agent, or both with the root action, together with the earliest and
latest start-time offsets (in hours) of those actions. All counts and
offsets pass through a signed log and the concatenated vector is
L2-normalized onto the unit sphere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from sentinel.sampler import RootedSubgraph
from sentinel.validation import check_subgraphs

SHARE_CLASSES = ("shares-user", "shares-agent", "shares-both")


class MissingRootEntity(ValueError):
    """Root action lacks an agent or user reference; the sensitive action is malformed."""


def signed_log(x: float) -> float:
    """sign(x) * ln(1 + |x|): odd, monotone, compresses large magnitudes."""
    return math.copysign(math.log1p(abs(x)), x)


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed vocabulary and layout of the handcrafted vector."""

    action_types: tuple[str, ...]
    share_classes: tuple[str, ...] = SHARE_CLASSES

    def __post_init__(self):
        if not self.action_types:
            raise ValueError("action_types must be non-empty")
        if len(set(self.action_types)) != len(self.action_types):
            raise ValueError("action_types contains duplicates")
        object.__setattr__(self, "action_types", tuple(self.action_types))

    @property
    def dimension(self) -> int:
        return 3 * len(self.share_classes) * len(self.action_types)

    def to_json(self) -> str:
        return json.dumps({"action_types": list(self.action_types)})

    @classmethod
    def from_json(cls, path: str) -> "FeatureSchema":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(action_types=tuple(obj["action_types"]))


def normalize_embedding(raw: np.ndarray) -> np.ndarray:
    """L2-normalize; the all-zero vector maps to the first basis vector."""
    raw = np.asarray(raw, dtype=np.float64)
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        out = np.zeros_like(raw)
        out[0] = 1.0
        return out
    return raw / norm


class HandcraftedEmbedder(BaseEstimator, TransformerMixin):
    """Embed rooted subgraphs with share-class count/extent features.

    Parameters
    ----------
    action_types : sequence of str, optional
        Feature vocabulary. When omitted, ``fit`` infers it as the sorted
        set of action types observed in the training subgraphs.
    agent_entity_type, user_entity_type : str
        Entity types identifying the root's agent and user.
    """

    def __init__(self, action_types=None, agent_entity_type="agent", user_entity_type="user"):
        self.action_types = action_types
        self.agent_entity_type = agent_entity_type
        self.user_entity_type = user_entity_type

    def fit(self, X, y=None):
        X = check_subgraphs(X)
        if self.action_types is not None:
            self.schema_ = FeatureSchema(action_types=tuple(self.action_types))
        else:
            seen = {a.action_type for g in X for a in g.actions}
            if not seen:
                raise ValueError("cannot infer action types from empty input")
            self.schema_ = FeatureSchema(action_types=tuple(sorted(seen)))
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "schema_"):
            raise RuntimeError("HandcraftedEmbedder is not fitted; call fit first")
        X = check_subgraphs(X)
        return np.stack([self.transform_one(g) for g in X]) if X else np.empty((0, self.schema_.dimension))

    def transform_one(self, g: RootedSubgraph) -> np.ndarray:
        return embed_subgraph(g, self.schema_, self.agent_entity_type, self.user_entity_type)


def _share_class(shares_user: bool, shares_agent: bool) -> str | None:
    if shares_user and shares_agent:
        return "shares-both"
    if shares_agent:
        return "shares-agent"
    if shares_user:
        return "shares-user"
    return None


def embed_subgraph(
    g: RootedSubgraph,
    schema: FeatureSchema,
    agent_entity_type: str = "agent",
    user_entity_type: str = "user",
) -> np.ndarray:
    """Compute one handcrafted embedding (unit-norm vector).

    Share classes are exclusive: an action sharing both the root's user
    and agent counts only under shares-both. The root itself is never
    counted. Offsets are start-to-start hours, negative before the root.
    """
    edges_by_action: dict[str, set[tuple[str, str]]] = {}
    for aid, etype, eid, _rel in g.edges:
        edges_by_action.setdefault(aid, set()).add((etype, eid))

    root_keys = edges_by_action.get(g.root_id, set())
    root_users = {k for k in root_keys if k[0] == user_entity_type}
    root_agents = {k for k in root_keys if k[0] == agent_entity_type}
    if not root_users or not root_agents:
        raise MissingRootEntity(
            f"root {g.root_id!r} lacks {'user' if not root_users else 'agent'} reference"
        )

    # (share_class, action_type) -> [count, min dh, max dh]
    stats: dict[tuple[str, str], list[float]] = {}
    for a in g.actions:
        if a.id == g.root_id:
            continue
        keys = edges_by_action.get(a.id, set())
        cls = _share_class(bool(keys & root_users), bool(keys & root_agents))
        if cls is None:
            continue
        dh = g.delta_hours(a)
        cell = stats.setdefault((cls, a.action_type), [0, math.inf, -math.inf])
        cell[0] += 1
        cell[1] = min(cell[1], dh)
        cell[2] = max(cell[2], dh)

    raw = np.zeros(schema.dimension)
    i = 0
    for cls in schema.share_classes:
        for atype in schema.action_types:
            cell = stats.get((cls, atype))
            if cell is not None:
                raw[i] = signed_log(cell[0])
                raw[i + 1] = signed_log(cell[1])
                raw[i + 2] = signed_log(cell[2])
            i += 3
    return normalize_embedding(raw)
