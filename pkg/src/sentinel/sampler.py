"""Rooted-subgraph sampling: breadth-first expansion around sensitive actions.

Starting from a single root action, entities referenced by the root are
at step 1; expanding an entity adds, per action type, the M actions whose
start times are closest to the root's start. Entities found through those
actions sit one step further out, and only entities at step <= T are kept
and expanded. Entity types in ``blocked_after_first`` participate only at
step 1: discovered deeper, they (and their edges) are omitted.

Everything here is deterministic: waves are processed in sorted entity
order, types in sorted order, and closest-action ties break on
(smaller |delta start|, earlier start, lexicographic id).
"""

from __future__ import annotations

import datetime as dt
import json
from bisect import bisect_left
from dataclasses import dataclass, field

from sentinel.corpus import ActionRecord, ActionStore, EntityKey, select_roots

MS_PER_HOUR = 3_600_000.0

# One subgraph edge: (action id, entity type, entity id, relationship).
Edge = tuple[str, str, str, str]


class UnknownRoot(KeyError):
    """Requested root action id does not exist in the store."""


@dataclass(frozen=True)
class SamplerConfig:
    """Expansion parameters.

    T bounds how many steps out an entity may sit; M bounds how many
    closest actions each (entity, action type) slot contributes.
    """

    T: int = 2
    M: int = 10
    blocked_after_first: frozenset[str] = frozenset({"user"})
    sensitive_types: frozenset[str] = frozenset()
    agent_entity_type: str = "agent"

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        object.__setattr__(self, "blocked_after_first", frozenset(self.blocked_after_first))
        object.__setattr__(self, "sensitive_types", frozenset(self.sensitive_types))

    @classmethod
    def from_json(cls, path: str) -> "SamplerConfig":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        kwargs = {}
        for k in ("T", "M", "agent_entity_type"):
            if k in obj:
                kwargs[k] = obj[k]
        for k in ("blocked_after_first", "sensitive_types"):
            if k in obj:
                kwargs[k] = frozenset(obj[k])
        return cls(**kwargs)


@dataclass(frozen=True)
class RootedSubgraph:
    """A bipartite neighborhood around one root action.

    ``actions`` are full records sorted by (start, id); ``entities`` carry
    the BFS step at which each was reached; ``edges`` connect included
    actions to included entities only. ``agent_id`` and ``day`` identify
    the owning agent and the UTC day of the root, the key used to pair
    subgraphs during contrastive training.
    """

    root_id: str
    actions: tuple[ActionRecord, ...]
    entities: tuple[tuple[str, str, int], ...]  # (entity_type, entity_id, step)
    edges: tuple[Edge, ...]
    agent_id: str
    day: dt.date
    provenance: tuple[str, ...] = field(default=())

    @property
    def root(self) -> ActionRecord:
        for a in self.actions:
            if a.id == self.root_id:
                return a
        raise KeyError(self.root_id)

    def action_ids(self) -> set[str]:
        return {a.id for a in self.actions}

    def entity_keys(self) -> set[EntityKey]:
        return {(t, i) for t, i, _ in self.entities}

    def edges_of_action(self, action_id: str) -> list[Edge]:
        return [e for e in self.edges if e[0] == action_id]

    def delta_hours(self, action: ActionRecord) -> float:
        return (action.start_ms - self.root.start_ms) / MS_PER_HOUR

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        ids = self.action_ids()
        if self.root_id not in ids:
            raise ValueError("root action missing from subgraph")
        if len(ids) != len(self.actions):
            raise ValueError("duplicate actions in subgraph")
        keys = self.entity_keys()
        if len(keys) != len(self.entities):
            raise ValueError("duplicate entities in subgraph")
        for aid, etype, eid, _rel in self.edges:
            if aid not in ids:
                raise ValueError(f"edge references unknown action {aid!r}")
            if (etype, eid) not in keys:
                raise ValueError(f"edge references unknown entity {(etype, eid)!r}")
        # every non-root action reachable from the root through included edges
        adj_a: dict[str, set[EntityKey]] = {a: set() for a in ids}
        adj_e: dict[EntityKey, set[str]] = {k: set() for k in keys}
        for aid, etype, eid, _rel in self.edges:
            adj_a[aid].add((etype, eid))
            adj_e[(etype, eid)].add(aid)
        seen_a, seen_e = {self.root_id}, set()
        stack = [("a", self.root_id)]
        while stack:
            kind, node = stack.pop()
            if kind == "a":
                for k in adj_a[node]:
                    if k not in seen_e:
                        seen_e.add(k)
                        stack.append(("e", k))
            else:
                for a in adj_e[node]:
                    if a not in seen_a:
                        seen_a.add(a)
                        stack.append(("a", a))
        if seen_a != ids:
            raise ValueError(f"unreachable actions: {sorted(ids - seen_a)}")
        orphan = keys - seen_e
        if orphan:
            raise ValueError(f"entities with no edges: {sorted(orphan)}")

    def to_json(self) -> str:
        obj = {
            "root_id": self.root_id,
            "agent_id": self.agent_id,
            "day": self.day.isoformat(),
            "actions": [
                {
                    "id": a.id,
                    "type": a.action_type,
                    "start_ms": a.start_ms,
                    "end_ms": a.end_ms,
                    "refs": [
                        {"entity_type": r.entity_type, "entity_id": r.entity_id, "relationship": r.relationship}
                        for r in a.sorted_references()
                    ],
                }
                for a in self.actions
            ],
            "entities": [{"entity_type": t, "entity_id": i, "step": s} for t, i, s in self.entities],
            "edges": [
                {"action_id": a, "entity_type": t, "entity_id": i, "relationship": r} for a, t, i, r in self.edges
            ],
            "provenance": list(self.provenance),
        }
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "RootedSubgraph":
        obj = json.loads(text)
        actions = tuple(_record_from_obj(a) for a in obj["actions"])
        return cls(
            root_id=obj["root_id"],
            actions=actions,
            entities=tuple((e["entity_type"], e["entity_id"], e["step"]) for e in obj["entities"]),
            edges=tuple((e["action_id"], e["entity_type"], e["entity_id"], e["relationship"]) for e in obj["edges"]),
            agent_id=obj["agent_id"],
            day=dt.date.fromisoformat(obj["day"]),
            provenance=tuple(obj.get("provenance", ())),
        )


def _record_from_obj(a: dict) -> ActionRecord:
    from sentinel.corpus import EntityRef

    return ActionRecord(
        id=a["id"],
        action_type=a["type"],
        start_ms=a["start_ms"],
        end_ms=a["end_ms"],
        references=frozenset(EntityRef(r["entity_type"], r["entity_id"], r["relationship"]) for r in a["refs"]),
    )


def _entity_day(start_ms: int) -> dt.date:
    return dt.datetime.fromtimestamp(start_ms / 1000.0, tz=dt.timezone.utc).date()


def _select_closest(
    store: ActionStore,
    key: EntityKey,
    action_type: str,
    root_start: int,
    m: int,
    exclude: set[str],
) -> list[str]:
    """Up to m action ids referencing ``key`` of ``action_type``, closest to
    root_start, skipping ``exclude`` without consuming budget.

    The slot's index list is sorted by (start, id); candidates are taken by
    walking outward from the root start, comparing (|delta|, start, id).
    Runs of equal start are consumed left-to-right so ids stay ascending.
    """
    starts, ids = store.indexed(key, action_type)
    n = len(ids)
    if n == 0 or m == 0:
        return []
    pos = bisect_left(starts, root_start)
    picked: list[str] = []
    # group boundaries: [lo, hi) runs of one start value
    ri = pos
    li_hi = pos  # exclusive upper bound of the left group
    while len(picked) < m and (li_hi > 0 or ri < n):
        take_left = False
        if li_hi > 0 and ri < n:
            dl = root_start - starts[li_hi - 1]
            dr = starts[ri] - root_start
            # tie on |delta|: earlier start wins, i.e. the left side
            take_left = dl <= dr
        elif li_hi > 0:
            take_left = True
        if take_left:
            lo = li_hi - 1
            while lo > 0 and starts[lo - 1] == starts[li_hi - 1]:
                lo -= 1
            for i in range(lo, li_hi):  # ascending id within the run
                if len(picked) >= m:
                    break
                if ids[i] not in exclude:
                    picked.append(ids[i])
            li_hi = lo
        else:
            hi = ri + 1
            while hi < n and starts[hi] == starts[ri]:
                hi += 1
            for i in range(ri, hi):
                if len(picked) >= m:
                    break
                if ids[i] not in exclude:
                    picked.append(ids[i])
            ri = hi
    return picked


def sample_rooted_subgraph(store: ActionStore, root_id: str, cfg: SamplerConfig) -> RootedSubgraph:
    """Expand a single root action into its rooted subgraph."""
    if root_id not in store:
        raise UnknownRoot(root_id)
    root = store.actions[root_id]

    actions: dict[str, ActionRecord] = {root_id: root}
    entity_step: dict[EntityKey, int] = {}
    edges: set[Edge] = set()

    frontier: list[EntityKey] = []
    for ref in root.sorted_references():
        if ref.key not in entity_step:
            entity_step[ref.key] = 1
            frontier.append(ref.key)
        edges.add((root_id, ref.entity_type, ref.entity_id, ref.relationship))

    step = 1
    while frontier and step <= cfg.T:
        wave_actions: list[str] = []
        for key in sorted(frontier):
            for atype in store.action_types_for(key):
                for aid in _select_closest(store, key, atype, root.start_ms, cfg.M, set(actions)):
                    actions[aid] = store.actions[aid]
                    wave_actions.append(aid)
        next_frontier: list[EntityKey] = []
        next_step = step + 1
        for aid in wave_actions:
            for ref in store.actions[aid].sorted_references():
                if ref.key not in entity_step:
                    if next_step > cfg.T or ref.entity_type in cfg.blocked_after_first:
                        continue  # entity out of range: drop it and its edges
                    entity_step[ref.key] = next_step
                    next_frontier.append(ref.key)
                edges.add((aid, ref.entity_type, ref.entity_id, ref.relationship))
        frontier = next_frontier
        step = next_step

    agent_id = ""
    for ref in root.sorted_references():
        if ref.entity_type == cfg.agent_entity_type:
            agent_id = ref.entity_id
            break

    return RootedSubgraph(
        root_id=root_id,
        actions=tuple(sorted(actions.values(), key=lambda a: (a.start_ms, a.id))),
        entities=tuple(sorted((t, i, s) for (t, i), s in entity_step.items())),
        edges=tuple(sorted(edges)),
        agent_id=agent_id,
        day=_entity_day(root.start_ms),
    )


def sample_all(store: ActionStore, cfg: SamplerConfig) -> list[RootedSubgraph]:
    """One subgraph per sensitive root, in root (start, id) order."""
    return [sample_rooted_subgraph(store, rid, cfg) for rid in select_roots(store, set(cfg.sensitive_types))]
