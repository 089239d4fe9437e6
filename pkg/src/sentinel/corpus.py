"""Action-record parsing, validation, and the on-disk graph store.

The corpus is a JSON-lines file of action records. Each record is one
node of the action partition of a bipartite graph; its references name
the entity nodes it touches. Entities have no records of their own:
they are materialized from references at index time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

EntityKey = tuple[str, str]  # (entity_type, entity_id)

_RECORD_KEYS = {"id", "type", "start_ms", "end_ms", "refs"}
_REF_KEYS = {"entity_type", "entity_id", "relationship"}


class MalformedRecord(ValueError):
    """A corpus line that cannot be parsed into a valid action record.

    Carries the byte offset of the offending line (when known) and a
    human-readable reason.
    """

    def __init__(self, reason: str, offset: int | None = None, line_no: int | None = None):
        self.reason = reason
        self.offset = offset
        self.line_no = line_no
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{reason}{suffix}")


class DuplicateActionId(ValueError):
    """Two corpus records share an id."""


@dataclass(frozen=True, order=True)
class EntityRef:
    """A typed link from an action to one entity, annotated with a relationship."""

    entity_type: str
    entity_id: str
    relationship: str

    def __post_init__(self):
        if not (self.entity_type and self.entity_id and self.relationship):
            raise ValueError("entity reference fields must be non-empty")

    @property
    def key(self) -> EntityKey:
        return (self.entity_type, self.entity_id)


@dataclass(frozen=True)
class ActionRecord:
    """One logged action: a typed, time-bounded event referencing entities."""

    id: str
    action_type: str
    start_ms: int
    end_ms: int
    references: frozenset[EntityRef] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.id:
            raise ValueError("action id must be non-empty")
        if not self.action_type:
            raise ValueError("action type must be non-empty")
        if self.start_ms > self.end_ms:
            raise ValueError(f"action {self.id!r}: start {self.start_ms} > end {self.end_ms}")
        if not self.references:
            raise ValueError(f"action {self.id!r}: references must be non-empty")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def sorted_references(self) -> list[EntityRef]:
        return sorted(self.references)


def parse_action_record(line: str, offset: int | None = None, line_no: int | None = None) -> ActionRecord:
    """Parse one JSON line into a validated ActionRecord.

    Raises MalformedRecord on bad syntax, unknown or missing keys,
    start > end, empty references, or duplicate reference triples.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", offset, line_no) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object", offset, line_no)

    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise MalformedRecord(f"unknown keys: {sorted(unknown)}", offset, line_no)
    missing = _RECORD_KEYS - set(obj)
    if missing:
        raise MalformedRecord(f"missing keys: {sorted(missing)}", offset, line_no)

    if not isinstance(obj["id"], str) or not isinstance(obj["type"], str):
        raise MalformedRecord("id and type must be strings", offset, line_no)
    # bool is an int subclass; reject it explicitly
    for k in ("start_ms", "end_ms"):
        if not isinstance(obj[k], int) or isinstance(obj[k], bool):
            raise MalformedRecord(f"{k} must be an integer (epoch milliseconds)", offset, line_no)
    if not isinstance(obj["refs"], list):
        raise MalformedRecord("refs must be an array", offset, line_no)

    refs = []
    for i, r in enumerate(obj["refs"]):
        if not isinstance(r, dict) or set(r) != _REF_KEYS:
            raise MalformedRecord(f"refs[{i}] must have exactly keys {sorted(_REF_KEYS)}", offset, line_no)
        if not all(isinstance(r[k], str) for k in _REF_KEYS):
            raise MalformedRecord(f"refs[{i}] fields must be strings", offset, line_no)
        try:
            refs.append(EntityRef(r["entity_type"], r["entity_id"], r["relationship"]))
        except ValueError as exc:
            raise MalformedRecord(f"refs[{i}]: {exc}", offset, line_no) from exc
    if len(set(refs)) != len(refs):
        raise MalformedRecord("duplicate reference triples", offset, line_no)

    try:
        return ActionRecord(
            id=obj["id"],
            action_type=obj["type"],
            start_ms=obj["start_ms"],
            end_ms=obj["end_ms"],
            references=frozenset(refs),
        )
    except ValueError as exc:
        raise MalformedRecord(str(exc), offset, line_no) from exc


def serialize_action_record(record: ActionRecord) -> str:
    """Render a record as one canonical JSON line (refs sorted, no whitespace)."""
    obj = {
        "id": record.id,
        "type": record.action_type,
        "start_ms": record.start_ms,
        "end_ms": record.end_ms,
        "refs": [
            {"entity_type": r.entity_type, "entity_id": r.entity_id, "relationship": r.relationship}
            for r in record.sorted_references()
        ],
    }
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)


class ActionStore:
    """Immutable in-memory corpus with an entity index.

    ``entity_index[(entity_type, entity_id)][action_type]`` lists the ids
    of the actions of that type referencing that entity, sorted ascending
    by (start, id). The index covers exactly the references present in
    ``actions``; it is what makes closest-in-time subgraph expansion cheap.
    """

    def __init__(self, records: list[ActionRecord] | None = None):
        self.actions: dict[str, ActionRecord] = {}
        # (entity_type, entity_id) -> action_type -> parallel (starts, ids) sorted by (start, id)
        self._index: dict[EntityKey, dict[str, tuple[list[int], list[str]]]] = {}
        if records:
            for rec in records:
                self._add(rec)
            self._finalize()

    def _add(self, rec: ActionRecord) -> None:
        if rec.id in self.actions:
            raise DuplicateActionId(f"duplicate action id {rec.id!r}")
        self.actions[rec.id] = rec
        # two relationships to one entity still index the action once
        for key in {ref.key for ref in rec.references}:
            by_type = self._index.setdefault(key, {})
            starts, ids = by_type.setdefault(rec.action_type, ([], []))
            starts.append(rec.start_ms)
            ids.append(rec.id)

    def _finalize(self) -> None:
        for by_type in self._index.values():
            for atype, (starts, ids) in by_type.items():
                order = sorted(range(len(ids)), key=lambda i: (starts[i], ids[i]))
                by_type[atype] = ([starts[i] for i in order], [ids[i] for i in order])

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, action_id: str) -> bool:
        return action_id in self.actions

    @property
    def entity_index(self) -> dict[EntityKey, dict[str, list[str]]]:
        """Public view of the index: entity key -> action type -> sorted ids."""
        return {key: {t: list(ids) for t, (_, ids) in by_type.items()} for key, by_type in self._index.items()}

    def entity_keys(self) -> list[EntityKey]:
        return sorted(self._index)

    def action_types_for(self, key: EntityKey) -> list[str]:
        """Action types referencing an entity, sorted."""
        return sorted(self._index.get(key, ()))

    def indexed(self, key: EntityKey, action_type: str) -> tuple[list[int], list[str]]:
        """(starts, ids) for one (entity, action type) slot, sorted by (start, id)."""
        return self._index.get(key, {}).get(action_type, ([], []))


def load_corpus(path: str) -> ActionStore:
    """Load a JSON-lines corpus file into an ActionStore.

    Blank lines are not permitted. Errors carry the 1-based line number
    and the byte offset of the offending line.
    """
    store = ActionStore()
    offset = 0
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.decode("utf-8").strip("\r\n")
            if text.strip() == "":
                raise MalformedRecord("blank line", offset, line_no)
            rec = parse_action_record(text, offset=offset, line_no=line_no)
            if rec.id in store.actions:
                raise DuplicateActionId(f"duplicate action id {rec.id!r} at line {line_no}")
            store._add(rec)
            offset += len(raw)
    store._finalize()
    return store


def select_roots(store: ActionStore, sensitive_types: set[str]) -> list[str]:
    """Ids of actions whose type is sensitive, sorted by (start, id)."""
    hits = [rec for rec in store.actions.values() if rec.action_type in sensitive_types]
    hits.sort(key=lambda r: (r.start_ms, r.id))
    return [r.id for r in hits]
