"""Brute-force reference sampler: linear scans and global sorts instead of
the entity index and outward two-pointer walk. Shares only the wave and
slot ordering contract with the production sampler."""

from __future__ import annotations

from sentinel.corpus import ActionStore
from sentinel.sampler import SamplerConfig

Result = tuple[frozenset, frozenset, frozenset]  # action ids, (etype, eid, step), edges


def reference_sample(store: ActionStore, root_id: str, cfg: SamplerConfig) -> Result:
    root = store.actions[root_id]
    action_ids = {root_id}
    entity_step: dict[tuple[str, str], int] = {}
    edges = set()

    frontier = []
    for ref in sorted(root.references):
        if ref.key not in entity_step:
            entity_step[ref.key] = 1
            frontier.append(ref.key)
        edges.add((root_id, ref.entity_type, ref.entity_id, ref.relationship))

    step = 1
    while frontier and step <= cfg.T:
        new_actions = []
        for key in sorted(frontier):
            # enumerate every candidate action for this entity by linear scan
            by_type: dict[str, list] = {}
            for rec in store.actions.values():
                if any(r.key == key for r in rec.references):
                    by_type.setdefault(rec.action_type, []).append(rec)
            for atype in sorted(by_type):
                ranked = sorted(
                    by_type[atype],
                    key=lambda r: (abs(r.start_ms - root.start_ms), r.start_ms, r.id),
                )
                budget = cfg.M
                for rec in ranked:
                    if budget == 0:
                        break
                    if rec.id in action_ids:
                        continue
                    action_ids.add(rec.id)
                    new_actions.append(rec.id)
                    budget -= 1
        next_frontier = []
        for aid in new_actions:
            for ref in sorted(store.actions[aid].references):
                if ref.key not in entity_step:
                    if step + 1 > cfg.T or ref.entity_type in cfg.blocked_after_first:
                        continue
                    entity_step[ref.key] = step + 1
                    next_frontier.append(ref.key)
                edges.add((aid, ref.entity_type, ref.entity_id, ref.relationship))
        frontier = next_frontier
        step += 1

    return (
        frozenset(action_ids),
        frozenset((t, i, s) for (t, i), s in entity_step.items()),
        frozenset(edges),
    )


def as_result(subgraph) -> Result:
    return (
        frozenset(a.id for a in subgraph.actions),
        frozenset(subgraph.entities),
        frozenset(subgraph.edges),
    )
