from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from sentinel.corpus import ActionRecord, ActionStore, EntityRef

# Hand-encoded fixture: a data query with its surrounding ticket workflow.
# Root at t=0; the same ticket was viewed 1.43h before by the acting agent,
# transferred 0.07h before, and viewed 18.75h / assigned 1.7h before by a
# second agent. Ticket actions reference the ticket, the acting agent, and
# the subject user the ticket pertains to.
ROOT_MS = int(dt.datetime(2026, 1, 7, 15, 0, tzinfo=dt.timezone.utc).timestamp() * 1000)
HOUR_MS = 3_600_000


def _hours(h: float) -> int:
    return round(h * HOUR_MS)


def _rec(aid, atype, start, refs, dur_ms=60_000):
    return ActionRecord(
        id=aid,
        action_type=atype,
        start_ms=start,
        end_ms=start + dur_ms,
        references=frozenset(EntityRef(*r) for r in refs),
    )


def fig1_records() -> list[ActionRecord]:
    ticket = ("ticket", "ticket.1", "object")
    subject = ("user", "user.1", "subject")
    return [
        _rec("fig-query", "DataTool.Query", ROOT_MS, [("agent", "agent.1", "actor"), subject]),
        _rec("fig-view-1", "TicketManagement.View", ROOT_MS - _hours(1.43), [("agent", "agent.1", "actor"), ticket, subject]),
        _rec("fig-transfer", "TicketManagement.Transfer", ROOT_MS - _hours(0.07), [("agent", "agent.1", "actor"), ticket, subject]),
        _rec("fig-view-2", "TicketManagement.View", ROOT_MS - _hours(18.75), [("agent", "agent.2", "actor"), ticket, subject]),
        _rec("fig-assign", "TicketManagement.Assign", ROOT_MS - _hours(1.7), [("agent", "agent.2", "actor"), ticket, subject]),
    ]


@pytest.fixture
def fig1_store() -> ActionStore:
    return ActionStore(fig1_records())


def random_corpus(rng: np.random.Generator, n_actions: int = 200) -> ActionStore:
    """A connected-ish random corpus over small entity and type pools."""
    types = ["DataTool.Query", "TicketManagement.View", "TicketManagement.Reply", "Email.Send"]
    rels = ["actor", "subject", "object", "cc"]
    entities = (
        [("agent", f"agent.{i}") for i in range(6)]
        + [("user", f"user.{i}") for i in range(8)]
        + [("ticket", f"ticket.{i}") for i in range(10)]
    )
    records = []
    for i in range(n_actions):
        start = int(rng.integers(0, 72 * HOUR_MS))
        n_refs = int(rng.integers(1, 4))
        chosen = rng.choice(len(entities), size=n_refs, replace=False)
        refs = {EntityRef(entities[j][0], entities[j][1], rels[int(rng.integers(0, len(rels)))]) for j in chosen}
        atype = types[int(rng.integers(0, len(types)))]
        if atype == "DataTool.Query":
            # queries are agent-on-user actions; guarantee both endpoints
            refs.add(EntityRef("agent", f"agent.{int(rng.integers(0, 6))}", "actor"))
            refs.add(EntityRef("user", f"user.{int(rng.integers(0, 8))}", "subject"))
        refs = frozenset(refs)
        records.append(
            ActionRecord(
                id=f"r{i:05d}",
                action_type=atype,
                start_ms=start,
                end_ms=start + int(rng.integers(0, HOUR_MS)),
                references=refs,
            )
        )
    return ActionStore(records)
