"""Synthetic support-agent workflow generator with seeded anomaly injection.

Each agent works tickets through create -> view -> (transfer) ->
reply/query templates, with per-agent timing, duration, and template
preferences so that workflows carry an agent signature. A configured
fraction of the sensitive roots (data queries) is generated under
anomaly templates that mirror the mutation catalog: a query with no
related ticket, a query against an unrelated user, and justification
that only happens after the query.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from sentinel.corpus import ActionRecord, EntityRef, serialize_action_record

QUERY_TYPE = "DataTool.Query"
CREATE_TYPE = "TicketManagement.Create"
VIEW_TYPE = "TicketManagement.View"
TRANSFER_TYPE = "TicketManagement.Transfer"
REPLY_TYPE = "TicketManagement.Reply"

ANOMALY_KINDS = ("no_ticket_context", "wrong_subject_user", "post_hoc_justification")

_BASE_MS = int(dt.datetime(2026, 1, 5, tzinfo=dt.timezone.utc).timestamp() * 1000)
_HOUR_MS = 3_600_000
_MINUTE_MS = 60_000

_DEFAULT_MIX = {"view_reply": 0.4, "view_query": 0.35, "view_transfer_query": 0.25}


@dataclass(frozen=True)
class SimConfig:
    agents: int = 20
    days: int = 5
    tickets_per_agent_day: float = 3.0
    workflow_mix: dict[str, float] = field(default_factory=lambda: dict(_DEFAULT_MIX))
    anomaly_prevalence: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.agents < 1 or self.days < 1:
            raise ValueError("agents and days must be positive")
        if self.tickets_per_agent_day <= 0:
            raise ValueError("tickets_per_agent_day must be positive")
        if not 0.0 <= self.anomaly_prevalence < 1.0:
            raise ValueError("anomaly_prevalence must be in [0, 1)")
        total = sum(self.workflow_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"workflow_mix weights must sum to 1, got {total}")
        if set(self.workflow_mix) - set(_DEFAULT_MIX):
            raise ValueError(f"unknown templates: {sorted(set(self.workflow_mix) - set(_DEFAULT_MIX))}")

    @classmethod
    def from_json(cls, path: str) -> "SimConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class _AgentStyle:
    """Per-agent workflow signature; this is what makes same-agent
    subgraphs resemble each other."""

    shift_start_h: float
    rate_mult: float
    view_delay_min: float  # mean minutes from create to first view
    act_delay_min: float  # mean minutes between workflow steps
    duration_min: float  # mean action duration minutes
    transfer_prob: float
    mix: np.ndarray  # per-template probabilities


class _Emitter:
    def __init__(self):
        self.records: list[ActionRecord] = []
        self._counter = 0

    def emit(self, action_type: str, start_ms: int, duration_ms: int, refs: list[EntityRef]) -> str:
        self._counter += 1
        aid = f"act-{self._counter:07d}"
        self.records.append(
            ActionRecord(
                id=aid,
                action_type=action_type,
                start_ms=int(start_ms),
                end_ms=int(start_ms) + max(0, int(duration_ms)),
                references=frozenset(refs),
            )
        )
        return aid


def _agent_styles(cfg: SimConfig, rng: np.random.Generator) -> list[_AgentStyle]:
    templates = sorted(_DEFAULT_MIX)
    base = np.array([cfg.workflow_mix.get(t, 0.0) for t in templates])
    styles = []
    for _ in range(cfg.agents):
        pref = rng.uniform(0.25, 1.75, size=len(templates)) ** 2
        mix = base * pref
        mix = mix / mix.sum() if mix.sum() > 0 else np.full(len(templates), 1.0 / len(templates))
        styles.append(
            _AgentStyle(
                shift_start_h=float(rng.uniform(5.0, 14.0)),
                rate_mult=float(rng.uniform(0.6, 1.5)),
                view_delay_min=float(rng.uniform(5.0, 240.0)),
                act_delay_min=float(rng.uniform(2.0, 45.0)),
                duration_min=float(rng.uniform(0.5, 12.0)),
                transfer_prob=float(rng.uniform(0.1, 0.9)),
                mix=mix,
            )
        )
    return styles


def _refs(agent: str | None, user: str | None, ticket: str | None) -> list[EntityRef]:
    out = []
    if agent is not None:
        out.append(EntityRef("agent", agent, "actor"))
    if user is not None:
        out.append(EntityRef("user", user, "subject"))
    if ticket is not None:
        out.append(EntityRef("ticket", ticket, "object"))
    return out


def generate(cfg: SimConfig) -> tuple[list[ActionRecord], dict[str, str]]:
    """Build the corpus and its ground truth (root id -> 'normal' or kind).

    Deterministic given cfg.seed; records come back sorted by (start, id).
    """
    rng = np.random.default_rng(cfg.seed)
    styles = _agent_styles(cfg, rng)
    emitter = _Emitter()
    truth: dict[str, str] = {}
    templates = sorted(_DEFAULT_MIX)

    user_pool = max(40, int(cfg.agents * cfg.days * cfg.tickets_per_agent_day / 3.0))
    ticket_counter = 0
    fresh_counter = 0

    def exp_minutes(mean: float) -> float:
        return float(rng.exponential(mean))

    def duration(style: _AgentStyle) -> int:
        return int(exp_minutes(style.duration_min) * _MINUTE_MS) + _MINUTE_MS // 2

    def emit_query(agent: str, user: str, t: int, style: _AgentStyle) -> str:
        return emitter.emit(QUERY_TYPE, t, duration(style), _refs(agent, user, None))

    for day in range(cfg.days):
        day_ms = _BASE_MS + day * 24 * _HOUR_MS
        for ai, style in enumerate(styles):
            agent = f"agent.{ai}"
            shift_ms = day_ms + int(style.shift_start_h * _HOUR_MS)
            n_tickets = int(rng.poisson(cfg.tickets_per_agent_day * style.rate_mult))
            arrivals = np.sort(rng.uniform(0.0, 8.0 * _HOUR_MS, size=n_tickets)).astype(np.int64)
            for arrival in arrivals:
                ticket_counter += 1
                ticket = f"ticket.{ticket_counter}"
                user = f"user.{int(rng.integers(0, user_pool))}"
                template = templates[int(rng.choice(len(templates), p=style.mix))]

                t_view = shift_ms + int(arrival)
                t_create = t_view - int(exp_minutes(style.view_delay_min) * _MINUTE_MS)
                emitter.emit(CREATE_TYPE, t_create, _MINUTE_MS, _refs(None, user, ticket))
                emitter.emit(VIEW_TYPE, t_view, duration(style), _refs(agent, user, ticket))
                t = t_view + int(exp_minutes(style.act_delay_min) * _MINUTE_MS)

                if template == "view_transfer_query" and rng.random() < max(style.transfer_prob, 0.5):
                    emitter.emit(TRANSFER_TYPE, t, _MINUTE_MS, _refs(agent, user, ticket))
                    t += int(exp_minutes(style.act_delay_min) * _MINUTE_MS)

                if template == "view_reply":
                    emitter.emit(REPLY_TYPE, t, duration(style), _refs(agent, user, ticket))
                    continue

                # sensitive root: normal query, or an anomaly template
                if rng.random() < cfg.anomaly_prevalence:
                    kind = ANOMALY_KINDS[int(rng.integers(0, len(ANOMALY_KINDS)))]
                    fresh_counter += 1
                    outsider = f"user.x{fresh_counter}"
                    if kind == "no_ticket_context":
                        t_q = shift_ms + int(rng.uniform(8.0, 11.0) * _HOUR_MS)
                        qid = emit_query(agent, outsider, t_q, style)
                    elif kind == "wrong_subject_user":
                        qid = emit_query(agent, outsider, t, style)
                    else:  # post_hoc_justification
                        qid = emit_query(agent, outsider, t, style)
                        ticket_counter += 1
                        late_ticket = f"ticket.{ticket_counter}"
                        t_after = t + int(exp_minutes(style.view_delay_min) * _MINUTE_MS) + _MINUTE_MS
                        emitter.emit(CREATE_TYPE, t_after, _MINUTE_MS, _refs(None, outsider, late_ticket))
                        emitter.emit(
                            VIEW_TYPE,
                            t_after + int(exp_minutes(style.act_delay_min) * _MINUTE_MS) + _MINUTE_MS,
                            duration(style),
                            _refs(agent, outsider, late_ticket),
                        )
                    truth[qid] = kind
                else:
                    qid = emit_query(agent, user, t, style)
                    truth[qid] = "normal"
                    if rng.random() < 0.5:
                        t_r = t + int(exp_minutes(style.act_delay_min) * _MINUTE_MS)
                        emitter.emit(REPLY_TYPE, t_r, duration(style), _refs(agent, user, ticket))

    records = sorted(emitter.records, key=lambda r: (r.start_ms, r.id))
    return records, truth


def write_corpus(records: list[ActionRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(serialize_action_record(rec) + "\n")


def write_truth(truth: dict[str, str], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dict(sorted(truth.items())), fh, indent=2)
        fh.write("\n")


def load_truth(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
