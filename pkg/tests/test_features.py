from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from sentinel.corpus import ActionRecord, ActionStore, EntityRef
from sentinel.features import (
    FeatureSchema,
    HandcraftedEmbedder,
    MissingRootEntity,
    embed_subgraph,
    normalize_embedding,
    signed_log,
)
from sentinel.sampler import SamplerConfig, sample_all, sample_rooted_subgraph
from conftest import random_corpus

FIG1_TYPES = ("DataTool.Query", "TicketManagement.Assign", "TicketManagement.Transfer", "TicketManagement.View")


def slog(x):
    return math.copysign(math.log1p(abs(x)), x)


class TestSignedLog:
    def test_fixed_point_zero(self):
        assert signed_log(0.0) == 0.0

    def test_analytic_values(self):
        assert signed_log(math.e - 1) == pytest.approx(1.0)
        assert signed_log(-3.0) == pytest.approx(-math.log(4.0))

    def test_odd_increasing_contractive(self):
        xs = np.linspace(-50, 50, 401)
        ys = [signed_log(x) for x in xs]
        for x, y in zip(xs, ys):
            assert signed_log(-x) == pytest.approx(-y)
            assert abs(y) <= abs(x) + 1e-12
        assert all(a < b for a, b in zip(ys, ys[1:]))


class TestFig1Embedding:
    def test_matches_hand_computation(self, fig1_store):
        cfg = SamplerConfig(sensitive_types=frozenset({"DataTool.Query"}))
        g = sample_rooted_subgraph(fig1_store, "fig-query", cfg)
        schema = FeatureSchema(action_types=FIG1_TYPES)

        raw = np.zeros(schema.dimension)
        # shares-user: assign (-1.7h), view2 (-18.75h)
        raw[3:6] = [slog(1), slog(g.delta_hours(fig1_store.actions["fig-assign"])),
                    slog(g.delta_hours(fig1_store.actions["fig-assign"]))]
        raw[9:12] = [slog(1), slog(g.delta_hours(fig1_store.actions["fig-view-2"])),
                     slog(g.delta_hours(fig1_store.actions["fig-view-2"]))]
        # shares-both: transfer (-0.07h), view1 (-1.43h)
        raw[30:33] = [slog(1), slog(g.delta_hours(fig1_store.actions["fig-transfer"])),
                      slog(g.delta_hours(fig1_store.actions["fig-transfer"]))]
        raw[33:36] = [slog(1), slog(g.delta_hours(fig1_store.actions["fig-view-1"])),
                      slog(g.delta_hours(fig1_store.actions["fig-view-1"]))]
        expected = raw / np.linalg.norm(raw)

        got = embed_subgraph(g, schema)
        np.testing.assert_allclose(got, expected, atol=1e-12)
        # the early view lands in shares-user (agent.2, not ours), at -18.75h
        assert got[10] * np.linalg.norm(raw) == pytest.approx(slog(-18.75), rel=1e-9)

    def test_share_classes_are_exclusive(self, fig1_store):
        cfg = SamplerConfig(sensitive_types=frozenset({"DataTool.Query"}))
        g = sample_rooted_subgraph(fig1_store, "fig-query", cfg)
        got = embed_subgraph(g, FeatureSchema(action_types=FIG1_TYPES))
        # shares-agent block (indices 12..23) stays empty: every agent-sharing
        # action here also shares the user
        assert np.all(got[12:24] == 0.0)


class TestEmbedder:
    def test_root_only_maps_to_basis_vector(self):
        rec = ActionRecord(
            "solo", "DataTool.Query", 0, 0,
            frozenset({EntityRef("agent", "a1", "actor"), EntityRef("user", "u1", "subject")}),
        )
        store = ActionStore([rec])
        g = sample_rooted_subgraph(store, "solo", SamplerConfig(sensitive_types=frozenset({"DataTool.Query"})))
        vec = embed_subgraph(g, FeatureSchema(action_types=("DataTool.Query",)))
        expected = np.zeros(9)
        expected[0] = 1.0
        np.testing.assert_array_equal(vec, expected)

    def test_missing_root_entity(self):
        rec = ActionRecord("solo", "DataTool.Query", 0, 0, frozenset({EntityRef("agent", "a1", "actor")}))
        store = ActionStore([rec])
        g = sample_rooted_subgraph(store, "solo", SamplerConfig(sensitive_types=frozenset({"DataTool.Query"})))
        with pytest.raises(MissingRootEntity):
            embed_subgraph(g, FeatureSchema(action_types=("DataTool.Query",)))

    def test_unit_norm_and_dimension(self):
        store = random_corpus(np.random.default_rng(41), 400)
        cfg = SamplerConfig(T=2, M=4, sensitive_types=frozenset({"DataTool.Query"}))
        subs = sample_all(store, cfg)
        emb = HandcraftedEmbedder().fit(subs)
        X = emb.transform(subs)
        assert X.shape == (len(subs), emb.schema_.dimension)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-6)

    def test_insertion_order_irrelevant(self):
        store = random_corpus(np.random.default_rng(43), 300)
        cfg = SamplerConfig(T=2, M=4, sensitive_types=frozenset({"DataTool.Query"}))
        g = sample_all(store, cfg)[0]
        shuffled = dataclasses.replace(
            g,
            actions=tuple(reversed(g.actions)),
            entities=tuple(reversed(g.entities)),
            edges=tuple(reversed(g.edges)),
        )
        schema = FeatureSchema(action_types=("DataTool.Query", "TicketManagement.View", "TicketManagement.Reply", "Email.Send"))
        np.testing.assert_array_equal(embed_subgraph(g, schema), embed_subgraph(shuffled, schema))

    def test_matches_double_loop_recount(self):
        store = random_corpus(np.random.default_rng(47), 400)
        cfg = SamplerConfig(T=2, M=4, sensitive_types=frozenset({"DataTool.Query"}))
        subs = sample_all(store, cfg)[:15]
        schema = FeatureSchema(action_types=("DataTool.Query", "TicketManagement.View", "TicketManagement.Reply", "Email.Send"))
        for g in subs:
            got = embed_subgraph(g, schema)
            want = _recount_oracle(g, schema)
            np.testing.assert_allclose(got, want, atol=1e-12)


def _recount_oracle(g, schema):
    """Independent naive recount: nested loops over actions x edges."""
    root_users, root_agents = set(), set()
    for aid, etype, eid, _rel in g.edges:
        if aid == g.root_id and etype == "user":
            root_users.add(eid)
        if aid == g.root_id and etype == "agent":
            root_agents.add(eid)
    values = []
    for cls in ("shares-user", "shares-agent", "shares-both"):
        for atype in schema.action_types:
            deltas = []
            for a in g.actions:
                if a.id == g.root_id or a.action_type != atype:
                    continue
                has_user = any(
                    e[1] == "user" and e[2] in root_users for e in g.edges if e[0] == a.id
                )
                has_agent = any(
                    e[1] == "agent" and e[2] in root_agents for e in g.edges if e[0] == a.id
                )
                if cls == "shares-both" and not (has_user and has_agent):
                    continue
                if cls == "shares-user" and not (has_user and not has_agent):
                    continue
                if cls == "shares-agent" and not (has_agent and not has_user):
                    continue
                deltas.append((a.start_ms - g.root.start_ms) / 3_600_000.0)
            if deltas:
                values.extend([slog(len(deltas)), slog(min(deltas)), slog(max(deltas))])
            else:
                values.extend([0.0, 0.0, 0.0])
    return normalize_embedding(np.array(values))
