"""Learned subgraph embeddings via bipartite graph attention.

Each convolution round lets entities attend to their linked actions and
then actions attend to their linked entities, with GATv2-order scoring
(a learned vector applied to a nonlinearity of a learned transform of
the endpoint features). A global node, initialized from the root
action's convolved state, then attends to all nodes for a number of
readout rounds; its L2-normalized state is the embedding.

Training is contrastive: pairs rooted on the same agent and the same
UTC day are pulled together, uniformly random pairs pushed apart.
Model selection maximizes the cross entropy between the two resulting
distance distributions, not the training loss.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from sentinel import neuralnet as nn
from sentinel.features import signed_log
from sentinel.neuralnet import Adam, LossConfig, Parameters, Tensor
from sentinel.sampler import MS_PER_HOUR, RootedSubgraph
from sentinel.validation import check_subgraphs


class NoPositivePairs(ValueError):
    """No (agent, day) group has two subgraphs; same-context pairs cannot be drawn."""


@dataclass(frozen=True)
class GnnHyperparams:
    embedding_dim: int = 32
    conv_layers: int = 2
    attention_heads: int = 2
    readout_rounds: int = 2
    loss: LossConfig = field(default_factory=LossConfig)
    steps: int = 400
    batch_size: int = 16
    learning_rate: float = 3e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("embedding_dim", "conv_layers", "attention_heads", "readout_rounds", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.embedding_dim % self.attention_heads != 0:
            raise ValueError("embedding_dim must be divisible by attention_heads")


@dataclass(frozen=True)
class EncoderConfig:
    """Input featurization: hashed vocabularies tolerate unseen strings."""

    hash_buckets: int = 64
    max_step: int = 4

    @property
    def action_dim(self) -> int:
        return self.hash_buckets + 2  # type one-hot ++ signed-log dstart, duration

    @property
    def entity_dim(self) -> int:
        return self.hash_buckets + self.max_step  # type one-hot ++ step one-hot

    @property
    def edge_dim(self) -> int:
        return self.hash_buckets  # relationship one-hot


def _bucket(value: str, buckets: int) -> int:
    digest = hashlib.blake2b(value.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % buckets


@dataclass(frozen=True)
class GraphEncoding:
    """Canonically ordered numeric view of one subgraph."""

    actions: np.ndarray  # (na, action_dim)
    entities: np.ndarray  # (ne, entity_dim)
    edge_bucket: np.ndarray  # (E,) hashed relationship per edge
    edge_action: np.ndarray  # (E,) indices into actions
    edge_entity: np.ndarray  # (E,) indices into entities
    root_index: int


def encode_features(g: RootedSubgraph, cfg: EncoderConfig = EncoderConfig()) -> GraphEncoding:
    """Deterministic encoding; node order is canonical, not insertion order."""
    actions = sorted(g.actions, key=lambda a: (a.start_ms, a.id))
    entities = sorted(g.entities)
    edges = sorted(g.edges)
    a_index = {a.id: i for i, a in enumerate(actions)}
    e_index = {(t, i): j for j, (t, i, _s) in enumerate(entities)}
    root = g.root

    act = np.zeros((len(actions), cfg.action_dim))
    for i, a in enumerate(actions):
        act[i, _bucket(a.action_type, cfg.hash_buckets)] = 1.0
        act[i, cfg.hash_buckets] = signed_log((a.start_ms - root.start_ms) / MS_PER_HOUR)
        act[i, cfg.hash_buckets + 1] = signed_log(a.duration_ms / MS_PER_HOUR)

    ent = np.zeros((len(entities), cfg.entity_dim))
    for j, (etype, _eid, step) in enumerate(entities):
        ent[j, _bucket(etype, cfg.hash_buckets)] = 1.0
        ent[j, cfg.hash_buckets + min(step, cfg.max_step) - 1] = 1.0

    ebucket = np.zeros(len(edges), dtype=np.intp)
    e_act = np.zeros(len(edges), dtype=np.intp)
    e_ent = np.zeros(len(edges), dtype=np.intp)
    for k, (aid, etype, eid, rel) in enumerate(edges):
        ebucket[k] = _bucket(rel, cfg.hash_buckets)
        e_act[k] = a_index[aid]
        e_ent[k] = e_index[(etype, eid)]

    return GraphEncoding(act, ent, ebucket, e_act, e_ent, a_index[g.root_id])


@dataclass(frozen=True)
class _Union:
    """Disjoint union of graph encodings; one forward pass embeds them all."""

    actions: np.ndarray
    entities: np.ndarray
    edge_bucket: np.ndarray
    edge_action: np.ndarray
    edge_entity: np.ndarray
    action_gid: np.ndarray
    entity_gid: np.ndarray
    roots: np.ndarray
    num_graphs: int


def _union_of(encodings: list[GraphEncoding]) -> _Union:
    a_off = e_off = 0
    acts, ents, ebuckets, eas, ees, agids, egids, roots = [], [], [], [], [], [], [], []
    for gid, enc in enumerate(encodings):
        acts.append(enc.actions)
        ents.append(enc.entities)
        ebuckets.append(enc.edge_bucket)
        eas.append(enc.edge_action + a_off)
        ees.append(enc.edge_entity + e_off)
        agids.append(np.full(len(enc.actions), gid, dtype=np.intp))
        egids.append(np.full(len(enc.entities), gid, dtype=np.intp))
        roots.append(enc.root_index + a_off)
        a_off += len(enc.actions)
        e_off += len(enc.entities)
    return _Union(
        np.concatenate(acts),
        np.concatenate(ents),
        np.concatenate(ebuckets),
        np.concatenate(eas),
        np.concatenate(ees),
        np.concatenate(agids),
        np.concatenate(egids),
        np.asarray(roots, dtype=np.intp),
        len(encodings),
    )


# ---------------------------------------------------------------------------
# parameters and forward pass
# ---------------------------------------------------------------------------


def init_gnn_params(hp: GnnHyperparams, enc: EncoderConfig, rng: np.random.Generator) -> Parameters:
    d = hp.embedding_dim
    heads, head_dim = hp.attention_heads, hp.embedding_dim // hp.attention_heads
    arrays: dict[str, np.ndarray] = {
        "in.act.w": nn.glorot_uniform(rng, (enc.action_dim, d)),
        "in.act.b": np.zeros(d),
        "in.ent.w": nn.glorot_uniform(rng, (enc.entity_dim, d)),
        "in.ent.b": np.zeros(d),
    }

    def attention_block(prefix: str, with_edges: bool):
        arrays[f"{prefix}.wt"] = nn.glorot_uniform(rng, (d, d))
        arrays[f"{prefix}.ws"] = nn.glorot_uniform(rng, (d, d))
        if with_edges:
            arrays[f"{prefix}.wr"] = nn.glorot_uniform(rng, (enc.edge_dim, d))
        arrays[f"{prefix}.att"] = nn.glorot_uniform(rng, (heads, head_dim))
        arrays[f"{prefix}.wv"] = nn.glorot_uniform(rng, (d, d))
        arrays[f"{prefix}.wo"] = nn.glorot_uniform(rng, (d, d))
        arrays[f"{prefix}.wu"] = nn.glorot_uniform(rng, (d, d))
        arrays[f"{prefix}.b"] = np.zeros(d)

    for layer in range(hp.conv_layers):
        attention_block(f"conv{layer}.ent", with_edges=True)  # entities attend to actions
        attention_block(f"conv{layer}.act", with_edges=True)  # actions attend to entities
    arrays["global.w"] = nn.glorot_uniform(rng, (d, d))
    arrays["global.b"] = np.zeros(d)
    for r in range(hp.readout_rounds):
        attention_block(f"read{r}", with_edges=False)
    return Parameters(arrays)


def _attend(
    params: Parameters,
    prefix: str,
    h_tgt: Tensor,
    h_src: Tensor,
    tgt_idx: np.ndarray,
    src_idx: np.ndarray | None,
    edge_bucket: np.ndarray | None,
    num_tgt: int,
    heads: int,
) -> Tensor:
    """One multi-head GATv2-style attention update of the target nodes.

    src_idx None means every source row is its own edge endpoint.
    Projections run in node space and are gathered to edge space after.
    """
    n_edges = len(tgt_idx)
    head_dim = h_tgt.shape[-1] // heads
    q = nn.gather_rows(h_tgt @ params[f"{prefix}.wt"], tgt_idx)
    ks = h_src @ params[f"{prefix}.ws"]
    k = ks if src_idx is None else nn.gather_rows(ks, src_idx)
    z = q + k
    if edge_bucket is not None:
        # relationship one-hot times wr is a row lookup
        z = z + nn.gather_rows(params[f"{prefix}.wr"], edge_bucket)
    z = nn.reshape(nn.leaky_relu(z), (n_edges, heads, head_dim))
    scores = nn.sum_last(z * params[f"{prefix}.att"])  # (E, heads)
    alpha = nn.segment_softmax(scores, tgt_idx, num_tgt)
    vs = h_src @ params[f"{prefix}.wv"]
    vals = nn.reshape(vs if src_idx is None else nn.gather_rows(vs, src_idx), (n_edges, heads, head_dim))
    msg = nn.reshape(alpha, (n_edges, heads, 1)) * vals
    agg = nn.reshape(nn.segment_sum(msg, tgt_idx, num_tgt), (num_tgt, heads * head_dim))
    return nn.tanh(agg @ params[f"{prefix}.wo"] + h_tgt @ params[f"{prefix}.wu"] + params[f"{prefix}.b"])


def gnn_forward(params: Parameters, union: _Union, hp: GnnHyperparams) -> Tensor:
    """Embed every graph in the union; returns a (num_graphs, dim) tensor of unit rows."""
    h_act = nn.tanh(nn.constant(union.actions) @ params["in.act.w"] + params["in.act.b"])
    h_ent = nn.tanh(nn.constant(union.entities) @ params["in.ent.w"] + params["in.ent.b"])

    for layer in range(hp.conv_layers):
        h_ent = _attend(
            params, f"conv{layer}.ent", h_ent, h_act,
            union.edge_entity, union.edge_action, union.edge_bucket,
            len(union.entities), hp.attention_heads,
        )
        h_act = _attend(
            params, f"conv{layer}.act", h_act, h_ent,
            union.edge_action, union.edge_entity, union.edge_bucket,
            len(union.actions), hp.attention_heads,
        )

    g = nn.tanh(nn.gather_rows(h_act, union.roots) @ params["global.w"] + params["global.b"])
    nodes = nn.concat([h_act, h_ent], axis=0)
    node_gid = np.concatenate([union.action_gid, union.entity_gid])
    for r in range(hp.readout_rounds):
        g = _attend(params, f"read{r}", g, nodes, node_gid, None, None, union.num_graphs, hp.attention_heads)
    return nn.l2_normalize_rows(g)


def gnn_embed(params: Parameters, g: RootedSubgraph, hp: GnnHyperparams, enc: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Unit-norm embedding of a single subgraph."""
    out = gnn_forward(params, _union_of([encode_features(g, enc)]), hp)
    return _unit_rows(out.data)[0]


def _unit_rows(raw: np.ndarray) -> np.ndarray:
    # the smooth normalizer leaves a degenerate row near zero; map it to e0
    out = raw.copy()
    bad = np.linalg.norm(out, axis=-1) < 0.5
    if np.any(bad):
        out[bad] = 0.0
        out[bad, 0] = 1.0
    return out


# ---------------------------------------------------------------------------
# pair sampling and training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairSample:
    a: RootedSubgraph
    b: RootedSubgraph
    y: int  # 0: same agent and day, 1: independent uniform draws


def group_by_agent_day(subgraphs: list[RootedSubgraph]) -> dict[tuple[str, str], list[str]]:
    groups: dict[tuple[str, str], list[str]] = {}
    for g in subgraphs:
        groups.setdefault((g.agent_id, g.day.isoformat()), []).append(g.root_id)
    for ids in groups.values():
        ids.sort()
    return groups


def sample_pair(
    pool: dict[str, RootedSubgraph],
    groups: dict[tuple[str, str], list[str]],
    phi: float,
    rng: np.random.Generator,
) -> PairSample:
    """Draw one training pair: y ~ Bernoulli(phi); y=1 uniform over all
    subgraphs (independently, so both sides may coincide); y=0 a uniform
    eligible group then two distinct members."""
    all_ids = sorted(pool)
    if rng.random() < phi:
        i, j = rng.integers(0, len(all_ids)), rng.integers(0, len(all_ids))
        return PairSample(pool[all_ids[i]], pool[all_ids[j]], 1)
    eligible = sorted(k for k, ids in groups.items() if len(ids) >= 2)
    if not eligible:
        raise NoPositivePairs("no (agent, day) group has >= 2 subgraphs")
    key = eligible[rng.integers(0, len(eligible))]
    ids = groups[key]
    i, j = rng.choice(len(ids), size=2, replace=False)
    return PairSample(pool[ids[i]], pool[ids[j]], 0)


def pair_batch_loss(
    params: Parameters,
    batch: list[PairSample],
    hp: GnnHyperparams,
    enc: EncoderConfig,
    cache: dict[str, GraphEncoding],
) -> Tensor:
    """Mean contrastive Huber loss over a batch of pairs."""

    def encoded(g: RootedSubgraph) -> GraphEncoding:
        hit = cache.get(g.root_id)
        if hit is None:
            hit = cache[g.root_id] = encode_features(g, enc)
        return hit

    union = _union_of([encoded(p.a) for p in batch] + [encoded(p.b) for p in batch])
    emb = gnn_forward(params, union, hp)
    n = len(batch)
    za = nn.gather_rows(emb, np.arange(n))
    zb = nn.gather_rows(emb, np.arange(n, 2 * n))
    d = nn.rowwise_distance(za, zb)
    targets = hp.loss.target_separation * np.array([p.y for p in batch], dtype=np.float64)
    residual = d + nn.constant(-targets)
    return nn.mean(nn.huber_loss(residual, hp.loss.delta))


def train_gnn(
    subgraphs: list[RootedSubgraph],
    hp: GnnHyperparams,
    enc: EncoderConfig = EncoderConfig(),
) -> tuple[Parameters, list[float]]:
    """Contrastive training; returns final parameters and the loss curve."""
    subgraphs = check_subgraphs(subgraphs)
    pool = {g.root_id: g for g in subgraphs}
    groups = group_by_agent_day(subgraphs)
    rng = np.random.default_rng(hp.seed)
    params = init_gnn_params(hp, enc, rng)
    optimizer = Adam(params, lr=hp.learning_rate)
    cache: dict[str, GraphEncoding] = {}
    losses: list[float] = []
    for _ in range(hp.steps):
        batch = [sample_pair(pool, groups, hp.loss.phi, rng) for _ in range(hp.batch_size)]
        params, loss = nn.train_step(params, batch, optimizer, lambda p, b: pair_batch_loss(p, b, hp, enc, cache))
        losses.append(loss)
    return params, losses


# ---------------------------------------------------------------------------
# model selection
# ---------------------------------------------------------------------------

_SELECTION_BINS = 32
_DISTANCE_SUPPORT = (0.0, 2.0)


def distance_cross_entropy(n_distances, p_distances, num_bins: int = _SELECTION_BINS) -> float:
    """Cross entropy of the same-context distance density evaluated on
    random-pair distances: a histogram over [0, 2] with +1 smoothing per
    bin, scored as the mean negative log density at each P distance."""
    n_distances = np.asarray(n_distances, dtype=np.float64)
    p_distances = np.asarray(p_distances, dtype=np.float64)
    if n_distances.size == 0 or p_distances.size == 0:
        raise ValueError("both distance sets must be non-empty")
    lo, hi = _DISTANCE_SUPPORT
    width = (hi - lo) / num_bins
    idx_n = np.clip(((n_distances - lo) / width).astype(int), 0, num_bins - 1)
    counts = np.bincount(idx_n, minlength=num_bins).astype(np.float64)
    density = (counts + 1.0) / (counts.sum() + num_bins) / width
    idx_p = np.clip(((p_distances - lo) / width).astype(int), 0, num_bins - 1)
    return float(np.mean(-np.log(density[idx_p])))


def pair_distances(
    params: Parameters,
    pairs: list[PairSample],
    hp: GnnHyperparams,
    enc: EncoderConfig = EncoderConfig(),
) -> np.ndarray:
    if not pairs:
        return np.empty(0)
    cache: dict[str, GraphEncoding] = {}

    def encoded(g):
        hit = cache.get(g.root_id)
        if hit is None:
            hit = cache[g.root_id] = encode_features(g, enc)
        return hit

    union = _union_of([encoded(p.a) for p in pairs] + [encoded(p.b) for p in pairs])
    emb = _unit_rows(gnn_forward(params, union, hp).data)
    n = len(pairs)
    return np.linalg.norm(emb[:n] - emb[n:], axis=1)


def model_selection_score(
    params: Parameters,
    n_pairs: list[PairSample],
    p_pairs: list[PairSample],
    hp: GnnHyperparams,
    enc: EncoderConfig = EncoderConfig(),
) -> float:
    """The hyperparameter-search objective (higher is better)."""
    return distance_cross_entropy(
        pair_distances(params, n_pairs, hp, enc),
        pair_distances(params, p_pairs, hp, enc),
    )


def build_eval_pairs(
    subgraphs: list[RootedSubgraph],
    num_pairs: int,
    rng: np.random.Generator,
) -> tuple[list[PairSample], list[PairSample]]:
    """Matched sets of same-context (N) and uniform (P) evaluation pairs."""
    pool = {g.root_id: g for g in subgraphs}
    groups = group_by_agent_day(subgraphs)
    if not any(len(ids) >= 2 for ids in groups.values()):
        raise NoPositivePairs("no (agent, day) group has >= 2 subgraphs")
    n_pairs, p_pairs = [], []
    for _ in range(num_pairs):
        eligible = sorted(k for k, ids in groups.items() if len(ids) >= 2)
        key = eligible[rng.integers(0, len(eligible))]
        ids = groups[key]
        i, j = rng.choice(len(ids), size=2, replace=False)
        n_pairs.append(PairSample(pool[ids[i]], pool[ids[j]], 0))
        all_ids = sorted(pool)
        a, b = rng.integers(0, len(all_ids)), rng.integers(0, len(all_ids))
        p_pairs.append(PairSample(pool[all_ids[a]], pool[all_ids[b]], 1))
    return n_pairs, p_pairs


# ---------------------------------------------------------------------------
# estimator and hyperparameter search
# ---------------------------------------------------------------------------


class GnnEmbedder(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper: fit trains the contrastive GNN, transform embeds."""

    def __init__(
        self,
        embedding_dim: int = 32,
        conv_layers: int = 2,
        attention_heads: int = 2,
        readout_rounds: int = 2,
        huber_delta: float = 1.0,
        target_separation: float = 2.0,
        phi: float = 0.5,
        steps: int = 400,
        batch_size: int = 16,
        learning_rate: float = 3e-3,
        seed: int = 0,
        hash_buckets: int = 64,
        max_step: int = 4,
    ):
        self.embedding_dim = embedding_dim
        self.conv_layers = conv_layers
        self.attention_heads = attention_heads
        self.readout_rounds = readout_rounds
        self.huber_delta = huber_delta
        self.target_separation = target_separation
        self.phi = phi
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.hash_buckets = hash_buckets
        self.max_step = max_step

    @property
    def hyperparams(self) -> GnnHyperparams:
        return GnnHyperparams(
            embedding_dim=self.embedding_dim,
            conv_layers=self.conv_layers,
            attention_heads=self.attention_heads,
            readout_rounds=self.readout_rounds,
            loss=LossConfig(delta=self.huber_delta, target_separation=self.target_separation, phi=self.phi),
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )

    @property
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(hash_buckets=self.hash_buckets, max_step=self.max_step)

    def fit(self, X, y=None):
        self.params_, self.loss_curve_ = train_gnn(check_subgraphs(X), self.hyperparams, self.encoder_config)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise RuntimeError("GnnEmbedder is not fitted; call fit first")
        X = check_subgraphs(X)
        if not X:
            return np.empty((0, self.embedding_dim))
        enc = self.encoder_config
        union = _union_of([encode_features(g, enc) for g in X])
        return _unit_rows(gnn_forward(self.params_, union, self.hyperparams).data)

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        self.params_.save(os.path.join(directory, "params"))
        meta = {k: v for k, v in self.get_params().items()}
        with open(os.path.join(directory, "model.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "GnnEmbedder":
        with open(os.path.join(directory, "model.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        model = cls(**meta)
        model.params_ = Parameters.load(os.path.join(directory, "params"))
        model.loss_curve_ = []
        return model


@dataclass(frozen=True)
class Trial:
    index: int
    hyperparams: GnnHyperparams
    score: float
    final_loss: float


def _draw_hyperparams(space: dict[str, list], seed: int, rng: np.random.Generator) -> GnnHyperparams:
    hp = GnnHyperparams(seed=seed)
    loss_kwargs = {}
    for key in ("delta", "target_separation", "phi"):
        if key in space:
            loss_kwargs[key] = space[key][rng.integers(0, len(space[key]))]
    if loss_kwargs:
        hp = replace(hp, loss=replace(hp.loss, **loss_kwargs))
    direct = {k: v for k, v in space.items() if k not in ("delta", "target_separation", "phi")}
    for key in sorted(direct):
        hp = replace(hp, **{key: direct[key][rng.integers(0, len(direct[key]))]})
    return hp


def hyperparameter_search(
    subgraphs: list[RootedSubgraph],
    space: dict[str, list],
    budget: int,
    seed: int,
    eval_pairs: int = 200,
    enc: EncoderConfig = EncoderConfig(),
) -> tuple[GnnHyperparams, Parameters, list[Trial]]:
    """Random search over ``space``; the winner maximizes the selection score
    on held-out pairs. Deterministic given ``seed``: ties keep the earliest
    trial."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    subgraphs = check_subgraphs(subgraphs)

    # split whole (agent, day) groups so held-out positives exist
    master = np.random.default_rng(seed)
    groups = group_by_agent_day(subgraphs)
    keys = sorted(groups)
    master.shuffle(keys)
    n_val = max(1, len(keys) // 5)
    if not any(len(groups[k]) >= 2 for k in keys[:n_val]):
        swap = next((j for j in range(n_val, len(keys)) if len(groups[keys[j]]) >= 2), None)
        if swap is None:
            raise NoPositivePairs("no (agent, day) group has >= 2 subgraphs")
        keys[0], keys[swap] = keys[swap], keys[0]
    val_keys = set(keys[:n_val])
    by_id = {g.root_id: g for g in subgraphs}
    val_ids = {i for k in val_keys for i in groups[k]}
    train_set = [by_id[i] for i in sorted(by_id) if i not in val_ids]
    val_set = [by_id[i] for i in sorted(val_ids)]
    if not val_set or not train_set:
        raise ValueError("not enough subgraphs to split for model selection")
    n_pairs, p_pairs = build_eval_pairs(val_set, eval_pairs, np.random.default_rng(seed + 1))

    seeds = np.random.SeedSequence(seed).generate_state(2 * budget)
    trials: list[Trial] = []
    best: tuple[float, int] | None = None
    best_params: Parameters | None = None
    best_hp: GnnHyperparams | None = None
    for i in range(budget):
        hp = _draw_hyperparams(space, int(seeds[2 * i]), np.random.default_rng(int(seeds[2 * i + 1])))
        params, losses = train_gnn(train_set, hp, enc)
        score = model_selection_score(params, n_pairs, p_pairs, hp, enc)
        trials.append(Trial(index=i, hyperparams=hp, score=score, final_loss=losses[-1] if losses else math.nan))
        if best is None or score > best[0]:
            best = (score, i)
            best_params = params
            best_hp = hp
    assert best_hp is not None and best_params is not None
    return best_hp, best_params, trials


def hyperparams_to_json(hp: GnnHyperparams) -> str:
    return json.dumps(asdict(hp), indent=2, sort_keys=True)
