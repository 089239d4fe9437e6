"""Graph-based audit triage for support-agent activity logs.

The pipeline: parse action logs into a bipartite action/entity graph
(`sentinel.corpus`), sample subgraphs rooted on sensitive actions
(`sentinel.sampler`), embed them with handcrafted features
(`sentinel.features`) or a trained graph attention network
(`sentinel.gnn`), rank them for review (`sentinel.ranking`), and serve
a labeled audit queue (`sentinel.service`) whose precision is reported
with Bayesian credible intervals (`sentinel.stats`).
"""

from sentinel.corpus import (
    ActionRecord,
    ActionStore,
    DuplicateActionId,
    EntityRef,
    MalformedRecord,
    load_corpus,
    parse_action_record,
    select_roots,
    serialize_action_record,
)
from sentinel.features import FeatureSchema, HandcraftedEmbedder, signed_log
from sentinel.gnn import GnnEmbedder, GnnHyperparams, hyperparameter_search, model_selection_score
from sentinel.neuralnet import LossConfig, NonFiniteLoss, Parameters, contrastive_loss, grad_check, huber
from sentinel.ranking import (
    MutationClassifier,
    MutationKind,
    nn_rank,
    pairwise_distance,
    mutate,
    smr_rank,
    train_smr,
)
from sentinel.sampler import RootedSubgraph, SamplerConfig, UnknownRoot, sample_all, sample_rooted_subgraph
from sentinel.simgen import SimConfig, generate
from sentinel.stats import AuditOutcome, credible_interval, evaluate, precision_at_k

__version__ = "0.1.0"

__all__ = [
    "ActionRecord",
    "ActionStore",
    "AuditOutcome",
    "DuplicateActionId",
    "EntityRef",
    "FeatureSchema",
    "GnnEmbedder",
    "GnnHyperparams",
    "HandcraftedEmbedder",
    "LossConfig",
    "MalformedRecord",
    "MutationClassifier",
    "MutationKind",
    "NonFiniteLoss",
    "Parameters",
    "RootedSubgraph",
    "SamplerConfig",
    "SimConfig",
    "UnknownRoot",
    "contrastive_loss",
    "credible_interval",
    "evaluate",
    "generate",
    "grad_check",
    "huber",
    "hyperparameter_search",
    "load_corpus",
    "model_selection_score",
    "mutate",
    "nn_rank",
    "pairwise_distance",
    "parse_action_record",
    "precision_at_k",
    "sample_all",
    "sample_rooted_subgraph",
    "select_roots",
    "serialize_action_record",
    "signed_log",
    "smr_rank",
    "train_smr",
]
