"""The ``sentinel`` command line: simgen -> ingest -> sample -> embed ->
rank -> eval, plus model training and the queue service."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from sentinel.corpus import DuplicateActionId, MalformedRecord, load_corpus
from sentinel.features import FeatureSchema, HandcraftedEmbedder
from sentinel.gnn import GnnEmbedder, hyperparameter_search, hyperparams_to_json
from sentinel.neuralnet import LossConfig
from sentinel.ranking import MutationClassifier, RankedFinding, mutate_corpus, nn_rank, smr_rank, train_smr
from sentinel.sampler import SamplerConfig, sample_all
from sentinel.simgen import SimConfig, generate, load_truth, write_corpus, write_truth
from sentinel.stats import evaluate
from sentinel.storage import load_embeddings, load_subgraphs, write_embeddings, write_subgraphs


def _cmd_simgen(args) -> int:
    cfg = SimConfig.from_json(args.config) if args.config else SimConfig()
    records, truth = generate(cfg)
    write_corpus(records, args.out_corpus)
    write_truth(truth, args.out_truth)
    print(f"wrote {len(records)} actions, {len(truth)} sensitive roots")
    return 0


def _cmd_ingest(args) -> int:
    try:
        store = load_corpus(args.input)
    except (MalformedRecord, DuplicateActionId) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{len(store)} records")
    return 0


def _cmd_sample(args) -> int:
    store = load_corpus(args.corpus)
    cfg = SamplerConfig.from_json(args.config)
    subgraphs = sample_all(store, cfg)
    write_subgraphs(subgraphs, args.out)
    print(f"wrote {len(subgraphs)} subgraphs to {args.out}")
    return 0


def _build_embedder(args, subgraphs):
    if args.method == "handcrafted":
        if args.schema:
            embedder = HandcraftedEmbedder(action_types=FeatureSchema.from_json(args.schema).action_types)
        else:
            embedder = HandcraftedEmbedder()
        return embedder.fit(subgraphs)
    if not args.model:
        raise SystemExit("--model is required for --method gnn")
    return GnnEmbedder.load(args.model)


def _cmd_embed(args) -> int:
    subgraphs = load_subgraphs(args.subgraphs)
    embedder = _build_embedder(args, subgraphs)
    matrix = embedder.transform(subgraphs)
    write_embeddings({g.root_id: matrix[i] for i, g in enumerate(subgraphs)}, args.out)
    print(f"wrote {len(subgraphs)} embeddings ({matrix.shape[1]} dims) to {args.out}")
    return 0


def _cmd_train_gnn(args) -> int:
    subgraphs = load_subgraphs(args.subgraphs)
    space = {}
    if args.space:
        with open(args.space, "r", encoding="utf-8") as fh:
            space = json.load(fh)
    hp, params, trials = hyperparameter_search(subgraphs, space, budget=args.budget, seed=args.seed)
    model = GnnEmbedder(
        embedding_dim=hp.embedding_dim,
        conv_layers=hp.conv_layers,
        attention_heads=hp.attention_heads,
        readout_rounds=hp.readout_rounds,
        huber_delta=hp.loss.delta,
        target_separation=hp.loss.target_separation,
        phi=hp.loss.phi,
        steps=hp.steps,
        batch_size=hp.batch_size,
        learning_rate=hp.learning_rate,
        seed=hp.seed,
    )
    model.params_ = params
    model.loss_curve_ = []
    model.save(args.out)
    with open(f"{args.out}/hyperparams.json", "w", encoding="utf-8") as fh:
        fh.write(hyperparams_to_json(hp))
    with open(f"{args.out}/trials.json", "w", encoding="utf-8") as fh:
        json.dump(
            [{"index": t.index, "score": t.score, "final_loss": t.final_loss} for t in trials],
            fh,
            indent=2,
        )
    best = max(trials, key=lambda t: t.score)
    print(f"best trial {best.index} score {best.score:.4f}; model saved to {args.out}")
    return 0


def _cmd_train_smr(args) -> int:
    subgraphs = load_subgraphs(args.subgraphs)
    embedder = _build_embedder(args, subgraphs)
    rng = np.random.default_rng(args.seed)
    mutated = mutate_corpus(subgraphs, rng)
    natural_emb = embedder.transform(subgraphs)
    mutated_emb = embedder.transform(mutated)
    classifier = train_smr(natural_emb, mutated_emb, seed=args.seed)
    classifier.save(args.out)
    print(f"trained on {len(subgraphs)} natural / {len(mutated)} mutated; model saved to {args.out}")
    return 0


def _cmd_rank(args) -> int:
    embeddings = load_embeddings(args.embeddings)
    if args.method == "nn":
        if not args.interesting:
            raise SystemExit("--interesting is required for --method nn")
        findings = nn_rank(embeddings, args.interesting.split(","), args.k)
    else:
        if not args.model:
            raise SystemExit("--model is required for --method smr")
        findings = smr_rank(MutationClassifier.load(args.model), embeddings, args.k)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for f in findings:
            fh.write(f.to_json() + "\n")
    print(f"wrote {len(findings)} findings to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    with open(args.ranked, "r", encoding="utf-8") as fh:
        ranked = [RankedFinding.from_json(line) for line in fh if line.strip()]
    truth = load_truth(args.truth)
    report = evaluate(ranked, {sid: kind != "normal" for sid, kind in truth.items()}, k=args.k, level=args.level)
    print(report.to_json())
    return 0


def _cmd_serve(args) -> int:  # pragma: no cover - long-running server
    from sentinel.service import serve

    serve(args.state_dir, port=args.port, static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentinel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simgen", help="generate a synthetic corpus with ground truth")
    p.add_argument("--config", help="SimConfig JSON; defaults apply when omitted")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(fn=_cmd_simgen)

    p = sub.add_parser("ingest", help="validate a corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--validate-only", action="store_true", default=True)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("sample", help="extract rooted subgraphs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True, help="SamplerConfig JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("embed", help="embed subgraphs")
    p.add_argument("--method", choices=["handcrafted", "gnn"], required=True)
    p.add_argument("--schema", help="FeatureSchema JSON (handcrafted); inferred when omitted")
    p.add_argument("--model", help="model directory (gnn)")
    p.add_argument("--subgraphs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("train-gnn", help="random-search train the GNN embedder")
    p.add_argument("--subgraphs", required=True)
    p.add_argument("--space", help="JSON mapping hyperparameter names to candidate lists")
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_gnn)

    p = sub.add_parser("train-smr", help="train the natural-vs-mutated classifier")
    p.add_argument("--subgraphs", required=True)
    p.add_argument("--method", choices=["handcrafted", "gnn"], required=True)
    p.add_argument("--schema")
    p.add_argument("--model", help="GnnEmbedder directory (gnn method)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_smr)

    p = sub.add_parser("rank", help="rank embeddings for audit")
    p.add_argument("--method", choices=["nn", "smr"], required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--interesting", help="comma-separated subgraph ids (nn)")
    p.add_argument("--model", help="classifier directory (smr)")
    p.add_argument("-k", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_rank)

    p = sub.add_parser("eval", help="precision and credible interval of a ranking")
    p.add_argument("--ranked", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("-k", type=int, default=50)
    p.add_argument("--level", type=float, default=0.9)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("serve", help="run the audit-queue HTTP service")
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--state-dir", required=True)
    p.add_argument("--static", help="directory of console assets to serve at /")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
