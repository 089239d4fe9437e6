"""Audit-queue service: ranked findings, label capture, and reranking.

Labels append to a JSON-lines log; replaying the log reconstructs the
state exactly. Ids labeled worth auditing join the nearest-neighbor
interesting set on the next rerank, and every labeled id leaves the
queue. Reads serve an immutable queue snapshot; label writes and
reranks serialize through one lock.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import asdict, dataclass

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from sentinel.ranking import MutationClassifier, RankedFinding, nn_rank, smr_rank
from sentinel.sampler import RootedSubgraph
from sentinel.stats import AuditOutcome, credible_interval
from sentinel.storage import load_embeddings, load_subgraphs

VERDICTS = ("worth_auditing", "not_worth_auditing")


class ServiceStartupError(RuntimeError):
    """A required artifact is missing or unreadable."""


@dataclass(frozen=True)
class AuditLabel:
    subgraph_id: str
    verdict: str
    auditor: str
    at_ms: int


@dataclass(frozen=True)
class RankingConfig:
    method: str = "nn"  # "nn" | "smr"
    interesting: tuple[str, ...] = ()
    k: int = 50
    smr_model: str | None = None

    @classmethod
    def from_json(cls, path: str) -> "RankingConfig":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            method=obj.get("method", "nn"),
            interesting=tuple(obj.get("interesting", ())),
            k=int(obj.get("k", 50)),
            smr_model=obj.get("smr_model"),
        )


class QueueService:
    """In-process state of the audit queue; the HTTP layer is a thin shim."""

    def __init__(self, state_dir: str):
        self.state_dir = state_dir
        self._lock = threading.Lock()

        subgraph_dir = os.path.join(state_dir, "subgraphs")
        embeddings_path = os.path.join(state_dir, "embeddings.jsonl")
        ranking_path = os.path.join(state_dir, "ranking.json")
        for path, what in ((subgraph_dir, "subgraph directory"), (embeddings_path, "embeddings"), (ranking_path, "ranking config")):
            if not os.path.exists(path):
                raise ServiceStartupError(f"missing {what}: {path}")

        self.subgraphs: dict[str, RootedSubgraph] = {g.root_id: g for g in load_subgraphs(subgraph_dir)}
        self.embeddings = load_embeddings(embeddings_path)
        self.config = RankingConfig.from_json(ranking_path)
        if self.config.method not in ("nn", "smr"):
            raise ServiceStartupError(f"unknown ranking method {self.config.method!r}")
        self.classifier: MutationClassifier | None = None
        if self.config.method == "smr":
            if not self.config.smr_model:
                raise ServiceStartupError("ranking config: smr method needs smr_model")
            self.classifier = MutationClassifier.load(os.path.join(state_dir, self.config.smr_model))

        self.labels_path = os.path.join(state_dir, "labels.jsonl")
        self._labels: list[AuditLabel] = []
        if os.path.exists(self.labels_path):
            with open(self.labels_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        obj = json.loads(line)
                        self._labels.append(AuditLabel(obj["subgraph_id"], obj["verdict"], obj["auditor"], obj["at_ms"]))

        self._queue: list[RankedFinding] = []
        self.revision = 0
        self.rerank()

    # -- labels ------------------------------------------------------------

    def active_labels(self) -> dict[str, AuditLabel]:
        """Latest verdict per subgraph id (append-only history retained)."""
        latest: dict[str, AuditLabel] = {}
        per_auditor: dict[tuple[str, str], AuditLabel] = {}
        for lab in self._labels:
            per_auditor[(lab.subgraph_id, lab.auditor)] = lab
        for lab in per_auditor.values():
            cur = latest.get(lab.subgraph_id)
            if cur is None or lab.at_ms >= cur.at_ms:
                latest[lab.subgraph_id] = lab
        return latest

    def add_label(self, subgraph_id: str, verdict: str, auditor: str) -> AuditLabel:
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        if subgraph_id not in self.subgraphs:
            raise KeyError(subgraph_id)
        label = AuditLabel(subgraph_id, verdict, auditor, int(time.time() * 1000))
        with self._lock:
            with open(self.labels_path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(asdict(label), separators=(",", ":")) + "\n")
                fh.flush()
            self._labels.append(label)
        return label

    # -- ranking -----------------------------------------------------------

    def interesting_set(self) -> list[str]:
        worth = [sid for sid, lab in sorted(self.active_labels().items()) if lab.verdict == "worth_auditing"]
        return list(dict.fromkeys(list(self.config.interesting) + worth))

    def rerank(self) -> list[RankedFinding]:
        """Recompute the queue; labeled ids are excluded from the new queue."""
        with self._lock:
            labeled = set(self.active_labels())
            if self.config.method == "nn":
                interesting = self.interesting_set()
                # keep the anchors in the pool; nn_rank never returns them
                pool = {s: v for s, v in self.embeddings.items() if s not in labeled or s in interesting}
                queue = nn_rank(pool, interesting, self.config.k)
            else:
                assert self.classifier is not None
                pool = {s: v for s, v in self.embeddings.items() if s not in labeled}
                queue = smr_rank(self.classifier, pool, self.config.k)
            self._queue = queue
            self.revision += 1
            return queue

    def queue_view(self, limit: int) -> list[dict]:
        active = self.active_labels()
        out = []
        for f in self._queue[: max(0, limit)]:
            lab = active.get(f.subgraph_id)
            out.append(
                {
                    "subgraph_id": f.subgraph_id,
                    "method": f.method,
                    "score": f.score,
                    "rank": f.rank,
                    "label": lab.verdict if lab else None,
                }
            )
        return out

    def subgraph_view(self, subgraph_id: str) -> dict:
        g = self.subgraphs.get(subgraph_id)
        if g is None:
            raise KeyError(subgraph_id)
        active = self.active_labels().get(subgraph_id)
        return {
            "subgraph": json.loads(g.to_json()),
            "delta_hours": {a.id: g.delta_hours(a) for a in g.actions},
            "label": active.verdict if active else None,
        }

    def stats_view(self, level: float = 0.9) -> dict:
        active = self.active_labels()
        k = len(active)
        w = sum(1 for lab in active.values() if lab.verdict == "worth_auditing")
        lo, hi = credible_interval(AuditOutcome(k=k, w=w), level)
        return {
            "k": k,
            "w": w,
            "precision": (w / k) if k else None,
            "level": level,
            "interval_low": lo,
            "interval_high": hi,
            "method": self.config.method,
            "revision": self.revision,
        }


class _LabelBody(BaseModel):
    subgraph_id: str
    verdict: str
    auditor: str


def create_app(service: QueueService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="sentinel audit queue")

    @app.get("/api/queue")
    def get_queue(limit: int = 50):
        return service.queue_view(limit)

    @app.get("/api/subgraph/{subgraph_id}")
    def get_subgraph(subgraph_id: str):
        try:
            return service.subgraph_view(subgraph_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown subgraph {subgraph_id!r}")

    @app.post("/api/label")
    def post_label(body: _LabelBody):
        try:
            label = service.add_label(body.subgraph_id, body.verdict, body.auditor)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown subgraph {body.subgraph_id!r}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return asdict(label)

    @app.post("/api/rerank")
    def post_rerank():
        queue = service.rerank()
        return {"revision": service.revision, "queue_size": len(queue)}

    @app.get("/api/stats")
    def get_stats(level: float = 0.9):
        return service.stats_view(level)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app


def serve(state_dir: str, port: int = 8800, static_dir: str | None = None) -> None:  # pragma: no cover - CLI glue
    import uvicorn

    service = QueueService(state_dir)
    uvicorn.run(create_app(service, static_dir=static_dir), host="127.0.0.1", port=port, log_level="warning")
