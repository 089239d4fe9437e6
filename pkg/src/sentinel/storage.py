"""File formats shared by the CLI and the service: embedding rows and
subgraph directories."""

from __future__ import annotations

import json
import os

import numpy as np

from sentinel.sampler import RootedSubgraph


def write_embeddings(embeddings: dict[str, np.ndarray], path: str) -> None:
    """JSON-lines of {"id", "values"}; doubles survive the round trip exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sid in embeddings:
            fh.write(json.dumps({"id": sid, "values": list(map(float, embeddings[sid]))}) + "\n")


def load_embeddings(path: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out[obj["id"]] = np.asarray(obj["values"], dtype=np.float64)
    return out


def write_subgraphs(subgraphs: list[RootedSubgraph], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for g in subgraphs:
        with open(os.path.join(directory, f"{g.root_id}.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(g.to_json() + "\n")


def load_subgraphs(directory: str) -> list[RootedSubgraph]:
    """All subgraphs in a directory, sorted by (root start, root id)."""
    out = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(directory, name), "r", encoding="utf-8") as fh:
            out.append(RootedSubgraph.from_json(fh.read()))
    out.sort(key=lambda g: (g.root.start_ms, g.root_id))
    return out
