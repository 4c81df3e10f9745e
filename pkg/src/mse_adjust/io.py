"""Graph JSON and dataset CSV reading/writing.

Graph JSON format::

    {
      "nodes": ["A", "Y", "O1", ...],
      "edges": [{"from": "O1", "to": "Y", "coef": 5.0}, ...],
      "treatment": "A",
      "outcome": "Y",
      "noise_vars": {"A": 1.0, ...}
    }

``coef`` and ``noise_vars`` are optional for graph-only queries and
mandatory when a structural model is required.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import GraphError
from .estimate import Dataset
from .graph import CausalDag
from .scm import LinearGaussianScm


def graph_from_dict(obj: dict) -> CausalDag:
    try:
        labels = tuple(str(x) for x in obj["nodes"])
        raw_edges = obj["edges"]
        treatment = str(obj["treatment"])
        outcome = str(obj["outcome"])
    except (KeyError, TypeError) as exc:
        raise GraphError(f"graph JSON missing required field: {exc}") from None
    index = {lab: i for i, lab in enumerate(labels)}
    edges = []
    for e in raw_edges:
        try:
            edges.append((index[e["from"]], index[e["to"]]))
        except KeyError as exc:
            raise GraphError(f"edge references unknown node {exc}") from None
    for endpoint in (treatment, outcome):
        if endpoint not in index:
            raise GraphError(f"unknown node label {endpoint!r}")
    return CausalDag(labels, tuple(edges), index[treatment], index[outcome])


def scm_from_dict(obj: dict) -> LinearGaussianScm:
    dag = graph_from_dict(obj)
    coef = {}
    for e in obj["edges"]:
        if "coef" not in e:
            raise GraphError(f"edge {e['from']}->{e['to']} is missing 'coef'")
        coef[(e["from"], e["to"])] = float(e["coef"])
    noise = obj.get("noise_vars")
    if noise is None:
        raise GraphError("'noise_vars' is required for model computations")
    missing = set(dag.labels) - set(noise)
    if missing:
        raise GraphError(f"noise_vars missing entries for: {', '.join(sorted(missing))}")
    return LinearGaussianScm.from_edge_map(dag, coef, {k: float(v) for k, v in noise.items()})


def graph_to_dict(g: CausalDag, m: LinearGaussianScm | None = None) -> dict:
    edges = []
    for i, (p, c) in enumerate(g.edges):
        entry = {"from": g.labels[p], "to": g.labels[c]}
        if m is not None:
            entry["coef"] = m.coefficients[i]
        edges.append(entry)
    out = {
        "nodes": list(g.labels),
        "edges": edges,
        "treatment": g.labels[g.treatment],
        "outcome": g.labels[g.outcome],
    }
    if m is not None:
        out["noise_vars"] = {
            g.labels[v]: m.noise_variances[v] for v in range(g.node_count)
        }
    return out


def load_graph(path: str | Path) -> CausalDag:
    return graph_from_dict(_read_json(path))


def load_scm(path: str | Path) -> LinearGaussianScm:
    return scm_from_dict(_read_json(path))


def _read_json(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path} is not valid JSON: {exc}") from None


def load_dataset_csv(path: str | Path, dag: CausalDag) -> Dataset:
    """Read a dataset whose header row names the graph nodes (any order)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if sorted(header) != sorted(dag.labels):
            raise GraphError(
                f"CSV columns {header} do not match graph nodes {list(dag.labels)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise GraphError(f"{path} has no data rows")
    raw = np.asarray(rows)
    if raw.shape[1] != dag.node_count:
        raise GraphError(f"{path}: inconsistent column count")
    order = [header.index(lab) for lab in dag.labels]
    return Dataset(dag, np.ascontiguousarray(raw[:, order]))


def write_dataset_csv(d: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(d.dag.labels)
        for row in d.values:
            writer.writerow([repr(float(x)) for x in row])
