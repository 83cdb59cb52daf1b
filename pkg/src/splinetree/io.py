"""Dataset ingestion, run configuration, and serialization.

File surfaces: the dataset CSV (header + typed columns), the versioned
tree JSON (schema + design + node list, from which predictions are exactly
reproducible), GraphViz DOT rendering, and the three diagnostics CSVs.
All floating-point output uses the shortest decimal string that round-trips
to the same binary value, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import basis
from .errors import DataError
from .gram import NodeModel
from .tree import GrowConfig, SplitCandidate, TreeNode

TREE_FORMAT = "splinetree-tree"
TREE_FORMAT_VERSION = 1

_LOGIT_CLAMP = 1e-12


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "continuous" | "categorical"


@dataclass
class SurrogateDataset:
    """Feature columns plus the surrogate response used as the fit target.

    ``original`` optionally carries the upstream problem's own response for
    accuracy metrics; ``tags`` optionally carries a train/test marker per
    row.
    """

    features: tuple[Feature, ...]
    columns: dict[str, np.ndarray]
    response: np.ndarray
    original: np.ndarray | None = None
    tags: np.ndarray | None = None

    def __post_init__(self):
        n = self.response.shape[0]
        for feat in self.features:
            if feat.name not in self.columns:
                raise DataError(f"missing column {feat.name!r}")
            if self.columns[feat.name].shape[0] != n:
                raise DataError(f"column {feat.name!r} length differs from response")
        for aux in (self.original, self.tags):
            if aux is not None and aux.shape[0] != n:
                raise DataError("auxiliary column length differs from response")
        if not np.all(np.isfinite(self.response)):
            raise DataError("surrogate response contains non-finite values")

    @property
    def n(self) -> int:
        return self.response.shape[0]

    def subset(self, rows) -> "SurrogateDataset":
        rows = np.asarray(rows)
        return SurrogateDataset(
            features=self.features,
            columns={name: col[rows] for name, col in self.columns.items()},
            response=self.response[rows],
            original=None if self.original is None else self.original[rows],
            tags=None if self.tags is None else self.tags[rows],
        )


@dataclass(frozen=True)
class RunConfig:
    """Full parameter set for one fit run; flat and file/flag mappable."""

    features: tuple[str, ...] | None = None  # None = every non-reserved column
    categorical: tuple[str, ...] = ()
    knots: int = 15
    num_bins: int = 50
    max_depth: int = 5
    min_samples_leaf: int | None = None
    lam: float | tuple = 1e-3
    loss: str = "gcv"
    r2_threshold: float = 0.99
    dsse_fraction: float = 0.02
    lambda1: float | None = None
    seed: int = 0
    transform: str = "identity"  # applied to the response column on load
    test_fraction: float = 1 / 3
    threads: int = 1

    def grow_config(self) -> GrowConfig:
        return GrowConfig(
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            lam=self.lam,
            num_bins=self.num_bins,
            loss=self.loss,
            threads=self.threads,
        )

    def to_json_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


def _fmt(value) -> str:
    """Shortest decimal representation that round-trips the float."""
    return repr(float(value))


def logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _LOGIT_CLAMP, 1.0 - _LOGIT_CLAMP)
    return np.log(p / (1.0 - p))


def load_csv(
    path,
    response: str,
    *,
    continuous: Sequence[str] | None = None,
    categorical: Sequence[str] = (),
    original: str | None = None,
    tag: str | None = None,
    transform: str = "identity",
) -> SurrogateDataset:
    """Parse a dataset CSV against a declared schema.

    When ``continuous`` is None, every column other than the response,
    original, tag, and declared categoricals is treated as continuous.
    Unparseable numeric cells are collected and reported with their file
    line numbers.  ``transform="logit"`` maps the response p through
    log(p/(1-p)) with clamping.
    """
    if transform not in ("identity", "logit"):
        raise DataError(f"unknown response transform {transform!r}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")

    index = {name: k for k, name in enumerate(header)}
    reserved = {response, original, tag} - {None}
    declared = set(categorical) | reserved
    if continuous is None:
        continuous = [name for name in header if name not in declared]
    for name in [response, *(n for n in (original, tag) if n), *continuous, *categorical]:
        if name not in index:
            raise DataError(f"{path}: missing column {name!r}")

    numeric_cols = [*continuous, response] + ([original] if original else [])
    parsed: dict[str, np.ndarray] = {}
    bad: list[tuple[int, str, str]] = []
    for name in numeric_cols:
        k = index[name]
        out = np.empty(len(rows))
        for i, row in enumerate(rows):
            try:
                out[i] = float(row[k])
            except (ValueError, IndexError):
                cell = row[k] if k < len(row) else "<missing>"
                bad.append((i + 2, name, cell))  # +2: header is line 1
        parsed[name] = out
    if bad:
        detail = "; ".join(f"line {ln}, column {col!r}: {cell!r}" for ln, col, cell in bad[:10])
        more = "" if len(bad) <= 10 else f" (and {len(bad) - 10} more)"
        raise DataError(f"{path}: unparseable numeric cells: {detail}{more}")

    features = tuple(
        [Feature(name, basis.CONTINUOUS) for name in continuous]
        + [Feature(name, basis.CATEGORICAL) for name in categorical]
    )
    columns: dict[str, np.ndarray] = {name: parsed[name] for name in continuous}
    for name in categorical:
        k = index[name]
        columns[name] = np.array([row[k] for row in rows])
    resp = parsed[response]
    if transform == "logit":
        resp = logit(resp)
    return SurrogateDataset(
        features=features,
        columns=columns,
        response=resp,
        original=parsed.get(original) if original else None,
        tags=np.array([row[index[tag]] for row in rows]) if tag else None,
    )


def write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write aligned columns as CSV with round-trip float formatting."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(columns[0]) if columns else 0):
            writer.writerow(
                [
                    _fmt(col[i]) if np.issubdtype(col.dtype, np.floating) else str(col[i])
                    for col in columns
                ]
            )


# ---------------------------------------------------------------------------
# Tree JSON
# ---------------------------------------------------------------------------


@dataclass
class TreeArtifact:
    """A loaded tree bundle: structure, design, schema, and run metadata."""

    root: TreeNode
    spec: basis.DesignSpec
    schema: tuple[Feature, ...]
    config: dict


def _split_to_json(split: SplitCandidate | None):
    if split is None:
        return None
    if split.threshold is not None:
        return {"feature": split.feature, "threshold": split.threshold}
    return {"feature": split.feature, "categories": list(split.categories)}


def _split_from_json(doc):
    if doc is None:
        return None
    if "threshold" in doc:
        return SplitCandidate(feature=doc["feature"], threshold=float(doc["threshold"]))
    return SplitCandidate(feature=doc["feature"], categories=tuple(doc["categories"]))


def tree_to_json(root: TreeNode, spec: basis.DesignSpec, schema, config: Mapping) -> dict:
    nodes = []
    for node in root.nodes():
        nodes.append(
            {
                "id": node.id,
                "depth": node.depth,
                "count": node.count,
                "split": _split_to_json(node.split),
                "left": None if node.left is None else node.left.id,
                "right": None if node.right is None else node.right.id,
                "dsse": node.dsse,
                "sse": node.model.sse,
                "r2": node.model.r2,
                "effective_df": node.model.effective_df,
                "lambda": node.model.lam,
                "coefficients": node.model.coefficients.tolist(),
                "effect_means": None
                if node.effect_means is None
                else node.effect_means.tolist(),
                "flags": list(node.flags),
            }
        )
    return {
        "format": TREE_FORMAT,
        "version": TREE_FORMAT_VERSION,
        "schema": [{"name": f.name, "kind": f.kind} for f in schema],
        "design": {
            "total_columns": spec.total_columns,
            "blocks": [
                {"feature": b.feature, "kind": b.kind, "start": b.start, "stop": b.stop}
                for b in spec.blocks
            ],
            "knots": {name: kv.knots.tolist() for name, kv in spec.knots.items()},
            "levels": {name: list(levels) for name, levels in spec.levels.items()},
            "excluded": list(spec.excluded),
        },
        "config": dict(config),
        "nodes": nodes,
    }


def save_tree(path, root: TreeNode, spec: basis.DesignSpec, schema, config: Mapping) -> None:
    doc = tree_to_json(root, spec, schema, config)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=1)
        handle.write("\n")


def tree_from_json(doc: Mapping) -> TreeArtifact:
    if doc.get("format") != TREE_FORMAT:
        raise DataError(f"not a {TREE_FORMAT} document")
    if doc.get("version") != TREE_FORMAT_VERSION:
        raise DataError(
            f"unsupported format version {doc.get('version')!r}; "
            f"this build reads version {TREE_FORMAT_VERSION}"
        )
    design = doc["design"]
    spec = basis.DesignSpec(
        blocks=tuple(
            basis.BasisBlock(b["feature"], b["kind"], b["start"], b["stop"])
            for b in design["blocks"]
        ),
        knots={
            name: basis.KnotVector(name, np.asarray(values))
            for name, values in design["knots"].items()
        },
        levels={name: tuple(levels) for name, levels in design["levels"].items()},
        total_columns=design["total_columns"],
        excluded=tuple(design.get("excluded", ())),
    )
    schema = tuple(Feature(f["name"], f["kind"]) for f in doc["schema"])

    nodes: dict[int, TreeNode] = {}
    for nd in doc["nodes"]:
        model = NodeModel(
            coefficients=np.asarray(nd["coefficients"], dtype=np.float64),
            sse=float(nd["sse"]),
            r2=float(nd["r2"]),
            effective_df=float(nd["effective_df"]),
            lam=float(nd["lambda"]),
            count=int(nd["count"]),
        )
        nodes[nd["id"]] = TreeNode(
            id=int(nd["id"]),
            depth=int(nd["depth"]),
            count=int(nd["count"]),
            model=model,
            split=_split_from_json(nd["split"]),
            dsse=float(nd["dsse"]),
            effect_means=None
            if nd.get("effect_means") is None
            else np.asarray(nd["effect_means"], dtype=np.float64),
            flags=tuple(nd.get("flags", ())),
        )
    for nd in doc["nodes"]:
        node = nodes[nd["id"]]
        if (nd["left"] is None) != (nd["right"] is None) or (
            (node.split is None) != (nd["left"] is None)
        ):
            raise DataError(f"node {node.id}: split and children are inconsistent")
        if nd["left"] is not None:
            node.left = nodes[nd["left"]]
            node.right = nodes[nd["right"]]
            if node.left.count + node.right.count != node.count:
                raise DataError(
                    f"node {node.id}: child counts {node.left.count}+{node.right.count} "
                    f"do not sum to {node.count}"
                )
    roots = set(nodes) - {
        nd[side] for nd in doc["nodes"] for side in ("left", "right") if nd[side] is not None
    }
    if len(roots) != 1:
        raise DataError("tree document does not have a unique root")
    return TreeArtifact(
        root=nodes[roots.pop()], spec=spec, schema=schema, config=dict(doc["config"])
    )


def load_tree(path) -> TreeArtifact:
    with open(path, encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc
    return tree_from_json(doc)


# ---------------------------------------------------------------------------
# DOT rendering
# ---------------------------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _rule_text(split: SplitCandidate, negate: bool = False) -> str:
    if split.threshold is not None:
        op = ">" if negate else "<="
        return f"{split.feature} {op} {split.threshold:.6g}"
    cats = ", ".join(str(c) for c in split.categories)
    return f"{split.feature} {'not in' if negate else 'in'} {{{cats}}}"


def export_dot(root: TreeNode) -> str:
    """GraphViz rendering: per-node size/split/dsse/R2, edge routing labels."""
    lines = ["digraph tree {", "  node [shape=box];"]
    for node in root.nodes():
        parts = [f"N{node.id}", f"size={node.count}"]
        if node.split is not None:
            parts.append(_rule_text(node.split))
            parts.append(f"dsse={node.dsse:.6g}")
        parts.append(f"R2={node.model.r2:.4f}")
        label = "\\n".join(_dot_escape(part) for part in parts)
        lines.append(f'  n{node.id} [label="{label}"];')
    for node in root.nodes():
        if node.split is None:
            continue
        yes = _dot_escape(_rule_text(node.split))
        no = _dot_escape(_rule_text(node.split, negate=True))
        lines.append(f'  n{node.id} -> n{node.left.id} [label="{yes}"];')
        lines.append(f'  n{node.id} -> n{node.right.id} [label="{no}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Diagnostics CSVs
# ---------------------------------------------------------------------------


def export_diagnostics(out_dir, importance=None, contributions=None, curves=None) -> dict:
    """Write importance.csv / contributions.csv / curves.csv into a directory.

    Rows are ordered by node id, then feature name, then grid position.
    Returns the mapping of table name to file path.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    path = os.path.join(out_dir, "importance.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["leaf_id", "feature", "v"])
        if importance is not None:
            for (leaf_id, feature) in sorted(importance.values):
                writer.writerow([leaf_id, feature, _fmt(importance.values[(leaf_id, feature)])])
    paths["importance"] = path

    path = os.path.join(out_dir, "contributions.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["node_id", "feature", "c", "p"])
        for contrib in sorted(contributions or [], key=lambda s: s.node_id):
            for feature in sorted(contrib.c):
                writer.writerow(
                    [contrib.node_id, feature, _fmt(contrib.c[feature]), _fmt(contrib.p[feature])]
                )
    paths["contributions"] = path

    path = os.path.join(out_dir, "curves.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["leaf_id", "feature", "grid", "effect"])
        for curve in sorted(curves or [], key=lambda c: (c.node_id, c.feature)):
            for g, value in zip(curve.grid, curve.values):
                cell = _fmt(g) if isinstance(g, (float, np.floating)) else str(g)
                writer.writerow([curve.node_id, curve.feature, cell, _fmt(value)])
    paths["curves"] = path
    return paths


# ---------------------------------------------------------------------------
# Flat key=value config files
# ---------------------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for ln, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {ln}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
