"""
CSV ingestion and emission for grouped network data.

Edge file:  header ``group,src,dst,weight``
Node file:  header ``group,node,<x-names...>[,y][,cluster]``

Both are UTF-8, comma separated, ``.`` decimal point. Group and node labels are
opaque strings; they are mapped to dense indices in order of first appearance
in the node file. ``emit_index_map`` writes that mapping next to any output.
"""

import logging
import re
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from peergeo.errors import DomainError, ParseError
from peergeo.netcore.network import row_normalize
from peergeo.netcore.panel import INTERCEPT_NAME, Panel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# -----------------------------
# CONFIG
# -----------------------------
EDGE_COLUMNS = ("group", "src", "dst", "weight")
NODE_KEY_COLUMNS = ("group", "node")
OUTCOME_COLUMN = "y"
CLUSTER_COLUMN = "cluster"
FLOAT_FORMAT = "%.17g"  # enough digits for an exact float64 round trip

_PANDAS_LINE = re.compile(r"line (\d+)")


def _read_rows(path: PathLike, required: Tuple[str, ...]) -> Tuple[pd.DataFrame, List[int]]:
    """Read a CSV as strings. Returns the frame and the 1-based file line of each row."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=list(required)), []
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise ParseError(f"malformed row: {e}", line=int(match.group(1)) if match else None, path=str(path)) from e

    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ParseError(f"missing header column(s): {', '.join(missing)}", line=1, path=str(path))

    lines = list(range(2, len(df) + 2))
    blank = (df == "").all(axis=1).to_numpy() if len(df) else np.zeros(0, dtype=bool)
    if blank.any():
        df = df.loc[~blank].reset_index(drop=True)
        lines = [ln for ln, b in zip(lines, blank) if not b]
    return df, lines


def _as_float(value: str, column: str, line: int, path: PathLike) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: cannot parse {value!r} as a number", line=line, path=str(path)) from None
    if not np.isfinite(out):
        raise ParseError(f"column {column!r}: non-finite value {value!r}", line=line, path=str(path))
    return out


# -----------------------------
# Load
# -----------------------------

def load_panel(edge_path: PathLike, covariate_path: PathLike, symmetrize: bool = False) -> Panel:
    """Build a Panel from an edge list and a node covariate file.

    Networks are row-normalized. Duplicate edges are summed. With
    ``symmetrize`` every tie is made reciprocal (elementwise maximum of g and
    its transpose) before normalization. A ``const`` column is prepended when
    the node file carries no all-ones covariate; a missing cluster column
    clusters by group.
    """
    nodes, node_lines = _read_rows(covariate_path, NODE_KEY_COLUMNS)
    x_names = [c for c in nodes.columns if c not in NODE_KEY_COLUMNS + (OUTCOME_COLUMN, CLUSTER_COLUMN)]
    has_y = OUTCOME_COLUMN in nodes.columns
    has_cluster = CLUSTER_COLUMN in nodes.columns

    # group label -> OrderedDict(node label -> local index)
    layout: "OrderedDict[str, OrderedDict[str, int]]" = OrderedDict()
    x_rows: Dict[str, List[List[float]]] = {}
    y_rows: Dict[str, List[float]] = {}
    cl_rows: Dict[str, List[str]] = {}

    for row, line in zip(nodes.itertuples(index=False), node_lines):
        rec = dict(zip(nodes.columns, row))
        g, v = str(rec["group"]).strip(), str(rec["node"]).strip()
        if not g or not v:
            raise ParseError("empty group or node label", line=line, path=str(covariate_path))
        members = layout.setdefault(g, OrderedDict())
        if v in members:
            raise ParseError(f"duplicate node {v!r} in group {g!r}", line=line, path=str(covariate_path))
        members[v] = len(members)
        x_rows.setdefault(g, []).append([_as_float(rec[c], c, line, covariate_path) for c in x_names])
        if has_y:
            y_rows.setdefault(g, []).append(_as_float(rec[OUTCOME_COLUMN], OUTCOME_COLUMN, line, covariate_path))
        if has_cluster:
            cl = str(rec[CLUSTER_COLUMN]).strip()
            if not cl:
                raise ParseError("empty cluster label", line=line, path=str(covariate_path))
            cl_rows.setdefault(g, []).append(cl)

    raw = {g: np.zeros((len(m), len(m))) for g, m in layout.items()}

    edges, edge_lines = _read_rows(edge_path, EDGE_COLUMNS)
    for row, line in zip(edges.itertuples(index=False), edge_lines):
        rec = dict(zip(edges.columns, row))
        g, src, dst = str(rec["group"]).strip(), str(rec["src"]).strip(), str(rec["dst"]).strip()
        w = _as_float(rec["weight"], "weight", line, edge_path)
        if w < 0.0:
            raise DomainError(f"negative edge weight {rec['weight']!r} in {edge_path}", line=line)
        if src == dst:
            raise DomainError(f"self-loop on node {src!r} in {edge_path}", line=line)
        members = layout.get(g)
        if members is None or src not in members or dst not in members:
            unknown = src if members is None or src not in members else dst
            raise ParseError(f"node {unknown!r} of group {g!r} has no covariate row", line=line, path=str(edge_path))
        raw[g][members[src], members[dst]] += w

    groups, X_blocks, y_blocks, cluster_labels, node_labels = [], [], [], [], []
    for s, (g, members) in enumerate(layout.items()):
        w = raw[g]
        if symmetrize:
            w = np.maximum(w, w.T)
        groups.append(row_normalize(w, group_id=s, label=g))
        X_blocks.append(np.asarray(x_rows[g], dtype=float).reshape(len(members), len(x_names)))
        if has_y:
            y_blocks.append(np.asarray(y_rows[g], dtype=float))
        cluster_labels.extend(cl_rows[g] if has_cluster else [g] * len(members))
        node_labels.extend(members.keys())

    X = np.vstack(X_blocks) if X_blocks else np.zeros((0, len(x_names)))
    names = list(x_names)
    if X.shape[0] == 0 or not any(np.all(X[:, k] == 1.0) for k in range(X.shape[1])):
        X = np.hstack([np.ones((X.shape[0], 1)), X])
        names = [INTERCEPT_NAME] + names

    cluster_index: Dict[str, int] = {}
    cluster_id = np.array([cluster_index.setdefault(c, len(cluster_index)) for c in cluster_labels], dtype=int)

    panel = Panel(
        groups=tuple(groups),
        X=X,
        y=np.concatenate(y_blocks) if has_y and y_blocks else None,
        cluster_id=cluster_id,
        x_names=tuple(names),
        node_labels=tuple(node_labels),
    )
    logger.info(
        "loaded %d groups, %d nodes (%d isolates), %d covariates from %s",
        len(groups), panel.n, int(panel.isolate_mask.sum()), panel.p, covariate_path,
    )
    return panel


# -----------------------------
# Emit
# -----------------------------

def emit_panel(panel: Panel, edge_path: PathLike, covariate_path: PathLike) -> None:
    """Write ``panel`` in the two documented CSV formats (17 significant digits)."""
    edge_rows = []
    for net, sl in panel.iter_groups():
        labels = panel.node_labels[sl]
        src, dst = np.nonzero(net.weights)
        for i, j in zip(src, dst):
            edge_rows.append({"group": net.name, "src": labels[i], "dst": labels[j], "weight": net.weights[i, j]})
    pd.DataFrame(edge_rows, columns=list(EDGE_COLUMNS)).to_csv(edge_path, index=False, float_format=FLOAT_FORMAT)

    group_of_node = [net.name for net in panel.groups for _ in range(net.n)]
    nodes = pd.DataFrame({"group": group_of_node, "node": list(panel.node_labels)})
    for k, name in enumerate(panel.x_names):
        nodes[name] = panel.X[:, k]
    if panel.y is not None:
        nodes[OUTCOME_COLUMN] = panel.y
    nodes[CLUSTER_COLUMN] = [str(c) for c in panel.cluster_id]
    nodes.to_csv(covariate_path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s and %s", edge_path, covariate_path)


def emit_index_map(panel: Panel, path: PathLike) -> None:
    """Write the label -> dense index mapping (one row per node)."""
    out = pd.DataFrame({
        "index": np.arange(panel.n),
        "group_index": panel.group_index,
        "group": [net.name for net in panel.groups for _ in range(net.n)],
        "node": list(panel.node_labels),
        "cluster_id": panel.cluster_id,
    })
    out.to_csv(path, index=False)
