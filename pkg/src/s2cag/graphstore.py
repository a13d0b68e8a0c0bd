"""Attributed graph storage, file I/O, and the normalized operators.

File formats
------------
edges
    one undirected edge per line, ``u v`` separated by whitespace (commas are
    also accepted). Lines starting with ``#`` or ``%`` are comments.
attributes
    Matrix Market coordinate (``%%MatrixMarket matrix coordinate ...``) or
    dense TSV with one row per vertex. A dense TSV whose first line starts
    with ``vertex_id`` (or ``id``) carries an explicit vertex id in column
    one; otherwise rows are vertices ``0..n-1``.
labels
    ``vertex_id<TAB>label`` lines.
"""
from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """A malformed input file; the message carries path and line number."""

    def __init__(self, path, lineno, msg):
        self.path = str(path)
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {msg}")


class GraphValidationError(ValueError):
    """Well-formed input that violates a graph invariant."""


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    n: int
    m: int
    adjacency: sp.csr_matrix
    attributes: sp.csr_matrix
    labels: np.ndarray | None = None
    vertex_ids: np.ndarray | None = None
    label_names: np.ndarray | None = None

    @property
    def d(self):
        return self.attributes.shape[1]

    @property
    def num_classes(self):
        return None if self.labels is None else int(self.labels.max()) + 1

    def original_ids(self):
        if self.vertex_ids is None:
            return np.arange(self.n)
        return self.vertex_ids


@dataclass(frozen=True, eq=False)
class NormalizedOperators:
    p_hat: sp.csr_matrix
    p_hat_t: sp.csr_matrix
    x_hat: sp.csr_matrix
    ahat_rowsum: np.ndarray
    zero_attribute_rows: int = 0
    a_hat: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.p_hat.shape[0]

    @property
    def d(self):
        return self.x_hat.shape[1]

    @property
    def nnz_p(self):
        return self.p_hat.nnz


def build_graph(n, edges, attributes, labels=None, vertex_ids=None):
    """Validate raw arrays and assemble an :class:`AttributedGraph`.

    ``edges`` is an ``(e, 2)`` integer array of vertex indices in ``0..n-1``.
    Duplicate edges and explicit self-loops are dropped; every vertex then
    gets exactly one self-loop.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n < 1:
        raise GraphValidationError("graph needs at least one vertex")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = edges[(edges < 0).any(1) | (edges >= n).any(1)][0]
        raise GraphValidationError(
            f"edge ({bad[0]}, {bad[1]}) references a vertex outside 0..{n - 1}")
    edges = edges[edges[:, 0] != edges[:, 1]]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    und = np.unique(np.stack([lo, hi], 1), axis=0) if len(edges) else edges
    m = len(und)
    rows = np.concatenate([und[:, 0], und[:, 1], np.arange(n)])
    cols = np.concatenate([und[:, 1], und[:, 0], np.arange(n)])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj.sort_indices()

    x = sp.csr_matrix(attributes, dtype=np.float64)
    if x.shape[0] != n:
        raise GraphValidationError(f"attribute matrix has {x.shape[0]} rows, expected {n}")
    x.sum_duplicates()
    x.eliminate_zeros()
    x.sort_indices()
    if not np.all(np.isfinite(x.data)):
        raise GraphValidationError("attribute matrix has non-finite entries")
    if x.nnz and x.data.min() < 0:
        r = int(np.searchsorted(x.indptr, np.argmin(x.data), side="right") - 1)
        raise GraphValidationError(f"negative attribute value at vertex {r}")

    label_names = None
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise GraphValidationError(f"expected {n} labels, got {labels.shape[0]}")
        label_names, labels = np.unique(labels, return_inverse=True)
        labels = labels.astype(np.int64)
    if vertex_ids is not None:
        vertex_ids = np.asarray(vertex_ids, dtype=np.int64)
    return AttributedGraph(n=n, m=m, adjacency=adj, attributes=x, labels=labels,
                           vertex_ids=vertex_ids, label_names=label_names)


# ---------------------------------------------------------------- parsing

_SPLIT = re.compile(r"[\s,]+")


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            yield lineno, _SPLIT.split(line)


def _require_file(path, what):
    if path is None or not os.path.isfile(path):
        raise FileNotFoundError(f"{what} file not found: {path}")


def read_edges(path):
    _require_file(path, "edge")
    out = []
    for lineno, parts in _data_lines(path):
        if len(parts) < 2:
            raise GraphFormatError(path, lineno, "expected 'u v'")
        try:
            out.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphFormatError(path, lineno, f"non-integer vertex id in {parts[:2]}") from None
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def read_matrix_market(path):
    """Read a coordinate Matrix Market file into CSR.

    Supports ``real``/``integer``/``pattern`` fields with ``general`` or
    ``symmetric`` symmetry, which covers the usual feature-matrix dumps.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        tokens = header.strip().lower().split()
        if len(tokens) < 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
            raise GraphFormatError(path, 1, "missing '%%MatrixMarket matrix' banner")
        fmt, fieldtype, symmetry = tokens[2], tokens[3], tokens[4]
        if fmt != "coordinate":
            raise GraphFormatError(path, 1, f"unsupported Matrix Market format '{fmt}'")
        if fieldtype not in ("real", "integer", "pattern", "double"):
            raise GraphFormatError(path, 1, f"unsupported field type '{fieldtype}'")
        if symmetry not in ("general", "symmetric"):
            raise GraphFormatError(path, 1, f"unsupported symmetry '{symmetry}'")
        lineno = 1
        size = None
        rows, cols, vals = [], [], []
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            parts = line.split()
            try:
                if size is None:
                    size = tuple(int(p) for p in parts[:3])
                    if len(size) != 3:
                        raise ValueError
                    continue
                i, j = int(parts[0]), int(parts[1])
                v = 1.0 if fieldtype == "pattern" else float(parts[2])
            except (ValueError, IndexError):
                raise GraphFormatError(path, lineno, f"cannot parse entry '{line}'") from None
            if not (1 <= i <= size[0] and 1 <= j <= size[1]):
                raise GraphFormatError(path, lineno, f"index ({i}, {j}) outside {size[0]}x{size[1]}")
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
    if size is None:
        raise GraphFormatError(path, lineno, "missing size line")
    if len(vals) != size[2]:
        raise GraphFormatError(path, lineno, f"expected {size[2]} entries, found {len(vals)}")
    rows, cols, vals = np.array(rows, np.int64), np.array(cols, np.int64), np.array(vals)
    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return sp.csr_matrix((vals, (rows, cols)), shape=size[:2])


def read_dense_tsv(path):
    """Dense attribute rows; returns ``(matrix, ids or None)``."""
    rows, ids = [], None
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            parts = _SPLIT.split(line)
            if ids is None and not rows and parts[0].lower() in ("vertex_id", "id"):
                ids = []
                continue
            try:
                if ids is not None:
                    ids.append(int(parts[0]))
                    parts = parts[1:]
                vals = [float(p) for p in parts]
            except ValueError:
                raise GraphFormatError(path, lineno, "non-numeric attribute value") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise GraphFormatError(path, lineno, f"expected {width} values, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise GraphFormatError(path, 0, "no attribute rows")
    return sp.csr_matrix(np.array(rows, dtype=np.float64)), (
        np.array(ids, dtype=np.int64) if ids is not None else None)


def read_attributes(path):
    _require_file(path, "attribute")
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.lower().startswith("%%matrixmarket"):
        return read_matrix_market(path), None
    return read_dense_tsv(path)


def read_labels(path):
    _require_file(path, "label")
    out = {}
    for lineno, parts in _data_lines(path):
        if len(parts) < 2:
            raise GraphFormatError(path, lineno, "expected 'vertex_id<TAB>label'")
        try:
            vid, lab = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(path, lineno, "non-integer vertex id or label") from None
        if vid in out:
            raise GraphFormatError(path, lineno, f"vertex {vid} labelled twice")
        out[vid] = lab
    return out


def load_graph(edge_source, attribute_source, label_source=None):
    """Load and validate an attributed graph from the canonical files.

    The attribute file fixes the vertex set. Edge and label files refer to
    the same vertex ids; ids are remapped to ``0..n-1`` and the original ids
    are kept in ``vertex_ids``.
    """
    _require_file(attribute_source, "attribute")
    _require_file(edge_source, "edge")
    x, ids = read_attributes(attribute_source)
    n = x.shape[0]
    raw_edges = read_edges(edge_source)
    if ids is None:
        edges = raw_edges
    else:
        if len(np.unique(ids)) != len(ids):
            raise GraphValidationError(f"{attribute_source}: duplicate vertex ids")
        index = {int(v): i for i, v in enumerate(ids)}
        try:
            edges = np.array([(index[u], index[v]) for u, v in raw_edges],
                             dtype=np.int64).reshape(-1, 2)
        except KeyError as exc:
            raise GraphValidationError(f"edge references unknown vertex id {exc.args[0]}") from None

    labels = None
    if label_source is not None:
        lab = read_labels(label_source)
        keys = ids if ids is not None else np.arange(n)
        missing = [int(v) for v in keys if int(v) not in lab]
        if missing:
            raise GraphValidationError(f"{label_source}: no label for vertex {missing[0]}"
                                       f" ({len(missing)} unlabelled)")
        extra = set(lab) - {int(v) for v in keys}
        if extra:
            raise GraphValidationError(f"{label_source}: label for unknown vertex {min(extra)}")
        labels = np.array([lab[int(v)] for v in keys], dtype=np.int64)
    return build_graph(n, edges, x, labels=labels, vertex_ids=ids)


def _fmt(v):
    return repr(float(v))


def save_graph(g, directory):
    """Write ``edges.txt``, ``attrs.mtx`` and (if present) ``labels.tsv``.

    Values are written with ``repr`` so a reload is bit-identical.
    """
    os.makedirs(directory, exist_ok=True)
    ids = g.original_ids()
    upper = sp.triu(g.adjacency, k=1).tocoo()
    paths = {"edges": os.path.join(directory, "edges.txt"),
             "attrs": os.path.join(directory, "attrs.mtx")}
    with open(paths["edges"], "w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n} m={g.m}\n")
        for u, v in zip(upper.row, upper.col):
            fh.write(f"{ids[u]} {ids[v]}\n")
    if g.vertex_ids is None:
        x = g.attributes.tocoo()
        with open(paths["attrs"], "w", encoding="utf-8") as fh:
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{x.shape[0]} {x.shape[1]} {x.nnz}\n")
            order = np.lexsort((x.col, x.row))
            for i, j, v in zip(x.row[order], x.col[order], x.data[order]):
                fh.write(f"{i + 1} {j + 1} {_fmt(v)}\n")
    else:
        paths["attrs"] = os.path.join(directory, "attrs.tsv")
        dense = g.attributes.toarray()
        with open(paths["attrs"], "w", encoding="utf-8") as fh:
            fh.write("vertex_id\t" + "\t".join(f"f{j}" for j in range(g.d)) + "\n")
            for vid, row in zip(ids, dense):
                fh.write(f"{vid}\t" + "\t".join(_fmt(v) for v in row) + "\n")
    if g.labels is not None:
        paths["labels"] = os.path.join(directory, "labels.tsv")
        names = g.label_names if g.label_names is not None else np.arange(g.num_classes)
        with open(paths["labels"], "w", encoding="utf-8") as fh:
            for vid, lab in zip(ids, g.labels):
                fh.write(f"{vid}\t{names[lab]}\n")
    return paths


# ------------------------------------------------------------ normalization

def normalize_adjacency(g):
    """Symmetric normalization ``D^-1/2 A D^-1/2``; ``D`` counts the self-loop."""
    a = g.adjacency if isinstance(g, AttributedGraph) else sp.csr_matrix(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    coo = a.tocoo()
    vals = coo.data * (inv_sqrt[coo.row] * inv_sqrt[coo.col])
    out = sp.csr_matrix((vals, (coo.row, coo.col)), shape=a.shape)
    out.sort_indices()
    return out


def row_normalize_transition(a_hat):
    a_hat = sp.csr_matrix(a_hat)
    rowsum = np.asarray(a_hat.sum(axis=1)).ravel()
    if np.any(rowsum <= 0):
        raise AssertionError("zero row in normalized adjacency; self-loops missing?")
    p = sp.diags(1.0 / rowsum) @ a_hat
    p = sp.csr_matrix(p)
    p.sort_indices()
    return p


def normalize_attributes(x):
    """Scale row ``i`` by ``1/sqrt(x_i . s)`` where ``s`` sums all rows.

    All-zero rows stay zero. Returns ``(x_hat, zero_rows)``.
    """
    x = sp.csr_matrix(x, dtype=np.float64)
    s = np.asarray(x.sum(axis=0)).ravel()
    scale = np.asarray(x @ s).ravel()
    zero = scale <= 0
    inv = np.zeros_like(scale)
    inv[~zero] = 1.0 / np.sqrt(scale[~zero])
    x_hat = sp.csr_matrix(sp.diags(inv) @ x)
    x_hat.sort_indices()
    zero_rows = int(zero.sum())
    if zero_rows:
        log.warning("%d vertices have all-zero attributes; their rows stay zero", zero_rows)
    return x_hat, zero_rows


def normalize(g):
    """Build the operator bundle consumed by the solvers."""
    a_hat = normalize_adjacency(g)
    p_hat = row_normalize_transition(a_hat)
    x_hat, zero_rows = normalize_attributes(g.attributes)
    return NormalizedOperators(
        p_hat=p_hat,
        p_hat_t=sp.csr_matrix(p_hat.T),
        x_hat=x_hat,
        ahat_rowsum=np.asarray(a_hat.sum(axis=1)).ravel(),
        zero_attribute_rows=zero_rows,
        a_hat=a_hat,
    )
