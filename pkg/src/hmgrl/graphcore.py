"""Multi-relational interaction graph, similarity graph, and the
relation-aware embedding passes built on them.

The interaction graph holds one symmetric 0/1 adjacency per event type
(training edges only); the similarity graph holds the three dense
attribute-similarity adjacencies. Both are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .errors import DataError, ShapeError, ValidationError
from .featurize import DrugTable, attribute_similarities


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """D^{-1/2} A D^{-1/2}; zero-degree rows/cols map to zero, not inf."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got {a.shape}")
    if (a < 0).any():
        raise ValidationError("adjacency entries must be nonnegative")
    if not np.allclose(a, a.T, atol=0.0):
        raise ValidationError("adjacency must be symmetric")
    degrees = a.sum(axis=1)
    inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.where(degrees > 0, degrees, 1.0)), 0.0)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


@dataclass
class RelGraph:
    """Per-relation adjacency stack over N drugs with normalized forms."""

    n_drugs: int
    n_relations: int
    adjacency: np.ndarray = field(repr=False)   # R x N x N, 0/1 symmetric
    normalized: np.ndarray = field(init=False, repr=False)
    relation_counts: np.ndarray = field(init=False, repr=False)  # R_v per node

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        if a.shape != (self.n_relations, self.n_drugs, self.n_drugs):
            raise ValidationError(f"adjacency shape {a.shape} unexpected")
        for r in range(self.n_relations):
            if np.diagonal(a[r]).any():
                raise ValidationError(f"relation {r}: self-interaction on diagonal")
            if not np.array_equal(a[r], a[r].T):
                raise ValidationError(f"relation {r}: adjacency not symmetric")
        self.adjacency = a
        self.normalized = np.stack([normalize_adjacency(a[r])
                                    for r in range(self.n_relations)])
        # R_v: number of relations in which node v has at least one neighbor
        self.relation_counts = (a.sum(axis=2) > 0).sum(axis=0).astype(np.float64)

    @classmethod
    def from_triples(cls, n_drugs: int, n_relations: int, triples) -> "RelGraph":
        """triples: iterable of (u, v, r) integer index triples, u != v."""
        a = np.zeros((n_relations, n_drugs, n_drugs))
        for u, v, r in triples:
            if u == v:
                raise ValidationError(f"self-interaction ({u},{u}) not allowed")
            if not (0 <= r < n_relations):
                raise ValidationError(f"event type {r} out of range 0..{n_relations - 1}")
            a[r, u, v] = 1.0
            a[r, v, u] = 1.0
        return cls(n_drugs, n_relations, a)

    def new_drug_mask(self) -> np.ndarray:
        """Drugs with no edge in any relation (cold-start nodes)."""
        return self.relation_counts == 0


@dataclass
class DDSGraph:
    """Dense target/enzyme/substructure similarity adjacencies."""

    targets: np.ndarray
    enzymes: np.ndarray
    substructures: np.ndarray
    normalized: dict = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("targets", "enzymes", "substructures"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValidationError(f"{name}: similarity matrix must be square")
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValidationError(f"{name}: similarity matrix must be symmetric")
            if m.min() < -1e-12 or m.max() > 1 + 1e-12:
                raise ValidationError(f"{name}: similarities must lie in [0, 1]")
            setattr(self, name, m)
        self.normalized = {
            "targets": normalize_adjacency(self.targets),
            "enzymes": normalize_adjacency(self.enzymes),
            "substructures": normalize_adjacency(self.substructures),
        }

    @classmethod
    def from_table(cls, table: DrugTable, top_k: int | None = None) -> "DDSGraph":
        """Dense by default (all drugs interconnected); optional top-k
        sparsification keeps the k strongest neighbors per row, symmetrized."""
        sims = attribute_similarities(table)
        if top_k is not None:
            for name, m in sims.items():
                sims[name] = _sparsify_top_k(m, top_k)
        return cls(sims["targets"], sims["enzymes"], sims["substructures"])


def _sparsify_top_k(m: np.ndarray, k: int) -> np.ndarray:
    n = m.shape[0]
    keep = np.zeros_like(m, dtype=bool)
    for i in range(n):
        order = np.argsort(-m[i], kind="stable")[:k]
        keep[i, order] = True
    keep |= keep.T  # keep symmetry
    return np.where(keep, m, 0.0)


# ------------------------------------------------------------- forward passes

def rgcn_forward(graph: RelGraph, x, rel_weights, self_weight) -> nk.Tensor:
    """One relational convolution over the interaction graph.

    Per node: relu of the per-relation neighbor aggregation, scaled by the
    normalized edge weight and 1/R_v, plus the self term. Nodes in no
    relation (R_v = 0) keep only the self term: the relational sum is empty
    and the division is skipped.
    """
    x = nk.as_tensor(x)
    if len(rel_weights) != graph.n_relations:
        raise ShapeError(f"need {graph.n_relations} relation weights, got {len(rel_weights)}")
    if x.shape[0] != graph.n_drugs:
        raise ShapeError(f"features have {x.shape[0]} rows for {graph.n_drugs} drugs")

    inv_counts = np.where(graph.relation_counts > 0,
                          1.0 / np.where(graph.relation_counts > 0,
                                         graph.relation_counts, 1.0),
                          0.0)
    total = None
    for r in range(graph.n_relations):
        if not graph.adjacency[r].any():
            continue  # empty relation contributes nothing
        term = nk.matmul(nk.constant(graph.normalized[r]), nk.matmul(x, rel_weights[r]))
        total = term if total is None else nk.add(total, term)
    self_term = nk.matmul(x, self_weight)
    if total is None:
        pre = self_term
    else:
        pre = nk.add(nk.scale_rows(total, inv_counts), self_term)
    return nk.relu(pre)


def dds_propagate(dds: DDSGraph, embeddings, hops: int):
    """Diffuse embeddings over each similarity channel for `hops` rounds.

    Returns the (targets, enzymes, substructures) channel results; 0 hops
    returns the input unchanged in all three channels.
    """
    if hops < 0:
        raise ValidationError(f"hop count must be >= 0, got {hops}")
    embeddings = nk.as_tensor(embeddings)
    out = []
    for name in ("targets", "enzymes", "substructures"):
        adj = nk.constant(dds.normalized[name])
        cur = embeddings
        for _ in range(hops):
            cur = nk.matmul(adj, cur)
        out.append(cur)
    return tuple(out)


def fuse_ragse(channels, w_targets, w_enzymes, w_substructures) -> nk.Tensor:
    """Blend the three propagated channels into the final drug embeddings."""
    ch_t, ch_e, ch_s = channels
    mixed = nk.add(nk.add(nk.matmul(ch_t, w_targets), nk.matmul(ch_e, w_enzymes)),
                   nk.matmul(ch_s, w_substructures))
    return nk.relu(mixed)


# ------------------------------------------------------------------ file I/O

def write_ddi_file(path, triples) -> None:
    """One interaction per line: drug_id_a <TAB> drug_id_b <TAB> event_type."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b, r in triples:
            fh.write(f"{a}\t{b}\t{r}\n")


def read_ddi_file(path) -> list[tuple[str, str, int]]:
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"expected 3 tab-separated fields, got {len(fields)}",
                                path, line_no)
            try:
                event = int(fields[2])
            except ValueError:
                raise DataError(f"bad event type {fields[2]!r}", path, line_no) from None
            if event < 0:
                raise DataError(f"event type must be >= 0, got {event}", path, line_no)
            if fields[0] == fields[1]:
                raise DataError("self-interaction not allowed", path, line_no)
            triples.append((fields[0], fields[1], event))
    return triples


def resolve_triples(table: DrugTable, triples) -> list[tuple[int, int, int]]:
    """Map drug-id triples to index triples against the table."""
    return [(table.lookup(a), table.lookup(b), r) for a, b, r in triples]
