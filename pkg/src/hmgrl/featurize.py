"""Drug attribute ingestion and pair-level feature primitives.

Covers the drug-table file format, cosine-similarity features over binary
descriptor sequences, the fixed 64x100 one-hot SMILES encoding, and summed
per-pair attribute sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UnknownDrugError, ValidationError

# Fixed character table: 63 symbols + reserved slot 63 for anything else.
# Shipped as a versioned constant so encodings are reproducible bit-exactly.
SMILES_VOCAB = (
    "#%()+-./0123456789=@[]\\:"
    "ABCDEFGHIKLMNOPRSTVWXYZ"
    "abcdeghilnoprstu"
)
SMILES_UNKNOWN = 63
SMILES_CLASSES = 64
SMILES_POSITIONS = 100

assert len(SMILES_VOCAB) == SMILES_CLASSES - 1

_CHAR_INDEX = {ch: i for i, ch in enumerate(SMILES_VOCAB)}


@dataclass
class DrugTable:
    """Ordered drug ids with SMILES strings and binary descriptor sequences."""

    ids: list[str]
    smiles: list[str]
    targets: np.ndarray        # N x T, 0/1
    enzymes: np.ndarray        # N x E, 0/1
    substructures: np.ndarray  # N x S, 0/1
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise ValidationError("drug ids must be unique")
        for name in ("targets", "enzymes", "substructures"):
            mat = np.asarray(getattr(self, name), dtype=np.int64)
            if mat.shape[0] != n:
                raise ValidationError(f"{name} has {mat.shape[0]} rows for {n} drugs")
            if not np.isin(mat, (0, 1)).all():
                raise ValidationError(f"{name} must be 0/1")
            setattr(self, name, mat)
        if len(self.smiles) != n:
            raise ValidationError("smiles list length mismatch")
        self.index = {d: i for i, d in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def lookup(self, drug_id: str) -> int:
        try:
            return self.index[drug_id]
        except KeyError:
            raise UnknownDrugError(f"unknown drug id {drug_id!r}") from None


def cosine_similarity_matrix(seqs) -> np.ndarray:
    """Pairwise cosine similarities between the rows of a binary matrix.

    Rows that are all zero get similarity 0 against everything, including
    themselves (division-by-zero guard, not NaN).
    """
    m = np.asarray(seqs, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValidationError(f"need a 2-D row matrix, got shape {m.shape}")
    norms = np.sqrt((m * m).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    unit = m / safe[:, None]
    sim = unit @ unit.T
    zero = norms == 0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    return sim


def attribute_similarities(table: DrugTable) -> dict[str, np.ndarray]:
    return {
        "targets": cosine_similarity_matrix(table.targets),
        "enzymes": cosine_similarity_matrix(table.enzymes),
        "substructures": cosine_similarity_matrix(table.substructures),
    }


def build_initial_features(table: DrugTable) -> np.ndarray:
    """N x 3N node features: the three similarity blocks side by side."""
    sims = attribute_similarities(table)
    return np.hstack([sims["targets"], sims["enzymes"], sims["substructures"]])


def encode_smiles(s: str) -> np.ndarray:
    """64 x 100 one-hot matrix; overflow truncated, shortfall zero-padded.

    Characters outside the vocabulary map to the reserved unknown class,
    never an error.
    """
    mat = np.zeros((SMILES_CLASSES, SMILES_POSITIONS))
    for j, ch in enumerate(s[:SMILES_POSITIONS]):
        mat[_CHAR_INDEX.get(ch, SMILES_UNKNOWN), j] = 1.0
    return mat


def pair_attribute_sequence(a, b) -> np.ndarray:
    """Elementwise sum of two binary sequences (entries 0/1/2)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValidationError(f"sequence lengths differ: {a.shape} vs {b.shape}")
    return a + b


# ------------------------------------------------------------------ file I/O

def _format_indices(row: np.ndarray) -> str:
    return ",".join(str(i) for i in np.flatnonzero(row))


def _parse_indices(text: str, size: int, path, line_no) -> np.ndarray:
    row = np.zeros(size, dtype=np.int64)
    if text:
        for piece in text.split(","):
            try:
                idx = int(piece)
            except ValueError:
                raise DataError(f"bad descriptor index {piece!r}", path, line_no) from None
            if not 0 <= idx < size:
                raise DataError(f"descriptor index {idx} out of range 0..{size - 1}",
                                path, line_no)
            row[idx] = 1
    return row


def write_drug_table(path, table: DrugTable) -> None:
    """Canonical emission: header, then one tab-separated line per drug with
    sparse ascending descriptor indices. Re-ingesting is byte-identical."""
    t, e, s = (table.targets.shape[1], table.enzymes.shape[1],
               table.substructures.shape[1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#universe\ttargets={t}\tenzymes={e}\tsubstructures={s}\n")
        for i, drug_id in enumerate(table.ids):
            fh.write("\t".join([
                drug_id,
                table.smiles[i],
                _format_indices(table.targets[i]),
                _format_indices(table.enzymes[i]),
                _format_indices(table.substructures[i]),
            ]) + "\n")


def read_drug_table(path) -> DrugTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split("\t")
        if len(parts) != 4 or parts[0] != "#universe":
            raise DataError("bad header line (expected '#universe\\ttargets=..'"
                            "\\tenzymes=..\\tsubstructures=..')", path, 1)
        sizes = {}
        for piece in parts[1:]:
            key, _, value = piece.partition("=")
            try:
                sizes[key] = int(value)
            except ValueError:
                raise DataError(f"bad universe size {piece!r}", path, 1) from None
        missing = {"targets", "enzymes", "substructures"} - sizes.keys()
        if missing:
            raise DataError(f"header missing sizes for {sorted(missing)}", path, 1)

        ids, smiles, tars, enzs, subs = [], [], [], [], []
        for line_no, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise DataError(f"expected 5 tab-separated fields, got {len(fields)}",
                                path, line_no)
            ids.append(fields[0])
            smiles.append(fields[1])
            tars.append(_parse_indices(fields[2], sizes["targets"], path, line_no))
            enzs.append(_parse_indices(fields[3], sizes["enzymes"], path, line_no))
            subs.append(_parse_indices(fields[4], sizes["substructures"], path, line_no))
    if not ids:
        raise DataError("drug table has no drugs", path)
    return DrugTable(ids, smiles, np.array(tars), np.array(enzs), np.array(subs))
