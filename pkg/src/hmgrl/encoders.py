"""Multi-source pair-feature encoders.

One 1-D CNN over stacked SMILES matrices plus four identical FC + attention
encoders (embedding pairs, target/enzyme/substructure similarity pairs).
Their outputs concatenate into the comprehensive pair feature, ordered
(smiles, embedding, targets, enzymes, substructures).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .errors import ParameterError, ShapeError
from .featurize import SMILES_CLASSES, SMILES_POSITIONS


@dataclass
class CnnBlock:
    """Three valid 1-D convolution stages, global max pool, linear head."""

    prefix: str
    channels: tuple      # e.g. (32, 64, 96)
    kernel_widths: tuple  # e.g. (4, 6, 8)
    out_dim: int
    in_channels: int
    positions: int
    params: dict         # name -> Tensor (prefixed by owner)

    @classmethod
    def build(cls, rng, prefix: str, channels, kernel_widths, out_dim,
              in_channels: int = SMILES_CLASSES,
              positions: int = 2 * SMILES_POSITIONS) -> "CnnBlock":
        channels = tuple(channels)
        kernel_widths = tuple(kernel_widths)
        if len(channels) != len(kernel_widths):
            raise ParameterError("channels and kernel widths must pair up")
        params = {}
        c_prev, length = in_channels, positions
        for i, (c, w) in enumerate(zip(channels, kernel_widths)):
            if w > length:
                raise ParameterError(f"conv stage {i}: kernel {w} wider than input {length}")
            bound = np.sqrt(6.0 / (c_prev * w + c))
            params[f"{prefix}.conv{i}.w"] = nk.parameter(
                rng.uniform(-bound, bound, size=(c, c_prev * w)))
            params[f"{prefix}.conv{i}.b"] = nk.parameter(np.zeros((1, c)))
            c_prev, length = c, length - w + 1
        params[f"{prefix}.proj.w"] = nk.xavier_uniform(rng, channels[-1], out_dim)
        params[f"{prefix}.proj.b"] = nk.parameter(np.zeros((1, out_dim)))
        return cls(prefix, channels, kernel_widths, out_dim, in_channels,
                   positions, params)

    def forward(self, smiles_rows) -> nk.Tensor:
        """smiles_rows: K x (in_channels * positions), channel-major rows."""
        x = nk.as_tensor(smiles_rows)
        c_prev, length = self.in_channels, self.positions
        for i, (c, w) in enumerate(zip(self.channels, self.kernel_widths)):
            x = nk.conv1d_bank(x, self.params[f"{self.prefix}.conv{i}.w"],
                               self.params[f"{self.prefix}.conv{i}.b"], c_prev, length)
            x = nk.relu(x)
            c_prev, length = c, length - w + 1
        pooled = nk.global_max_pool(x, c_prev, length)
        return nk.add_rowvec(nk.matmul(pooled, self.params[f"{self.prefix}.proj.w"]),
                             self.params[f"{self.prefix}.proj.b"])


def stack_smiles_pair(s_u: np.ndarray, s_v: np.ndarray) -> np.ndarray:
    """Concatenate two one-hot SMILES matrices along positions, then flatten
    channel-major into one row for the conv layout."""
    if s_u.shape != (SMILES_CLASSES, SMILES_POSITIONS) or s_v.shape != s_u.shape:
        raise ShapeError("smiles matrices must be 64x100")
    return np.hstack([s_u, s_v]).reshape(-1)


@dataclass
class EncoderBlock:
    """FC into tokens, multi-head self-attention block, linear head."""

    prefix: str
    in_dim: int
    token_count: int
    token_dim: int
    n_heads: int
    out_dim: int
    ffn_enabled: bool
    params: dict
    positional: bool = False

    @classmethod
    def build(cls, rng, prefix: str, in_dim: int, out_dim: int,
              token_count: int = 4, token_dim: int = 64, n_heads: int = 4,
              ffn_enabled: bool = True, ffn_mult: int = 2,
              positional: bool = False) -> "EncoderBlock":
        if token_dim % n_heads:
            raise ParameterError(f"head count {n_heads} must divide token dim {token_dim}")
        width = token_count * token_dim
        params = {
            f"{prefix}.fc.w": nk.xavier_uniform(rng, in_dim, width),
            f"{prefix}.fc.b": nk.parameter(np.zeros((1, width))),
            f"{prefix}.attn.q": nk.xavier_uniform(rng, token_dim, token_dim),
            f"{prefix}.attn.k": nk.xavier_uniform(rng, token_dim, token_dim),
            f"{prefix}.attn.v": nk.xavier_uniform(rng, token_dim, token_dim),
            f"{prefix}.attn.o": nk.xavier_uniform(rng, token_dim, token_dim),
            f"{prefix}.norm.g": nk.parameter(np.ones((1, token_dim))),
            f"{prefix}.norm.b": nk.parameter(np.zeros((1, token_dim))),
            f"{prefix}.proj.w": nk.xavier_uniform(rng, width, out_dim),
            f"{prefix}.proj.b": nk.parameter(np.zeros((1, out_dim))),
        }
        if ffn_enabled:
            hidden = ffn_mult * token_dim
            params[f"{prefix}.ffn.w1"] = nk.xavier_uniform(rng, token_dim, hidden)
            params[f"{prefix}.ffn.b1"] = nk.parameter(np.zeros((1, hidden)))
            params[f"{prefix}.ffn.w2"] = nk.xavier_uniform(rng, hidden, token_dim)
            params[f"{prefix}.ffn.b2"] = nk.parameter(np.zeros((1, token_dim)))
        if positional:
            params[f"{prefix}.pos"] = nk.parameter(np.zeros((1, width)))
        return cls(prefix, in_dim, token_count, token_dim, n_heads, out_dim,
                   ffn_enabled, params, positional)

    def _attend(self, tokens: nk.Tensor) -> nk.Tensor:
        """Multi-head self-attention over each pair's token block.

        tokens: (K*token_count) x token_dim; blocks of token_count rows
        belong to one pair and never attend across pairs.
        """
        p = self.params
        q = nk.matmul(tokens, p[f"{self.prefix}.attn.q"])
        k = nk.matmul(tokens, p[f"{self.prefix}.attn.k"])
        v = nk.matmul(tokens, p[f"{self.prefix}.attn.v"])
        head_dim = self.token_dim // self.n_heads
        heads = []
        for h in range(self.n_heads):
            lo, hi = h * head_dim, (h + 1) * head_dim
            scores = nk.block_matmul(nk.slice_cols(q, lo, hi), nk.slice_cols(k, lo, hi),
                                     self.token_count, transpose_b=True)
            weights = nk.softmax_rows(nk.scale(scores, 1.0 / np.sqrt(head_dim)))
            heads.append(nk.block_matmul(weights, nk.slice_cols(v, lo, hi),
                                         self.token_count))
        return nk.matmul(nk.concat_cols(heads), p[f"{self.prefix}.attn.o"])

    def forward(self, pair_rows) -> nk.Tensor:
        """pair_rows: K x in_dim (the two drugs' features side by side)."""
        x = nk.as_tensor(pair_rows)
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"{self.prefix}: input width {x.shape[1]} != {self.in_dim}")
        p = self.params
        batch = x.shape[0]
        width = self.token_count * self.token_dim
        fc = nk.add_rowvec(nk.matmul(x, p[f"{self.prefix}.fc.w"]), p[f"{self.prefix}.fc.b"])
        if self.positional:
            fc = nk.add_rowvec(fc, p[f"{self.prefix}.pos"])
        tokens = nk.reshape(fc, batch * self.token_count, self.token_dim)
        attended = nk.add(tokens, self._attend(tokens))
        normed = nk.add_rowvec(
            nk.mul_rowvec(nk.layer_norm_rows(attended), p[f"{self.prefix}.norm.g"]),
            p[f"{self.prefix}.norm.b"])
        if self.ffn_enabled:
            hidden = nk.relu(nk.add_rowvec(nk.matmul(normed, p[f"{self.prefix}.ffn.w1"]),
                                           p[f"{self.prefix}.ffn.b1"]))
            ffn = nk.add_rowvec(nk.matmul(hidden, p[f"{self.prefix}.ffn.w2"]),
                                p[f"{self.prefix}.ffn.b2"])
            normed = nk.add(normed, ffn)
        flat = nk.reshape(normed, batch, width)
        return nk.add_rowvec(nk.matmul(flat, p[f"{self.prefix}.proj.w"]),
                             p[f"{self.prefix}.proj.b"])


def assemble_comprehensive(h_smiles, h_embedding, h_targets, h_enzymes,
                           h_substructures) -> nk.Tensor:
    """Fixed-order concatenation of the five source encodings."""
    return nk.concat_cols([h_smiles, h_embedding, h_targets, h_enzymes,
                           h_substructures])
