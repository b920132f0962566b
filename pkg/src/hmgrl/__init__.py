"""Multi-relational drug-drug interaction event prediction.

Relation-aware graph embeddings over the interaction graph, similarity-graph
propagation for cold-start drugs, five-source pair encoders, multi-view
differentiable spectral clustering with normalized-cut regularizers, and the
full cross-validated training/evaluation protocol, on a self-contained
reverse-mode differentiation core.
"""

__version__ = "0.1.0"
