"""Molecular contrastive pre-training with fingerprint-weighted negatives and
fragment-level contrast, built on a from-scratch SMILES/GIN stack."""

__version__ = "0.1.0"
