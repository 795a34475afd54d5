"""Phylogenetic inference for linguistic data: distance, parsimony and Bayesian methods."""

__version__ = "0.1.0"
