"""Hierarchical additively-regularized topic models with edge-quality measures."""

__version__ = "0.1.0"

from .artm import TopicModel, train
from .corpus import Collection, CorpusSet, Document, Token, compute_cooc, ingest, merge
from .estimators import ARTM, HierarchicalARTM
from .hierarchy import Hierarchy, fit_level, normalize_psi

__all__ = [
    "ARTM",
    "Collection",
    "CorpusSet",
    "Document",
    "Hierarchy",
    "HierarchicalARTM",
    "Token",
    "TopicModel",
    "compute_cooc",
    "fit_level",
    "ingest",
    "merge",
    "normalize_psi",
    "train",
]
