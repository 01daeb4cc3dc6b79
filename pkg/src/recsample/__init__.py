"""Graph sampling for training inductive recommenders on less data."""
from .graph import CollabGraph, KnowledgeGraph, NodeMap, NodeSet, read_graphs, write_graphs

__version__ = "0.1.0"

__all__ = ["CollabGraph", "KnowledgeGraph", "NodeMap", "NodeSet", "read_graphs", "write_graphs"]
