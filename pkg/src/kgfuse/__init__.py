"""Build a consolidated commonsense knowledge graph from heterogeneous sources.

The pipeline imports seven sources into one ten-column edge table, links
identical nodes, merges them, and analyses the result (degree statistics,
centrality, embeddings, word-association evaluation, QA grounding).
"""
from .edge_model import Edge, EdgeFormatError, EdgeTable, read_edge_table, write_edge_table
from .graph import Graph

__version__ = "0.1.0"

__all__ = ["Edge", "EdgeFormatError", "EdgeTable", "Graph", "read_edge_table", "write_edge_table", "__version__"]
