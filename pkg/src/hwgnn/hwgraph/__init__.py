"""Verilog front end: flattening, parsing, AST/DFG graph extraction."""
from .astgen import ast_graph
from .dfg import (
    DFG_LABELS,
    DFG_OP_LABELS,
    Elaborated,
    dfg_for_signal,
    dfg_graph,
    elaborate,
    merge_dfgs,
)
from .graph import AST, DFG, GraphNode, HWGraph, canonical_renumber
from .jsonio import graph_from_json, graph_to_json, read_graph, write_graph
from .parser import AST_LABELS, TreeNode, parse_verilog
from .pipeline import hw2graph
from .source import (
    GLN,
    RTL,
    FlatDesign,
    SourceUnit,
    find_top_module,
    flatten,
    load_design_dir,
    strip_comments,
)

__all__ = [
    "AST",
    "DFG",
    "RTL",
    "GLN",
    "AST_LABELS",
    "DFG_LABELS",
    "DFG_OP_LABELS",
    "GraphNode",
    "HWGraph",
    "TreeNode",
    "SourceUnit",
    "FlatDesign",
    "Elaborated",
    "strip_comments",
    "flatten",
    "find_top_module",
    "load_design_dir",
    "parse_verilog",
    "ast_graph",
    "elaborate",
    "dfg_for_signal",
    "dfg_graph",
    "merge_dfgs",
    "canonical_renumber",
    "graph_to_json",
    "graph_from_json",
    "read_graph",
    "write_graph",
    "hw2graph",
]
