"""Syntax-tree graph emission."""
from __future__ import annotations

from .graph import AST, GraphNode, HWGraph
from .parser import TreeNode


def ast_graph(tree: TreeNode, design_name: str = "") -> HWGraph:
    """One graph node per tree node, edges parent->child, ids in DFS
    preorder (node 0 is the root).  Edges are stored in canonical
    (src, dst) order so a serialization round trip is identity."""
    nodes: list[GraphNode] = []
    edges: list[tuple[int, int]] = []
    stack: list[tuple[TreeNode, int | None]] = [(tree, None)]
    while stack:
        t, parent = stack.pop()
        nid = len(nodes)
        nodes.append(GraphNode(nid, t.label, t.name))
        if parent is not None:
            edges.append((parent, nid))
        for child in reversed(t.children):
            stack.append((child, nid))
    g = HWGraph(kind=AST, nodes=nodes, edges=sorted(edges), design_name=design_name)
    g.validate()
    return g
