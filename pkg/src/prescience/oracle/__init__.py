"""Independent brute-force oracle.

Nothing here steps a ``prescience.envs`` game or calls the verifier or
shield: the reference simulators in :mod:`refsim` re-implement the rule
tables on plain tuples, and the graph and replay code works on those.
"""
from prescience.oracle.graph import (
    OracleBudgetExceeded,
    ProductGraph,
    Roots,
    ShallowResult,
    initial_nodes,
    ref_bounded_safe,
)
from prescience.oracle.labels import OracleUnsupported, RefLabel
from prescience.oracle.refsim import RefGame
from prescience.oracle.replay import RefTrace, action_unsafe, ref_acc, replay, state_of


def product_graph(kind: str, params, prop, nu: int = 30, prefix=(), max_nodes: int = 2_000_000) -> ProductGraph:
    game = RefGame(kind, params)
    label = RefLabel(prop)
    roots = initial_nodes(game, label, nu, prefix)
    return ProductGraph(game, label, roots.nodes, max_nodes)


__all__ = [
    "OracleBudgetExceeded", "OracleUnsupported", "ProductGraph", "RefGame", "RefLabel", "RefTrace", "Roots",
    "ShallowResult", "action_unsafe", "initial_nodes", "product_graph", "ref_acc", "ref_bounded_safe",
    "replay", "state_of",
]
