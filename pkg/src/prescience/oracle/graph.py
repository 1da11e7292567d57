"""Explicit-state product graph of a game and one property.

Nodes are ``(state, labeller accumulator)`` pairs reachable from the
initial states; every action gives one edge tagged with the label of the
frame it produces.  On this graph:

* ``fail[v]`` is the least ``k`` for which no safe bounded path of ``k``
  frames leaves ``v`` (``None`` when ``v`` is viable, i.e. safe forever).
  Bounded safety is monotone, so ``Safe_k(v)`` is ``fail[v] is None or
  k < fail[v]``.
* The certified bound is the least ``H`` such that any state that is
  bounded-safe for ``H - 1`` frames is viable.  A shield at that bound keeps
  every trace from a viable start safe.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from prescience.core import NOOP
from prescience.oracle.labels import RefLabel
from prescience.oracle.refsim import RefGame


class OracleBudgetExceeded(Exception):
    pass


@dataclass
class Roots:
    nodes: list[tuple]  # (state, acc) per initial index
    prefix_violations: list[tuple[int, int]] = field(default_factory=list)  # (index, frame)


def initial_nodes(game: RefGame, label: RefLabel, nu: int, prefix=()) -> Roots:
    """Fold the labeller over the reset frame, the prefix, then 0..nu-1 no-ops."""
    s = game.initial()
    sc, lives, term = game.view(s)
    unsafe, acc = label.fold(label.initial, 0, sc, lives, term)
    bad = [0] if unsafe else []
    frame = 0
    for a in prefix:
        s, r = game.step(s, a)
        frame += 1
        unsafe, acc = label.fold(acc, r, *game.view(s))
        if unsafe:
            bad.append(frame)
    nodes = [(s, acc)]
    for _ in range(1, nu):
        s, r = game.step(s, NOOP)
        frame += 1
        unsafe, acc = label.fold(acc, r, *game.view(s))
        if unsafe:
            bad.append(frame)
        nodes.append((s, acc))
    # a violation at prefix frame f is seen by every initial index i with f <= len(prefix) + i
    base = len(prefix)
    violations = [(i, f) for f in bad for i in range(nu) if f <= base + i]
    return Roots(nodes, violations)


class ProductGraph:
    def __init__(self, game: RefGame, label: RefLabel, roots: list[tuple], max_nodes: int = 2_000_000):
        self.game = game
        self.label = label
        self.nodes: list[tuple] = []
        self.index: dict[tuple, int] = {}
        self.edges: list[tuple] = []  # per node: tuple of (target, unsafe) per action; () if terminal
        self.roots = [self._intern(r, max_nodes) for r in roots]
        queue = deque(dict.fromkeys(self.roots))
        seen = set(queue)
        n = game.n_actions
        while queue:
            v = queue.popleft()
            s, acc = self.nodes[v]
            if s[-1]:
                self.edges[v] = ()
                continue
            out = []
            for a in range(n):
                t, r = game.step(s, a)
                unsafe, acc2 = label.fold(acc, r, *game.view(t))
                w = self._intern((t, acc2), max_nodes)
                out.append((w, unsafe))
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
            self.edges[v] = tuple(out)
        self._fail = None

    def _intern(self, node, max_nodes: int) -> int:
        v = self.index.get(node)
        if v is None:
            if len(self.nodes) >= max_nodes:
                raise OracleBudgetExceeded(f"more than {max_nodes} product states")
            v = self.index[node] = len(self.nodes)
            self.nodes.append(node)
            self.edges.append(())
        return v

    def __len__(self) -> int:
        return len(self.nodes)

    def terminal(self, v: int) -> bool:
        return bool(self.nodes[v][0][-1])

    @property
    def fail(self) -> list[int | None]:
        """Level-by-level bounded safety until the sets stop shrinking."""
        if self._fail is None:
            n = len(self.nodes)
            safe = [True] * n
            fail: list[int | None] = [None] * n
            k = 0
            changed = True
            while changed:
                k += 1
                changed = False
                nxt = safe[:]
                for v in range(n):
                    if not safe[v] or self.terminal(v):
                        continue
                    if not any(not u and safe[w] for w, u in self.edges[v]):
                        nxt[v] = False
                        fail[v] = k
                        changed = True
                safe = nxt
            self._fail = fail
        return self._fail

    def safe_k(self, v: int, k: int) -> bool:
        f = self.fail[v]
        return f is None or k < f

    def viable(self, v: int) -> bool:
        return self.fail[v] is None

    def certified_bound(self) -> int | None:
        """Least H making a bound-H shield sound from every root; None if some root is not viable."""
        if not all(self.viable(r) for r in self.roots):
            return None
        worst = max((f for f in self.fail if f is not None), default=0)
        return worst + 1

    def violations(self) -> list[tuple[int, int]]:
        """(source node, action) of every edge that produces an unsafe frame."""
        return [(v, a) for v, out in enumerate(self.edges) for a, (_, u) in enumerate(out) if u]

    def post(self, nodes: set[int]) -> set[int]:
        return {w for v in nodes for w, _ in self.edges[v]}

    def shallow_certificate(self, window: int = 10) -> "ShallowResult":
        """Every violation has, ``window`` frames earlier, an escape.

        For a violation produced from node ``v`` the state ``k`` frames before
        the unsafe frame is ``k - 1`` steps before ``v`` (or the trace's
        initial state when the trace is shorter).  The certificate needs a
        single ``k <= window`` such that every such ancestor has a safe
        continuation of ``window`` frames.
        """
        bad = {v for v in range(len(self.nodes)) if not self.safe_k(v, window)}
        bad_roots = bad & set(self.roots)
        sources = {v for v, _ in self.violations()}
        hit = set(sources)  # sources refuted at every k so far
        layer = set(bad)  # Post^m(bad)
        from_roots: set[int] = set()  # union over j < m of Post^j(bad roots)
        root_layer = set(bad_roots)
        for m in range(window):
            refuted = layer | from_roots
            hit &= refuted
            if not hit:
                break
            from_roots |= root_layer
            root_layer = self.post(root_layer)
            layer = self.post(layer)
        example = min(hit, default=None)
        return ShallowResult(not hit, window, len(sources), None if example is None else self.nodes[example])


@dataclass(frozen=True)
class ShallowResult:
    holds: bool
    window: int
    violating_sources: int
    counterexample: tuple | None = None


def ref_bounded_safe(game: RefGame, label: RefLabel, state: tuple, acc, depth: int, memo=None) -> bool:
    """Depth-first reference check, independent of the product graph."""
    if depth <= 0 or state[-1]:
        return True
    if memo is None:
        memo = {}
    key = (state, acc, depth)
    if key in memo:
        return memo[key]
    ok = False
    for a in range(game.n_actions):
        t, r = game.step(state, a)
        unsafe, acc2 = label.fold(acc, r, *game.view(t))
        if not unsafe and ref_bounded_safe(game, label, t, acc2, depth - 1, memo):
            ok = True
            break
    memo[key] = ok
    return ok
