"""Folded core graphs for finitely generated subgroups of the free group.

A subgroup graph is built by wedging generator loops at a basepoint and
folding (identifying edges with equal labels at a shared endpoint) until no
collisions remain, then pruning hanging trees.  Membership is a label trace
from the basepoint; subgroup equality is mutual membership of generators.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .freegroup import GENERATOR_NAMES, Word


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root


@dataclass
class FoldedGraph:
    """Folded, pruned, basepointed labeled graph with canonical vertex ids."""

    n_vertices: int
    out_edges: list[dict]   # vertex -> {label: target}
    in_edges: list[dict]    # vertex -> {label: source}
    basepoint: int
    generators: tuple[Word, ...] = field(default_factory=tuple)

    def trace(self, w: Word) -> int | None:
        """Endpoint of the path reading w from the basepoint, or None."""
        v = self.basepoint
        for x in w.arr.tolist():
            v = self.out_edges[v].get(x) if x > 0 else self.in_edges[v].get(-x)
            if v is None:
                return None
        return v

    def edge_count(self) -> int:
        return sum(len(d) for d in self.out_edges)

    def dump(self) -> str:
        lines = []
        for v in range(self.n_vertices):
            for label, w in sorted(self.out_edges[v].items()):
                lines.append(f"{v} --{GENERATOR_NAMES[label-1]}--> {w}")
        return "\n".join(lines)


def subgroup_graph(gens: list[Word]) -> FoldedGraph:
    """Folded core graph of the subgroup generated by gens."""
    uf = _UnionFind()
    base = uf.make()
    out: dict[int, dict] = {base: {}}
    inc: dict[int, dict] = {base: {}}
    pending: list[tuple[int, int, int]] = []  # (u, v, label) raw edges

    for g in gens:
        arr = g.arr.tolist()
        if not arr:
            continue
        prev = base
        for i, x in enumerate(arr):
            nxt = base if i == len(arr) - 1 else uf.make()
            if nxt != base:
                out[nxt] = {}
                inc[nxt] = {}
            if x > 0:
                pending.append((prev, nxt, x))
            else:
                pending.append((nxt, prev, -x))
            prev = nxt

    def merge(a: int, b: int, queue: list):
        a, b = uf.find(a), uf.find(b)
        if a == b:
            return
        # small-into-large on the adjacency dicts
        if len(out[a]) + len(inc[a]) < len(out[b]) + len(inc[b]):
            a, b = b, a
        uf.parent[b] = a
        for label, tgt in out.pop(b).items():
            cur = out[a].get(label)
            if cur is None:
                out[a][label] = tgt
            else:
                queue.append((cur, tgt))
        for label, src in inc.pop(b).items():
            cur = inc[a].get(label)
            if cur is None:
                inc[a][label] = src
            else:
                queue.append((cur, src))

    # insert raw edges one at a time, folding collisions as they appear
    for u, v, label in pending:
        queue: list[tuple[int, int]] = []
        ur, vr = uf.find(u), uf.find(v)
        cur = out[ur].get(label)
        if cur is not None:
            queue.append((cur, v))
        else:
            cur_in = inc[vr].get(label)
            if cur_in is not None:
                queue.append((cur_in, u))
            else:
                out[ur][label] = vr
                inc[vr][label] = ur
        while queue:
            a, b = queue.pop()
            merge(a, b, queue)

    # normalize adjacency targets to representatives
    reps = sorted({uf.find(v) for v in out})
    rep_index = {r: i for i, r in enumerate(reps)}
    n = len(reps)
    out_list: list[dict] = [dict() for _ in range(n)]
    in_list: list[dict] = [dict() for _ in range(n)]
    for r in reps:
        i = rep_index[r]
        for label, tgt in out[r].items():
            out_list[i][label] = rep_index[uf.find(tgt)]
        for label, src in inc[r].items():
            in_list[i][label] = rep_index[uf.find(src)]
    base_i = rep_index[uf.find(base)]

    # prune hanging trees (never the basepoint)
    removed = set()
    degrees = [len(out_list[v]) + len(in_list[v]) for v in range(n)]
    stack = [v for v in range(n) if degrees[v] <= 1 and v != base_i]
    while stack:
        v = stack.pop()
        if v in removed:
            continue
        removed.add(v)
        for label, w in list(out_list[v].items()):
            if w not in removed:
                del in_list[w][label]
                degrees[w] -= 1
                if degrees[w] <= 1 and w != base_i:
                    stack.append(w)
        for label, u in list(in_list[v].items()):
            if u not in removed:
                del out_list[u][label]
                degrees[u] -= 1
                if degrees[u] <= 1 and u != base_i:
                    stack.append(u)
        out_list[v].clear()
        in_list[v].clear()

    # canonical relabel: BFS from the basepoint in label order
    order: list[int] = []
    seen = {base_i}
    frontier = deque([base_i])
    while frontier:
        v = frontier.popleft()
        order.append(v)
        neighbors = []
        for label in sorted(out_list[v]):
            neighbors.append(out_list[v][label])
        for label in sorted(in_list[v]):
            neighbors.append(in_list[v][label])
        for w in neighbors:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    relabel = {v: i for i, v in enumerate(order)}
    final_out: list[dict] = [dict() for _ in order]
    final_in: list[dict] = [dict() for _ in order]
    for v in order:
        i = relabel[v]
        for label, w in out_list[v].items():
            final_out[i][label] = relabel[w]
        for label, u in in_list[v].items():
            final_in[i][label] = relabel[u]
    return FoldedGraph(len(order), final_out, final_in, 0, tuple(gens))


def contains(g: FoldedGraph, w: Word) -> bool:
    """Membership of w in the subgroup carried by g."""
    return g.trace(w) == g.basepoint


def equal_subgroups(g1: FoldedGraph, g2: FoldedGraph) -> bool:
    """Mutual containment of the recorded generating sets."""
    if not g1.generators and not g2.generators:
        return True
    return (all(contains(g2, w) for w in g1.generators)
            and all(contains(g1, w) for w in g2.generators))


def generates_full_group(gens: list[Word], rank: int = 7) -> bool:
    """True iff the generators span the whole rank-n free group."""
    graph = subgroup_graph(gens)
    letters = [Word([i]) for i in range(1, rank + 1)]
    return all(contains(graph, x) for x in letters)
