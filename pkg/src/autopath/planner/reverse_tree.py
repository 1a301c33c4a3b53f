"""Goal-rooted cost-to-go maintained incrementally (LPA*-style repair)."""
from __future__ import annotations

import heapq
import math

INF = math.inf


class ReverseTree:
    """Cost-to-go over a mutable directed graph.

    ``out_edges[u]`` maps successor id -> edge (with ``.cost``) and ``in_edges[v]``
    maps predecessor id -> edge. The tree never looks at collision status: it
    sees whatever edges are currently in the graph. Call :meth:`update` on any
    node whose outgoing edge set changed, then :meth:`repair` to settle.
    """

    def __init__(self, out_edges: dict, in_edges: dict, goal: int):
        self.out_edges = out_edges
        self.in_edges = in_edges
        self.goal = goal
        self.g: dict[int, float] = {}
        self.rhs: dict[int, float] = {goal: 0.0}
        self.parent: dict[int, int | None] = {goal: None}
        self._heap: list[tuple[float, int]] = [(0.0, goal)]
        self._pending: list[int] = []
        self.pops = 0

    def cost_to_go(self, n: int) -> float:
        return self.g.get(n, INF)

    def _key(self, n: int) -> float:
        return min(self.g.get(n, INF), self.rhs.get(n, INF))

    def update(self, u: int) -> None:
        if u != self.goal:
            best, arg = INF, None
            g = self.g
            for v, e in self.out_edges.get(u, {}).items():
                c = e.cost + g.get(v, INF)
                if c < best:
                    best, arg = c, v
            self.rhs[u] = best
            self.parent[u] = arg
        if self.g.get(u, INF) != self.rhs.get(u, INF):
            heapq.heappush(self._heap, (self._key(u), u))

    def repair(self) -> None:
        """Drain the queue: afterwards every node satisfies g == rhs."""
        heap = self._heap
        while heap:
            k, u = heapq.heappop(heap)
            gu, ru = self.g.get(u, INF), self.rhs.get(u, INF)
            if gu == ru or k != min(gu, ru):
                continue
            self.pops += 1
            if gu > ru:
                # g only decreased, so each predecessor's rhs can be relaxed in O(1)
                self.g[u] = ru
                for p, e in self.in_edges.get(u, {}).items():
                    c = e.cost + ru
                    if c < self.rhs.get(p, INF) and p != self.goal:
                        self.rhs[p] = c
                        self.parent[p] = u
                        if self.g.get(p, INF) != c:
                            heapq.heappush(heap, (min(self.g.get(p, INF), c), p))
            else:
                self.g[u] = INF
                self.update(u)
                for p in self.in_edges.get(u, {}):
                    self.update(p)

    def remove_edge(self, u: int, defer: bool = False) -> None:
        """Notify that an outgoing edge of ``u`` was deleted from the graph.

        Deleting an edge can only raise costs, so stale values stay valid lower
        bounds; with ``defer`` the repair is postponed until :meth:`flush`.
        """
        self._pending.append(u)
        if not defer:
            self.flush()

    @property
    def pending(self) -> int:
        return len(self._pending)

    def flush(self) -> None:
        """Apply all pending edge removals.

        For every node that lost its tree edge, the reverse subtree hanging off
        it is invalidated at once and re-settled from unaffected neighbours,
        which avoids the node-by-node underconsistent sweep of plain LPA*.
        """
        roots = []
        for u in self._pending:
            par = self.parent.get(u)
            if par is not None and par in self.out_edges.get(u, {}):
                continue
            if self.g.get(u, INF) == INF:
                self.update(u)
                continue
            roots.append(u)
        self._pending = []
        affected: list[int] = []
        seen: set[int] = set()
        for r in roots:
            if r in seen:
                continue
            seen.add(r)
            affected.append(r)
            i = len(affected) - 1
            while i < len(affected):
                x = affected[i]
                i += 1
                for q in self.in_edges.get(x, {}):
                    if q not in seen and self.parent.get(q) == x:
                        seen.add(q)
                        affected.append(q)
        for x in affected:
            self.g[x] = INF
        for x in affected:
            self.update(x)
        self.repair()

    def consistent(self) -> bool:
        return not any(self.g.get(u, INF) != self.rhs.get(u, INF) for u in set(self.g) | set(self.rhs))
