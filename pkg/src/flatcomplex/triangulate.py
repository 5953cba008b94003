"""Triangulations of a surface whose edges are tracked saddle connections.

A Triangulation pairs a combinatorial Surface (isometric to the base) with
anchors that tie each of its corners back to a base corner, so every edge
can be identified with a canonical SaddleConnection of the base surface.
Flips update both the surface and the anchors, which makes flip walks and
simplex realization exact.
"""

from __future__ import annotations

import heapq
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .numeric import Scalar, Vec2
from .surface import Slot, Surface, TRANSLATION
from .saddles import (
    Corner,
    SaddleConnection,
    base_edges,
    connection_from_ray,
    crosses,
    crossing_count,
    resolve_ray,
)

Anchor = Tuple[Corner, int]  # (base corner, sign)


class Triangulation:
    """A triangulation of the base surface by saddle connections."""

    __slots__ = ("base", "surf", "anchors", "conn", "_edge_set")

    def __init__(
        self,
        base: Surface,
        surf: Surface,
        anchors: Dict[Corner, Anchor],
        conn: Dict[Slot, SaddleConnection],
    ):
        self.base = base
        self.surf = surf
        self.anchors = anchors
        self.conn = conn
        self._edge_set: Optional[FrozenSet[SaddleConnection]] = None

    @classmethod
    def of_base(cls, base: Surface) -> "Triangulation":
        anchors = {
            (t, k): ((t, k), 1)
            for t in range(len(base.triangles))
            for k in range(3)
        }
        conn: Dict[Slot, SaddleConnection] = {}
        for c in base_edges(base):
            a, b = c.edge_slots()
            conn[a] = c
            conn[b] = c
        return cls(base, base, anchors, conn)

    def edges(self) -> FrozenSet[SaddleConnection]:
        if self._edge_set is None:
            self._edge_set = frozenset(self.conn.values())
        return self._edge_set

    def resolve(self, corner: Corner, w: Vec2) -> Tuple[Corner, Vec2]:
        """Map a direction at a corner of `surf` to the base surface:
        returns the base corner and direction ready for tracing."""
        (bc, s) = self.anchors[corner]
        wb = w if s == 1 else -w
        bc2, wb2, _ = resolve_ray(self.base, bc, wb)
        return bc2, wb2

    def trace(self, corner: Corner, w: Vec2,
              max_len2: Optional[Scalar] = None) -> Optional[SaddleConnection]:
        bc, wb = self.resolve(corner, w)
        return connection_from_ray(self.base, bc, wb, max_len2=max_len2)

    def is_flippable(self, slot: Slot) -> bool:
        return self.surf.is_flippable(slot)

    def flippable_slots(self) -> List[Slot]:
        out = []
        for a, b, flag in self.surf.gluing_pairs():
            if self.surf.is_flippable(a):
                out.append(a)
        return out

    def flip(self, slot: Slot) -> "Triangulation":
        surf = self.surf
        if not surf.is_flippable(slot):
            raise ValueError(f"slot {slot} is not flippable")
        t, i = slot
        (t2, j), flag = surf.gluings[slot]
        sgn = 1 if flag == TRANSLATION else -1
        A, B, C, D, _, _, _ = surf._quad(slot)

        new_surf = surf.flip(slot)

        old = self.anchors
        an: Dict[Corner, Anchor] = dict(old)
        for k in range(3):
            an.pop((t, k))
            an.pop((t2, k))

        def shift(anchor: Anchor, s: int) -> Anchor:
            return (anchor[0], anchor[1] * s)

        # new triangle t = (A, D, C); new triangle t2 = (D, B, C)
        an[(t, 0)] = shift(old[(t2, (j + 1) % 3)], sgn)
        an[(t, 2)] = old[(t, (i + 2) % 3)]
        an[(t2, 1)] = old[(t, (i + 1) % 3)]
        an[(t2, 0)] = shift(old[(t2, (j + 2) % 3)], sgn)

        def resolved(anchor: Anchor, w: Vec2) -> Anchor:
            (bc, s) = anchor
            wb = w if s == 1 else -w
            bc2, _, acc = resolve_ray(self.base, bc, wb)
            return (bc2, s * acc)

        # corners at D (in t) and C (in t2) open into new sectors; rotate
        # their inherited anchors so the guarantee holds again
        an[(t, 1)] = resolved(an[(t2, 0)], C - D)
        an[(t2, 2)] = resolved(old[(t, (i + 2) % 3)], D - C)

        # connection table: outer edges keep their connections
        remap = {
            (t, (i + 1) % 3): (t2, 1),
            (t, (i + 2) % 3): (t, 2),
            (t2, (j + 1) % 3): (t, 0),
            (t2, (j + 2) % 3): (t2, 0),
        }
        conn: Dict[Slot, SaddleConnection] = {}
        for sl, c in self.conn.items():
            if sl == slot or sl == (t2, j):
                continue
            conn[remap.get(sl, sl)] = c

        # new diagonal, traced from C toward D in the base surface
        (bc, s) = old[(t, (i + 2) % 3)]
        w = D - C
        diag = connection_from_ray(self.base, bc, w if s == 1 else -w)
        assert diag is not None
        assert diag.length2 == (D - C).norm2()
        conn[(t, 1)] = diag
        conn[(t2, 2)] = diag

        return Triangulation(self.base, new_surf, an, conn)

    def slot_of(self, c: SaddleConnection) -> Optional[Slot]:
        for sl, cc in self.conn.items():
            if cc == c:
                return sl
        return None

    def check(self) -> None:
        """Internal consistency: retrace every edge and compare."""
        for a, b, flag in self.surf.gluing_pairs():
            t, i = a
            w = self.surf.triangles[t].edges[i]
            c = self.trace(a, w)
            assert c is not None and c == self.conn[a], (a, c, self.conn[a])
            assert c.length2 == w.norm2()


def realize(
    base: Surface,
    simplex: Iterable[SaddleConnection],
    max_nodes: int = 20000,
) -> Triangulation:
    """A triangulation of `base` whose edge set contains the given simplex.

    Searches the flip graph, flipping only edges that cross remaining
    target connections, prioritized by total crossing count."""
    targets = list(dict.fromkeys(simplex))
    for i in range(len(targets)):
        for j in range(i + 1, len(targets)):
            if crosses(targets[i], targets[j]):
                raise ValueError("connections do not form a simplex")
    start = Triangulation.of_base(base)

    def badness(tri: Triangulation) -> int:
        total = 0
        for c in tri.edges():
            for g in targets:
                if g != c:
                    total += crossing_count(g, c)
        return total

    def key(tri: Triangulation):
        return tuple(sorted(c.sort_key() for c in tri.edges()))

    b0 = badness(start)
    if b0 == 0:
        return start
    counter = 0
    heap = [(b0, 0, start)]
    seen: Set[tuple] = {key(start)}
    nodes = 0
    target_set = set(targets)
    while heap:
        b, _, tri = heapq.heappop(heap)
        nodes += 1
        if nodes > max_nodes:
            break
        for slot in tri.flippable_slots():
            c = tri.conn[slot]
            if c in target_set:
                continue
            # only flip edges in the way of the remaining targets
            if all(crossing_count(g, c) == 0 for g in targets):
                continue
            nxt = tri.flip(slot)
            k = key(nxt)
            if k in seen:
                continue
            seen.add(k)
            nb = badness(nxt)
            if nb == 0:
                return nxt
            counter += 1
            heapq.heappush(heap, (nb, counter, nxt))
    raise RuntimeError("simplex realization search failed")


def flip_ball(
    base_tri: Triangulation,
    radius: int,
    frozen: Iterable[SaddleConnection] = (),
) -> List[Triangulation]:
    """All triangulations within `radius` flips, never flipping edges in
    `frozen`.  Deduplicated by edge set, deterministic order."""
    frozen_set = set(frozen)

    def key(tri: Triangulation):
        return tuple(sorted(c.sort_key() for c in tri.edges()))

    out = [base_tri]
    seen = {key(base_tri)}
    frontier = [base_tri]
    for _ in range(radius):
        nxt: List[Triangulation] = []
        for tri in frontier:
            for slot in tri.flippable_slots():
                if tri.conn[slot] in frozen_set:
                    continue
                ntri = tri.flip(slot)
                k = key(ntri)
                if k in seen:
                    continue
                seen.add(k)
                nxt.append(ntri)
                out.append(ntri)
        frontier = nxt
        if not frontier:
            break
    return out
