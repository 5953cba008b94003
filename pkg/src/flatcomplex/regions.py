"""Cutting a surface along a simplex of saddle connections.

cut() realizes a triangulation containing the simplex, removes the simplex
edges, and classifies each complementary region by developing it into the
plane and inspecting its deck transformations: a disc develops with trivial
holonomy, an annulus with an infinite cyclic translation group, a disc
quotient by a half turn carries a simple pole.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .numeric import Scalar, Vec2, orient, segment_relation
from .numeric import DISJOINT, SHARED_ENDPOINT
from .surface import Slot, Surface
from .saddles import Chart, SaddleConnection, cross_chart
from .triangulate import Triangulation, realize


@dataclass
class Region:
    kind: str                      # triangle | polygon | annulus | pole_disc | other
    tris: FrozenSet[int]
    # boundary cycles: each a list of (connection, slot); slots are in the
    # cut triangulation, ordered with the region on the left
    cycles: List[List[Tuple[SaddleConnection, Slot]]]
    area2: Scalar
    charts: Dict[int, Chart] = field(default_factory=dict)
    # polygon data (kind triangle/polygon): developed vertices, ccw
    vertices: Optional[List[Vec2]] = None
    # annulus data
    deck: Optional[Vec2] = None            # generating translation
    is_cylinder: bool = False
    marked: Optional[Tuple[int, int]] = None

    def num_sides(self) -> int:
        return sum(len(c) for c in self.cycles)

    def side_connections(self) -> List[SaddleConnection]:
        return [c for cyc in self.cycles for c, _ in cyc]

    def is_strictly_convex(self) -> bool:
        v = self.vertices
        if v is None:
            return False
        n = len(v)
        return all(
            orient(v[k - 1], v[k], v[(k + 1) % n]) > 0 for k in range(n)
        )

    def diagonals(self) -> List[Tuple[int, int]]:
        v = self.vertices
        if v is None:
            return []
        n = len(v)
        return [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if j - i != 1 and (i, j) != (0, n - 1)
        ]

    def diagonal_is_good(self, i: int, j: int) -> bool:
        """A diagonal is good when its open segment lies in the region's
        interior.  Requires an embedded polygon development."""
        v = self.vertices
        assert v is not None
        n = len(v)
        P, Q = v[i], v[j]
        for k in range(n):
            A, B = v[k], v[(k + 1) % n]
            rel = segment_relation((P, Q), (A, B))
            if rel not in (DISJOINT, SHARED_ENDPOINT):
                return False
        for k in range(n):
            if k in (i, j):
                continue
            X = v[k]
            d = Q - P
            if d.cross(X - P).is_zero():
                t = (X - P).dot(d)
                if t.sign() > 0 and t < d.norm2():
                    return False  # passes through another boundary vertex
        mid = Vec2(
            (P.x + Q.x) / Scalar(2),
            (P.y + Q.y) / Scalar(2),
        )
        return _point_in_polygon(mid, v)

    def bad_diagonal_count(self) -> int:
        return sum(1 for i, j in self.diagonals() if not self.diagonal_is_good(i, j))


def _point_in_polygon(p: Vec2, verts: Sequence[Vec2]) -> bool:
    """Strict interior test by exact crossing parity; the point must not
    lie on the boundary."""
    inside = False
    n = len(verts)
    for k in range(n):
        A, B = verts[k], verts[(k + 1) % n]
        if (A.y > p.y) != (B.y > p.y):
            x_int = A.x + (B.x - A.x) * (p.y - A.y) / (B.y - A.y)
            if x_int > p.x:
                inside = not inside
    return inside


@dataclass
class RegionDecomposition:
    simplex: List[SaddleConnection]
    triangulation: Triangulation
    regions: List[Region]

    def region_of_connection(self, c: SaddleConnection) -> List[Region]:
        return [r for r in self.regions if c in r.side_connections()]


class _UnionFind:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, x: int) -> int:
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[ra] = rb


def _boundary_cycles(
    tri: Triangulation, sigma: Set[SaddleConnection], tri_subset: Set[int]
) -> List[List[Tuple[SaddleConnection, Slot]]]:
    """Boundary cycles of one region, region kept on the left."""
    surf = tri.surf
    boundary = [
        sl for sl, c in tri.conn.items() if c in sigma and sl[0] in tri_subset
    ]
    boundary_set = set(boundary)
    visited: Set[Slot] = set()
    cycles = []
    for start in sorted(boundary):
        if start in visited:
            continue
        cyc: List[Tuple[SaddleConnection, Slot]] = []
        sl = start
        while True:
            visited.add(sl)
            cyc.append((tri.conn[sl], sl))
            # advance: rotate around the end vertex of sl inside the region
            t, e = sl
            cand = (t, (e + 1) % 3)
            while cand not in boundary_set:
                (y, f), flag = surf.gluings[cand]
                cand = (y, (f + 1) % 3)
            sl = cand
            if sl == start:
                break
        cycles.append(cyc)
    return cycles


def _deck_classify(decks: List[Tuple[int, Vec2]]):
    """Classify the group generated by the observed deck transformations.
    Returns ('trivial', None) | ('translation', generator) |
    ('pole', None) | ('other', None)."""
    nontrivial = []
    seen = set()
    for s, tau in decks:
        if s == 1 and tau.is_zero():
            continue
        k = (s, tau.key())
        if k not in seen:
            seen.add(k)
            nontrivial.append((s, tau))
    if not nontrivial:
        return "trivial", None
    if all(s == 1 for s, _ in nontrivial):
        taus = [tau for _, tau in nontrivial]
        ref = taus[0]
        ratios = []
        for tau in taus:
            if not ref.cross(tau).is_zero():
                return "other", None
            r = tau.dot(ref) / ref.norm2()
            if not r.is_rational():
                return "other", None
            ratios.append(r.as_fraction())
        # generator of the cyclic group containing all observed multiples:
        # gcd of fractions = gcd(numerators) / lcm(denominators)
        from math import gcd
        nums = [abs(fr.numerator) for fr in ratios]
        dens = [fr.denominator for fr in ratios]
        g = 0
        for x in nums:
            g = gcd(g, x)
        l = 1
        for x in dens:
            l = l * x // gcd(l, x)
        gen = ref.scale(Scalar.of(Fraction(g, l)))
        return "translation", gen
    if len(nontrivial) == 1 and nontrivial[0][0] == -1:
        return "pole", None
    return "other", None


def cut(
    base: Surface,
    simplex: Iterable[SaddleConnection],
    triangulation: Optional[Triangulation] = None,
) -> RegionDecomposition:
    """Cut the surface along a simplex and classify the pieces."""
    sigma = list(dict.fromkeys(simplex))
    sigma_set = set(sigma)
    tri = triangulation if triangulation is not None else realize(base, sigma)
    assert sigma_set <= tri.edges()
    surf = tri.surf
    n = len(surf.triangles)

    uf = _UnionFind(n)
    internal_pairs = []
    for a, b, flag in surf.gluing_pairs():
        if tri.conn[a] not in sigma_set:
            internal_pairs.append((a, b))
            uf.union(a[0], b[0])

    groups: Dict[int, List[int]] = {}
    for t in range(n):
        groups.setdefault(uf.find(t), []).append(t)

    regions: List[Region] = []
    for root in sorted(groups):
        tris = groups[root]
        tri_set = set(tris)
        # develop by BFS spanning tree
        charts: Dict[int, Chart] = {tris[0]: Chart()}
        order = [tris[0]]
        tree_pairs: Set[Tuple[Slot, Slot]] = set()
        queue = [tris[0]]
        adj: Dict[int, List[Tuple[Slot, Slot]]] = {}
        for a, b in internal_pairs:
            if a[0] in tri_set:
                adj.setdefault(a[0], []).append((a, b))
                adj.setdefault(b[0], []).append((b, a))
        while queue:
            x = queue.pop(0)
            for a, b in sorted(adj.get(x, [])):
                y = b[0]
                if y in charts:
                    continue
                t2, j, ch = cross_chart(surf, a, charts[x])
                assert t2 == y
                charts[y] = ch
                tree_pairs.add((a, b))
                tree_pairs.add((b, a))
                queue.append(y)

        decks: List[Tuple[int, Vec2]] = []
        for a, b in internal_pairs:
            if a[0] not in tri_set or (a, b) in tree_pairs:
                continue
            t2, j, expected = cross_chart(surf, a, charts[a[0]])
            actual = charts[b[0]]
            # deck = expected o actual^{-1}
            s = expected.s * actual.s
            tau = expected.tau - (actual.tau if s == 1 else -actual.tau)
            decks.append((s, tau))

        kind_raw, gen = _deck_classify(decks)
        cycles = _boundary_cycles(tri, sigma_set, tri_set)
        area2 = Scalar(0)
        for t in tris:
            area2 = area2 + surf.triangles[t].area2()

        region = Region(
            kind="other",
            tris=frozenset(tris),
            cycles=cycles,
            area2=area2,
            charts=charts,
        )
        if kind_raw == "trivial":
            assert len(cycles) == 1
            cyc = cycles[0]
            verts = []
            embedded = True
            for c, sl in cyc:
                t, e = sl
                verts.append(charts[t].apply(surf.triangles[t].vertex(e)))
            # sanity: consecutive sides share endpoints in the development
            for k in range(len(cyc)):
                c, sl = cyc[k]
                t, e = sl
                endp = charts[t].apply(surf.triangles[t].vertex((e + 1) % 3))
                nxt = verts[(k + 1) % len(cyc)]
                assert (endp - nxt).is_zero()
            # embeddedness check: developed boundary must be simple
            nv = len(verts)
            for i in range(nv):
                for j in range(i + 1, nv):
                    rel = segment_relation(
                        (verts[i], verts[(i + 1) % nv]),
                        (verts[j], verts[(j + 1) % nv]),
                    )
                    consecutive = j == i + 1 or (i == 0 and j == nv - 1)
                    if consecutive:
                        if rel != SHARED_ENDPOINT:
                            embedded = False
                    elif rel != DISJOINT:
                        embedded = False
            if embedded:
                region.vertices = verts
                region.kind = "triangle" if nv == 3 else "polygon"
            else:
                region.kind = "other"
        elif kind_raw == "translation":
            assert gen is not None
            region.deck = gen
            if len(cycles) == 2:
                region.kind = "annulus"
                region.marked = (len(cycles[0]), len(cycles[1]))
                cyl = True
                for cyc in cycles:
                    for c, sl in cyc:
                        t, e = sl
                        d = surf.triangles[t].edges[e]
                        if not d.cross(gen).is_zero():
                            cyl = False
                region.is_cylinder = cyl
        elif kind_raw == "pole":
            if len(cycles) == 1:
                region.kind = "pole_disc"
        regions.append(region)

    # every simplex connection borders regions exactly twice
    count: Dict[SaddleConnection, int] = {c: 0 for c in sigma}
    total_area = Scalar(0)
    for r in regions:
        total_area = total_area + r.area2
        for c in r.side_connections():
            count[c] += 1
    assert all(v == 2 for v in count.values()), count
    assert total_area == base.area2()
    return RegionDecomposition(simplex=sigma, triangulation=tri, regions=regions)


def is_bigon_with_pole(r: Region) -> bool:
    return r.kind == "pole_disc" and r.num_sides() == 2
