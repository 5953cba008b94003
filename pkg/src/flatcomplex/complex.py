"""The saddle connection complex, truncated at a length bound.

Vertices are the saddle connections of length squared at most a cutoff;
two vertices span an edge when their interiors are disjoint, so simplices
are exactly the sets that extend to triangulations.  This module builds
the truncated complex, computes links, minimal join decompositions and
cordons, classifies the links of codimension-1 and codimension-2
simplices, and decides triangulations-away-from-a-cylinder.  Every
combinatorial classification is paired with a geometric certificate from
the region decomposition, so truncation artifacts are detectable.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from .numeric import Scalar
from .surface import Surface
from .saddles import (
    SaddleConnection,
    crosses,
    enumerate_connections,
    is_simplex,
)
from .triangulate import Triangulation, realize
from .triangulate import flip_ball as _tri_flip_ball
from .regions import Region, RegionDecomposition, cut, is_bigon_with_pole


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FLATCOMPLEX_THREADS", "1")))
    except ValueError:
        return 1


class TruncatedComplex:
    """All saddle connections up to a length bound, with their
    disjointness graph."""

    __slots__ = ("surface", "L2", "vertices", "graph", "dimension")

    def __init__(self, surface: Surface, L2: Scalar,
                 vertices: List[SaddleConnection], graph: nx.Graph):
        self.surface = surface
        self.L2 = L2
        self.vertices = vertices
        self.graph = graph
        # every triangulation has 3F/2 edges; simplices of that size are
        # exactly the triangulations
        self.dimension = 3 * len(surface.triangles) // 2 - 1

    def has_vertex(self, c: SaddleConnection) -> bool:
        return self.graph.has_node(c)

    def check(self) -> None:
        g = self.graph
        assert not any(g.has_edge(v, v) for v in g), "self-adjacency"
        for u, v in g.edges():
            assert g.has_edge(v, u)


def build(surface: Surface, L2, threads: Optional[int] = None) -> TruncatedComplex:
    """The truncated complex on all connections with length^2 <= L2."""
    L2 = Scalar.of(L2) if not isinstance(L2, Scalar) else L2
    verts = enumerate_connections(surface, L2)
    g = nx.Graph()
    g.add_nodes_from(verts)
    pairs = list(combinations(verts, 2))
    n = threads if threads is not None else _thread_count()

    def scan(chunk):
        return [(a, b) for a, b in chunk if not crosses(a, b)]

    if n > 1 and len(pairs) > 64:
        size = (len(pairs) + n - 1) // n
        chunks = [pairs[i:i + size] for i in range(0, len(pairs), size)]
        with ThreadPoolExecutor(max_workers=n) as ex:
            for edges in ex.map(scan, chunks):
                g.add_edges_from(edges)
    else:
        g.add_edges_from(scan(pairs))
    return TruncatedComplex(surface, L2, verts, g)


def link(K: TruncatedComplex, sigma: Iterable[SaddleConnection]) -> nx.Graph:
    """Induced subgraph on the vertices disjoint from every element of
    sigma, excluding sigma itself."""
    sigma = list(sigma)
    if not is_simplex(sigma):
        raise ValueError("sigma is not a simplex")
    sig = set(sigma)
    # members of sigma outside the truncation still constrain the link,
    # so test disjointness directly rather than through graph edges
    keep = [
        v for v in K.vertices
        if v not in sig and all(not crosses(v, s) for s in sigma)
    ]
    return K.graph.subgraph(keep).copy()


def minimal_join_decomposition(G: nx.Graph) -> List[nx.Graph]:
    """Factors of the finest join decomposition: the induced subgraphs on
    the connected components of the complement graph.  Single-vertex
    factors come first; ties broken by canonical vertex order."""
    comp = nx.complement(G)
    factors = [G.subgraph(c).copy() for c in nx.connected_components(comp)]
    factors.sort(key=lambda f: (len(f) > 1,
                                sorted(v.sort_key() for v in f.nodes())))
    return factors


def cordons(K: TruncatedComplex, sigma: Iterable[SaddleConnection]) -> Set[SaddleConnection]:
    """Link vertices disjoint from every other link vertex.

    Equivalently the single-vertex factors of the minimal join
    decomposition, and the connections present in every triangulation
    containing sigma."""
    g = link(K, sigma)
    n = g.number_of_nodes()
    return {v for v in g.nodes() if g.degree(v) == n - 1}


def cordons_by_search(
    tri0: Triangulation,
    sigma: Iterable[SaddleConnection],
    radius: int,
) -> Set[SaddleConnection]:
    """Connections in every triangulation containing sigma found within
    the given flip radius.  An over-approximation of the cordon set that
    shrinks to it as the radius grows; used as the independent check."""
    sig = set(sigma)
    common: Optional[Set[SaddleConnection]] = None
    for tri in _tri_flip_ball(tri0, radius, frozen=sig):
        es = set(tri.edges()) - sig
        common = es if common is None else (common & es)
    assert common is not None
    return common


def flip_ball(
    surface: Surface,
    tri0: Triangulation,
    sigma: Iterable[SaddleConnection],
    radius: int,
) -> List[Triangulation]:
    """All triangulations containing sigma within the given number of
    flips of tri0, flipping only edges outside sigma."""
    sig = set(sigma)
    assert sig <= set(tri0.edges()), "sigma not contained in the start"
    return _tri_flip_ball(tri0, radius, frozen=sig)


# -- link shape recognition ------------------------------------------------------


def _graph_shape(G: nx.Graph) -> str:
    """Coarse isomorphism type: NGk, Pk (path, k edges), Ck, or other."""
    n = G.number_of_nodes()
    m = G.number_of_edges()
    if m == 0:
        return f"NG{n}"
    if not nx.is_connected(G):
        return "other"
    degs = sorted(d for _, d in G.degree())
    if m == n - 1 and degs[-1] <= 2:
        return f"P{n - 1}"
    if m == n and degs == [2] * n:
        return f"C{n}"
    return "other"


def has_induced_path4(G: nx.Graph) -> bool:
    """Does the graph contain four vertices inducing a path?"""
    nodes = list(G.nodes())
    for quad in combinations(nodes, 4):
        if _graph_shape(G.subgraph(quad)) == "P3":
            return True
    return False


# -- codimension-1 and -2 classification -----------------------------------------


def classify_codim1(K: TruncatedComplex, tri: Triangulation,
                    a: SaddleConnection) -> str:
    """Link type NG1 or NG2 of the codimension-1 simplex obtained by
    removing one edge of a triangulation."""
    if not K.has_vertex(a):
        raise ValueError("truncation excludes the removed edge")
    sigma = set(tri.edges()) - {a}
    g = link(K, sigma)
    shape = _graph_shape(g)
    if shape not in ("NG1", "NG2"):
        raise RuntimeError(f"codimension-1 link has unexpected shape {shape}")
    return shape


@dataclass
class Codim2Report:
    link_type: str                 # Pinf, C5, P3, C4, P2, P1
    truncated_shape: str           # shape of the link inside the truncation
    region_kinds: List[str]
    probe_sizes: List[int] = field(default_factory=list)
    certificate: Optional[RegionDecomposition] = None


def region_link_type(dec: RegionDecomposition) -> str:
    """Expected link type of a codimension-2 simplex from the geometry of
    its non-triangular regions."""
    nontri = [r for r in dec.regions if r.kind != "triangle"]
    if len(nontri) == 1:
        r = nontri[0]
        if r.kind == "annulus" and r.marked == (1, 1):
            return "Pinf"
        if is_bigon_with_pole(r):
            return "P1"
        if r.kind == "polygon" and r.num_sides() == 5:
            bad = r.bad_diagonal_count()
            if bad == 0:
                return "C5"
            if 1 <= bad <= 3:
                return f"P{4 - bad}"
        raise RuntimeError(f"unclassifiable region {r.kind}/{r.num_sides()}")
    if len(nontri) == 2 and all(
        r.kind == "polygon" and r.num_sides() == 4 for r in nontri
    ):
        k = sum(1 for r in nontri if r.is_strictly_convex())
        return {2: "C4", 1: "P2", 0: "P1"}[k]
    raise RuntimeError("unexpected region pattern for a codimension-2 simplex")


def classify_codim2(
    K: TruncatedComplex,
    tri: Triangulation,
    a: SaddleConnection,
    b: SaddleConnection,
    probe: bool = True,
) -> Codim2Report:
    """Link type of the codimension-2 simplex obtained by removing two
    edges of a triangulation.

    A finite path in the truncation may be the shadow of the bi-infinite
    path; that case is disambiguated by growing the cutoff and by the
    geometric annulus certificate, which the report carries."""
    assert a != b
    sigma = set(tri.edges()) - {a, b}
    g = link(K, sigma)
    shape = _graph_shape(g)
    probes = [g.number_of_nodes()]

    dec = cut(K.surface, frozenset(sigma), triangulation=tri)
    kinds = [r.kind for r in dec.regions if r.kind != "triangle"]

    link_type = shape
    if probe and shape.startswith("P"):
        # a finite path may just be a window onto the bi-infinite path;
        # regrow the link at a larger cutoff and see whether it stabilizes
        bigger = [
            v for v in enumerate_connections(K.surface, K.L2 * 4)
            if v not in sigma and all(not crosses(v, s) for s in sigma)
        ]
        probes.append(len(bigger))
        if len(bigger) > g.number_of_nodes():
            link_type = "Pinf"
        else:
            link_type = shape
    elif shape.startswith("P") and shape not in ("P1", "P2", "P3"):
        link_type = "Pinf"
    if link_type == "Pinf":
        nontri = [r for r in dec.regions if r.kind != "triangle"]
        ok = (len(nontri) == 1 and nontri[0].kind == "annulus"
              and nontri[0].marked == (1, 1))
        if not ok:
            raise RuntimeError("growing path without an annulus certificate")
    if link_type not in ("Pinf", "C5", "P3", "C4", "P2", "P1"):
        raise RuntimeError(f"codimension-2 link has unexpected shape {shape}")
    return Codim2Report(
        link_type=link_type,
        truncated_shape=shape,
        region_kinds=kinds,
        probe_sizes=probes,
        certificate=dec,
    )


# -- infinite links ---------------------------------------------------------------


@dataclass
class MILReport:
    is_mil: bool
    cylinder_region: Optional[Region] = None


def is_MIL(K: TruncatedComplex, sigma: Iterable[SaddleConnection]) -> MILReport:
    """Is sigma a triangulation away from a cylinder?

    Decided geometrically: the cut along sigma must leave exactly one
    non-triangular region, and that region must be a flat cylinder.  The
    region is returned as the certificate."""
    sigma = frozenset(sigma)
    if not is_simplex(sigma):
        raise ValueError("sigma is not a simplex")
    dec = cut(K.surface, sigma)
    nontri = [r for r in dec.regions if r.kind != "triangle"]
    if len(nontri) == 1 and nontri[0].is_cylinder:
        return MILReport(True, nontri[0])
    return MILReport(False, None)
