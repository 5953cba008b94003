"""Surface reconstruction and affine certification.

The disjointness structure of a truncated complex determines the gluing
pattern of any triangulation drawn from its vertices: the triangle test
decides which triples of edges are faces, and pairwise orientation checks
fix a consistent cyclic order on each.  A simplicial bijection between two
complexes then yields a candidate piecewise affine map, one matrix per
face; the map is globally affine exactly when those matrices agree up to
the sign ambiguity of half-translation frames.

Everything combinatorial here is cross-checked against the realized
geometry: the reconstructed pattern must match the pattern read off an
actual triangulation, and affine verdicts must match an exact per-face
matrix computation.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .numeric import Mat2, Scalar, Vec2
from .surface import Slot, Surface
from .saddles import SaddleConnection, connection_from_ray, is_simplex
from .triangulate import Triangulation, realize
from .cylinders import Cylinder, cylinders, cylinders_in_direction, is_transverse_arc
from .complex import TruncatedComplex
from .criteria import (
    OrientedTriangle,
    orientation_consistent,
    triangle_test,
)

Conn = SaddleConnection


# -- abstract view of a complex ----------------------------------------------------


class ComplexOracle:
    """A truncated complex reduced to integer vertex IDs and a symmetric,
    irreflexive disjointness predicate.

    The backing complex stays available for the sub-tests (which need it to
    compute links and flip balls), but the reconstruction logic itself only
    ever consults IDs and adjacency."""

    __slots__ = ("complex", "order", "index")

    def __init__(self, K: TruncatedComplex):
        self.complex = K
        self.order: List[Conn] = sorted(K.vertices, key=Conn.sort_key)
        self.index: Dict[Conn, int] = {c: i for i, c in enumerate(self.order)}

    def ids(self) -> range:
        return range(len(self.order))

    def disjoint(self, i: int, j: int) -> bool:
        if i == j:
            return False
        return self.complex.graph.has_edge(self.order[i], self.order[j])

    def connection(self, i: int) -> Conn:
        return self.order[i]

    def id_of(self, c: Conn) -> int:
        return self.index[c]


# -- gluing patterns ---------------------------------------------------------------


@dataclass
class GluingPattern:
    """Oriented triangles as ID triples (cyclic order significant, starting
    side not), with the side pairing induced by shared IDs."""

    triangles: List[Tuple[int, int, int]]

    def check(self) -> None:
        seen: Dict[int, int] = {}
        for tri in self.triangles:
            for x in tri:
                seen[x] = seen.get(x, 0) + 1
        bad = [x for x, n in seen.items() if n != 2]
        if bad:
            raise ValueError(f"sides {sorted(bad)} do not appear exactly twice")
        if 3 * len(self.triangles) != 2 * len(seen):
            raise ValueError("side and face counts do not close up")

    def pairing(self) -> Dict[Tuple[int, int], Tuple[int, int]]:
        """Involution on (face, side) positions pairing the two occurrences
        of each ID."""
        spots: Dict[int, List[Tuple[int, int]]] = {}
        for t, tri in enumerate(self.triangles):
            for i, x in enumerate(tri):
                spots.setdefault(x, []).append((t, i))
        out = {}
        for x, (a, b) in spots.items():
            out[a] = b
            out[b] = a
        return out

    def is_isomorphic(self, other: "GluingPattern") -> bool:
        """Exists a relabeling of IDs and faces matching the triples up to
        rotation, with a single global orientation sense."""
        return any(
            _pattern_iso(self, other, sense) is not None for sense in (1, -1)
        )

    def to_json_obj(self) -> dict:
        pairing = sorted(
            (list(a), list(b)) for a, b in self.pairing().items() if a < b
        )
        return {"triangles": [list(t) for t in self.triangles],
                "pairing": pairing}


def _pattern_iso(pat: GluingPattern, other: GluingPattern,
                 sense: int) -> Optional[Dict[int, int]]:
    """Search for an ID bijection realizing the pattern isomorphism with
    the given orientation sense, by propagating a seed flag correspondence
    through rotations and side pairings."""
    if len(pat.triangles) != len(other.triangles):
        return None
    mate, mate_o = pat.pairing(), other.pairing()

    def run(seed_face: int, seed_rot: int) -> Optional[Dict[int, int]]:
        face_map: Dict[int, Tuple[int, int]] = {0: (seed_face, seed_rot)}
        ids: Dict[int, int] = {}
        stack = [0]
        while stack:
            t = stack.pop()
            g, rot = face_map[t]
            for i in range(3):
                j = (rot + sense * i) % 3
                x, y = pat.triangles[t][i], other.triangles[g][j]
                if ids.setdefault(x, y) != y:
                    return None
                t2, i2 = mate[(t, i)]
                g2, j2 = mate_o[(g, j)]
                want = (g2, (j2 - sense * i2) % 3)
                if t2 not in face_map:
                    face_map[t2] = want
                    stack.append(t2)
                elif face_map[t2] != want:
                    return None
        if len(face_map) != len(pat.triangles):
            return None  # disconnected pattern: seed did not reach everything
        if len(set(ids.values())) != len(ids):
            return None
        return ids

    for seed_face in range(len(other.triangles)):
        for seed_rot in range(3):
            got = run(seed_face, seed_rot)
            if got is not None:
                return got
    return None


def pattern_of_triangulation(tri: Triangulation,
                             ids: Dict[Conn, int]) -> GluingPattern:
    """Geometric ground truth: read the oriented pattern straight off a
    realized triangulation (every face develops counterclockwise)."""
    triples = []
    for t in range(len(tri.surf.triangles)):
        triples.append(tuple(ids[tri.conn[(t, i)]] for i in range(3)))
    pat = GluingPattern(triples)
    pat.check()
    return pat


# -- reconstruction ----------------------------------------------------------------


def reconstruct(oracle: ComplexOracle, T_ids: Iterable[int],
                radius: int = 2) -> GluingPattern:
    """Recover the gluing pattern of the triangulation spanned by a maximal
    clique of vertex IDs, using only the triangle and orientation tests.

    Raises on the once-marked flat torus, where the elliptic involution
    exchanges the two faces of every triangulation and the pattern labels
    are only defined up to that two-fold ambiguity."""
    K = oracle.complex
    report = K.surface.validate()
    if report.genus == 1 and report.cone_angles == [2]:
        raise ValueError(
            "flat torus with one removable singularity: pattern recovery "
            "is two-fold ambiguous")

    T_ids = sorted(set(T_ids))
    conns = [oracle.connection(i) for i in T_ids]
    for i, j in combinations(T_ids, 2):
        if not oracle.disjoint(i, j):
            raise ValueError(f"IDs {i} and {j} are not disjoint")
    for z in oracle.ids():
        if z not in T_ids and all(oracle.disjoint(z, i) for i in T_ids):
            raise ValueError(f"clique is not maximal: {z} extends it")
    if len(T_ids) != report.num_edges:
        raise ValueError("clique does not span a triangulation")

    faces: List[Tuple[int, int, int]] = []
    for triple in combinations(range(len(T_ids)), 3):
        tau = [conns[k] for k in triple]
        if triangle_test(K, tau, radius=radius).bounds:
            faces.append(tuple(T_ids[k] for k in triple))
    counts: Dict[int, int] = {}
    for f in faces:
        for x in f:
            counts[x] = counts.get(x, 0) + 1
    if len(faces) != report.num_faces or any(
            counts.get(i, 0) != 2 for i in T_ids):
        raise ValueError("face detection did not close up to a surface")

    # orient every face consistently with the first one
    base = OrientedTriangle(tuple(oracle.connection(i) for i in faces[0]))
    oriented = [faces[0]]
    for f in faces[1:]:
        ot = OrientedTriangle(tuple(oracle.connection(i) for i in f))
        res = orientation_consistent(K, base, ot, radius=radius)
        if res.consistent is None:
            raise ValueError(f"orientation test inconclusive for {f}")
        oriented.append(f if res.consistent else tuple(reversed(f)))

    pat = GluingPattern(oriented)
    pat.check()

    # cross-check against the realized triangulation's own pattern
    tri = realize(K.surface, conns)
    truth = pattern_of_triangulation(tri, {c: i for c, i
                                           in zip(conns, T_ids)})
    forward = {tuple(sorted(zip(t, t[1:] + t[:1]))) for t in pat.triangles}
    back = {tuple(sorted(zip(t, t[1:] + t[:1])))
            for t in (tuple(reversed(t)) for t in pat.triangles)}
    real = {tuple(sorted(zip(t, t[1:] + t[:1]))) for t in truth.triangles}
    assert real in (forward, back), \
        "reconstructed pattern disagrees with the realized triangulation"
    assert pat.is_isomorphic(truth)
    return pat


# -- candidate maps and affine certification --------------------------------------


@dataclass
class AffineCertificate:
    matrices: List[Mat2]                 # one linear part per source face
    face_map: Dict[int, int]             # source face -> target face
    verdict: str                         # "affine" | "piecewise_affine_only"
    matrix: Optional[Mat2]               # set iff verdict == "affine"
    singularity_map: Dict[int, int]      # vertex class -> vertex class
    seed_count: int = 1                  # distinct combinatorial matchings

    @property
    def is_affine(self) -> bool:
        return self.verdict == "affine"


def _sign_normalized(M: Mat2) -> Mat2:
    for entry in (M.a, M.c, M.b, M.d):
        s = entry.sign()
        if s < 0:
            return -M
        if s > 0:
            return M
    return M


def _same_mod_sign(M: Mat2, N: Mat2) -> bool:
    return _sign_normalized(M) == _sign_normalized(N)


def _face_correspondences(
    tri: Triangulation,
    trip: Triangulation,
    phi: Dict[Conn, Conn],
) -> List[Tuple[Dict[int, Tuple[int, int]], int]]:
    """All combinatorial matchings of the two triangulations compatible
    with phi on side labels: maps face -> (image face, rotation), together
    with a global sense (+1 orientation-preserving on labels, -1 reversing).
    Propagated through gluings so shared edges land consistently."""
    n = len(tri.surf.triangles)
    if n != len(trip.surf.triangles):
        return []

    def run(seed_face: int, seed_rot: int, sense: int):
        face_map: Dict[int, Tuple[int, int]] = {0: (seed_face, seed_rot)}
        stack = [0]
        while stack:
            t = stack.pop()
            g, rot = face_map[t]
            for i in range(3):
                j = (rot + sense * i) % 3
                if phi[tri.conn[(t, i)]] != trip.conn[(g, j)]:
                    return None
                t2, i2 = tri.surf.gluings[(t, i)][0]
                g2, j2 = trip.surf.gluings[(g, j)][0]
                want = (g2, (j2 - sense * i2) % 3)
                if t2 not in face_map:
                    face_map[t2] = want
                    stack.append(t2)
                elif face_map[t2] != want:
                    return None
        return face_map if len(face_map) == n else None

    out = []
    for sense in (1, -1):
        for seed_face in range(n):
            for seed_rot in range(3):
                got = run(seed_face, seed_rot, sense)
                if got is not None:
                    out.append((got, sense))
    return out


def _corner_image(match: Tuple[int, int], sense: int, i: int) -> Tuple[int, int]:
    # side i of the source runs from corner i to corner i+1; with sense -1
    # its image is traversed backwards, so corner i lands past the image side
    g, rot = match
    j = (rot + sense * i) % 3
    return (g, j if sense == 1 else (j + 1) % 3)


def _face_matrix(tri: Triangulation, trip: Triangulation,
                 t: int, match: Tuple[int, int], sense: int) -> Mat2:
    g, rot = match
    e = tri.surf.triangles[t].edges
    u = trip.surf.triangles[g].edges

    def image(i: int) -> Vec2:
        v = u[(rot + sense * i) % 3]
        return v if sense == 1 else -v

    E = Mat2.from_columns(e[0], e[1])
    M = Mat2.from_columns(image(0), image(1)).mul(E.inverse())
    assert M.apply(e[2]).key() == image(2).key()
    return M


def _singularity_bijection(
    tri: Triangulation,
    trip: Triangulation,
    face_map: Dict[int, Tuple[int, int]],
    sense: int,
) -> Dict[int, int]:
    classes = tri.surf.vertex_classes()
    classesp = trip.surf.vertex_classes()
    where = {corner: k for k, cls in enumerate(classesp) for corner in cls}
    out: Dict[int, int] = {}
    for k, cls in enumerate(classes):
        images = {where[_corner_image(face_map[t], sense, i)]
                  for (t, i) in cls}
        if len(images) != 1:
            raise ValueError("incompatible orientations: corner map does "
                             "not descend to singularities")
        out[k] = images.pop()
    if len(set(out.values())) != len(out):
        raise ValueError("singularity map is not a bijection")
    for k, kp in out.items():
        if tri.surf.cone_angle(classes[k]) != trip.surf.cone_angle(classesp[kp]):
            raise ValueError("singularity map does not preserve cone angles")
    return out


def candidate_map(
    s: Surface,
    sp: Surface,
    phi: Dict[Conn, Conn],
    T: Iterable[Conn],
) -> AffineCertificate:
    """Build the piecewise affine map determined by a triangulation and a
    side bijection, and certify whether it is globally affine.

    Each face is sent to the face bounded by the images of its sides; the
    verdict is affine exactly when the per-face linear parts agree up to
    sign.  Raises if the image is not a triangulation or the matching fails
    orientation compatibility."""
    T = sorted(set(T), key=Conn.sort_key)
    missing = [c for c in T if c not in phi]
    if missing:
        raise ValueError(f"phi undefined on {missing[0]}")
    tri = realize(s, T)
    image = list({phi[c] for c in T})
    if len(image) != len(T) or not is_simplex(image):
        raise ValueError("image of the simplex is not a simplex")
    try:
        trip = realize(sp, image)
    except ValueError as e:
        raise ValueError("image does not triangulate the target") from e

    matchings = _face_correspondences(tri, trip, phi)
    if not matchings:
        raise ValueError("incompatible orientations: no face matching "
                         "realizes phi on this triangulation")

    certs: List[AffineCertificate] = []
    for face_map, sense in matchings:
        mats = [_face_matrix(tri, trip, t, face_map[t], sense)
                for t in range(len(tri.surf.triangles))]
        sing = _singularity_bijection(tri, trip, face_map, sense)
        first = _sign_normalized(mats[0])
        affine = all(_same_mod_sign(m, mats[0]) for m in mats[1:])
        certs.append(AffineCertificate(
            matrices=mats,
            face_map={t: face_map[t][0] for t in face_map},
            verdict="affine" if affine else "piecewise_affine_only",
            matrix=first if affine else None,
            singularity_map=sing,
            seed_count=len(matchings),
        ))
    # distinct matchings (the torus involution) must agree on the verdict
    # and, when affine, on the matrix mod sign
    head = certs[0]
    for other in certs[1:]:
        assert other.verdict == head.verdict
        if head.matrix is not None:
            assert _same_mod_sign(head.matrix, other.matrix)
    return head


def matrix_bijection(
    s: Surface, M: Mat2, conns: Iterable[Conn],
) -> Tuple[Surface, Dict[Conn, Conn]]:
    """The bijection on saddle connections induced by deforming the surface
    by an orientation-preserving matrix: same start corner, direction
    mapped by M."""
    if M.det().sign() <= 0:
        raise ValueError("matrix must be orientation-preserving")
    sp = s.deform(M)
    phi: Dict[Conn, Conn] = {}
    for c in conns:
        img = connection_from_ray(sp, c.start, M.apply(c.direction))
        assert img is not None, "affine image of a connection must exist"
        phi[c] = img
    return sp, phi


# -- cylinder correspondence -------------------------------------------------------


def certify_cyl_match(
    s: Surface,
    sp: Surface,
    phi: Dict[Conn, Conn],
    L2: Scalar,
) -> bool:
    """Corroborating check: truncated cylinders correspond under phi, each
    one's boundary mapping onto the boundary of a single target cylinder
    and transverse arcs mapping to transverse arcs."""
    cyls, _ = cylinders(s, L2)
    hit: Set[frozenset] = set()
    for C in cyls:
        bnd = sorted(C.boundary_connections(), key=Conn.sort_key)
        if any(b not in phi for b in bnd):
            raise ValueError("phi undefined on a cylinder boundary")
        imgs = [phi[b] for b in bnd]
        w = imgs[0].holonomy_norm
        if any(g.holonomy_norm.cross(w).sign() != 0 for g in imgs):
            return False
        report = cylinders_in_direction(sp, w)
        targets = [cy for cy in report.cylinders
                   if cy.boundary_connections() == set(imgs)]
        if len(targets) != 1:
            return False
        Cp = targets[0]
        key = Cp.pair_set()
        if key in hit:
            return False
        hit.add(key)
        for a, ap in phi.items():
            if is_transverse_arc(C, a) != is_transverse_arc(Cp, ap):
                return False
    # every target cylinder whose boundary lies in the image must be hit
    inverse = {v: k for k, v in phi.items()}
    cylsp, _ = cylinders(sp, L2)
    for Cp in cylsp:
        if all(b in inverse for b in Cp.boundary_connections()):
            if Cp.pair_set() not in hit:
                return False
    return True
