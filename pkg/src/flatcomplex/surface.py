"""Triangulated half-translation surfaces.

A Surface is a list of positively oriented Euclidean triangles (each given
by its three directed edge vectors) together with a fixed-point-free
involutive gluing on (triangle, edge) slots.  Each gluing carries a sign
flag: "T" glues by a translation (edge vectors w = -v), "H" by a
half-translation (w = v, transition z -> -z + c).  Vertices, cone angles
and genus are derived, never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .numeric import Mat2, Scalar, Vec2, orient

Slot = Tuple[int, int]  # (triangle index, edge index 0..2)

TRANSLATION = "T"
HALF_TRANSLATION = "H"

_BIG = 2 ** 53


class Triangle:
    """Three directed edge vectors in boundary order; e0 + e1 + e2 = 0,
    positively oriented, three distinct slopes."""

    __slots__ = ("edges",)

    def __init__(self, e0: Vec2, e1: Vec2, e2: Vec2):
        object.__setattr__(self, "edges", (e0, e1, e2))
        if not (e0 + e1 + e2).is_zero():
            raise ValueError("triangle edges do not close up")
        if e0.cross(e1).sign() <= 0:
            raise ValueError("triangle not positively oriented")
        for i in range(3):
            if self.edges[i].cross(self.edges[(i + 1) % 3]).is_zero():
                raise ValueError("triangle edges with equal slopes")

    def __setattr__(self, *unused):
        raise AttributeError("Triangle is immutable")

    def vertex(self, j: int) -> Vec2:
        """Local-chart position of vertex j (start point of edge j)."""
        if j % 3 == 0:
            return Vec2(0, 0)
        if j % 3 == 1:
            return self.edges[0]
        return self.edges[0] + self.edges[1]

    def area2(self) -> Scalar:
        """Twice the Euclidean area."""
        return self.edges[0].cross(self.edges[1])

    def __eq__(self, other):
        if not isinstance(other, Triangle):
            return NotImplemented
        return self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __repr__(self):
        return f"Triangle{self.edges}"


@dataclass
class ValidationReport:
    valid: bool
    errors: List[str] = field(default_factory=list)
    cone_angles: List[int] = field(default_factory=list)  # k per vertex class
    genus: Optional[int] = None
    num_vertices: int = 0
    num_edges: int = 0
    num_faces: int = 0
    area2: Optional[Scalar] = None  # twice the total area, exact


class Surface:
    """Immutable triangulated half-translation surface."""

    def __init__(self, d: int, triangles, gluings: Dict[Slot, Tuple[Slot, str]]):
        self.d = d
        self.triangles: Tuple[Triangle, ...] = tuple(triangles)
        # normalize gluing table to a full symmetric dict
        table: Dict[Slot, Tuple[Slot, str]] = {}
        for a, (b, flag) in gluings.items():
            a = (int(a[0]), int(a[1]))
            b = (int(b[0]), int(b[1]))
            if flag not in (TRANSLATION, HALF_TRANSLATION):
                raise ValueError(f"bad gluing flag {flag!r}")
            table[a] = (b, flag)
            table[b] = (a, flag)
        self.gluings = table
        self._orbits: Optional[List[List[Slot]]] = None

    # -- basic geometry -----------------------------------------------------

    def edge_vector(self, slot: Slot) -> Vec2:
        t, e = slot
        return self.triangles[t].edges[e]

    def vertex_position(self, slot: Slot) -> Vec2:
        t, e = slot
        return self.triangles[t].vertex(e)

    def opposite(self, slot: Slot) -> Tuple[Slot, str]:
        return self.gluings[slot]

    def area2(self) -> Scalar:
        total = Scalar(0)
        for tri in self.triangles:
            total = total + tri.area2()
        return total

    def gluing_pairs(self) -> List[Tuple[Slot, Slot, str]]:
        """Each gluing once, canonically ordered."""
        out = []
        for a, (b, flag) in self.gluings.items():
            if a <= b:
                out.append((a, b, flag))
        return sorted(out)

    # -- corners and vertex classes ------------------------------------------

    def corner_succ(self, corner: Slot) -> Tuple[Slot, int]:
        """Next corner counterclockwise around the same vertex, and the sign
        (+1/-1) by which local直 directions transform across the crossed edge.

        Corner (t, i) sits at vertex i of triangle t; crossing the incoming
        edge slot (t, (i+2)%3) reaches the next triangle corner.
        """
        t, i = corner
        (t2, j), flag = self.gluings[(t, (i + 2) % 3)]
        return (t2, j), (1 if flag == TRANSLATION else -1)

    def corner_pred(self, corner: Slot) -> Tuple[Slot, int]:
        """Previous corner (clockwise) around the vertex."""
        t, i = corner
        (t2, j), flag = self.gluings[(t, i)]
        return (t2, (j + 1) % 3), (1 if flag == TRANSLATION else -1)

    def corner_orbit(self, corner: Slot) -> List[Slot]:
        out = [corner]
        cur, _ = self.corner_succ(corner)
        while cur != corner:
            out.append(cur)
            cur, _ = self.corner_succ(cur)
        return out

    def vertex_classes(self) -> List[List[Slot]]:
        if self._orbits is None:
            seen = set()
            orbits = []
            for t in range(len(self.triangles)):
                for i in range(3):
                    if (t, i) in seen:
                        continue
                    orbit = self.corner_orbit((t, i))
                    seen.update(orbit)
                    orbits.append(orbit)
            self._orbits = orbits
        return self._orbits

    def corner_rays(self, corner: Slot) -> Tuple[Vec2, Vec2]:
        """Opening and closing rays of the corner's angular sector, local
        chart.  The sector sweeps counterclockwise from opening to closing
        by the (strictly positive, < pi) corner angle."""
        t, i = corner
        tri = self.triangles[t]
        return tri.edges[i], -tri.edges[(i + 2) % 3]

    def cone_angle(self, vertex_class: List[Slot]) -> int:
        """Exact integer k with total cone angle k*pi: develop the corner
        rays around the orbit (charts differ by +-1 only) and count the
        crossings of the horizontal line through the origin."""
        k = 0
        s = 1
        for corner in vertex_class:
            u, v = self.corner_rays(corner)
            if s < 0:
                u, v = -u, -v
            # corner sweep is ccw from u to v by an angle in (0, pi)
            if u.cross(v).sign() <= 0:
                raise ValueError(f"degenerate corner sweep at {corner}")
            for w in (Vec2(1, 0), Vec2(-1, 0)):
                # count w in the half-open arc (u, v]
                if u.cross(w).sign() > 0 and w.cross(v).sign() > 0:
                    k += 1
                elif w.cross(v).is_zero() and w.dot(v).sign() > 0:
                    k += 1
            _, sgn = self.corner_succ(corner)
            s *= sgn
        # total rotation k*pi has linear part (-1)^k
        if s != (1 if k % 2 == 0 else -1):
            raise ValueError("inconsistent chart signs around vertex")
        return k

    # -- validation -----------------------------------------------------------

    def validate(self) -> ValidationReport:
        errors: List[str] = []
        F = len(self.triangles)
        if F == 0:
            return ValidationReport(False, ["no triangles"])

        slots = {(t, i) for t in range(F) for i in range(3)}
        if set(self.gluings) != slots:
            errors.append("gluing table does not cover every edge slot exactly once")
        for a, (b, flag) in self.gluings.items():
            if a == b:
                errors.append(f"slot {a} glued to itself")
                continue
            if self.gluings.get(b) != (a, flag):
                errors.append(f"gluing at {a} is not involutive")
                continue
            v = self.edge_vector(a)
            w = self.edge_vector(b)
            if flag == TRANSLATION and not (w + v).is_zero():
                errors.append(f"translation gluing {a}~{b} violates w = -v")
            if flag == HALF_TRANSLATION and not (w - v).is_zero():
                errors.append(f"half-translation gluing {a}~{b} violates w = v")
        if errors:
            return ValidationReport(False, errors)

        # connectivity
        seen = {0}
        stack = [0]
        while stack:
            t = stack.pop()
            for i in range(3):
                (t2, _), _ = self.gluings[(t, i)]
                if t2 not in seen:
                    seen.add(t2)
                    stack.append(t2)
        if len(seen) != F:
            errors.append("surface is not connected")

        cone_angles = []
        try:
            for orbit in self.vertex_classes():
                k = self.cone_angle(orbit)
                if k < 1:
                    errors.append(f"cone angle {k}*pi < pi at orbit {orbit[0]}")
                cone_angles.append(k)
        except ValueError as exc:
            errors.append(str(exc))

        V = len(self.vertex_classes())
        E = 3 * F // 2
        chi = V - E + F
        if chi % 2 != 0:
            errors.append(f"odd Euler characteristic {chi}")
        genus = (2 - chi) // 2
        if cone_angles and sum(k - 2 for k in cone_angles) != 4 * genus - 4:
            errors.append(
                f"Gauss-Bonnet violated: sum(k-2)={sum(k - 2 for k in cone_angles)}"
                f" but 4g-4={4 * genus - 4}"
            )

        return ValidationReport(
            valid=not errors,
            errors=errors,
            cone_angles=sorted(cone_angles),
            genus=genus,
            num_vertices=V,
            num_edges=E,
            num_faces=F,
            area2=self.area2(),
        )

    # -- flips ---------------------------------------------------------------

    def _quad(self, slot: Slot):
        """Develop the neighbor across `slot` into this triangle's chart.
        Returns (A, B, C, D, t2, j, sgn): quad ccw A, D, B, C with diagonal
        A-B = the glued edge, C in t, D the developed far vertex of t2, and
        sgn the linear part (+-1) of the developing map of t2."""
        t, i = slot
        (t2, j), flag = self.gluings[slot]
        tri = self.triangles[t]
        A = tri.vertex(i)
        B = tri.vertex((i + 1) % 3)
        C = tri.vertex((i + 2) % 3)
        R = self.triangles[t2].vertex((j + 2) % 3)
        Q = self.triangles[t2].vertex((j + 1) % 3)
        if flag == TRANSLATION:
            sgn = 1
            D = R + (A - Q)
        else:
            sgn = -1
            D = -R + (A + Q)
        return A, B, C, D, t2, j, sgn

    def is_flippable(self, slot: Slot) -> bool:
        """True iff the quadrilateral glued along `slot` is strictly convex.
        Self-glued configurations (both sides on the same triangle) fold and
        are never flippable."""
        t, i = slot
        (t2, _), _ = self.gluings[slot]
        if t2 == t:
            return False
        A, B, C, D, *_ = self._quad(slot)
        return orient(C, A, D) > 0 and orient(D, B, C) > 0

    def flip(self, slot: Slot) -> "Surface":
        """Replace the diagonal of the strictly convex quadrilateral at
        `slot` by the other diagonal.  Returns a new Surface; triangle
        indices t and t2 are reused for the two new triangles."""
        if not self.is_flippable(slot):
            raise ValueError(f"edge {slot} is not flippable")
        t, i = slot
        A, B, C, D, t2, j, sgn = self._quad(slot)

        new_t = Triangle(D - A, C - D, A - C)      # (A, D, C)
        new_t2 = Triangle(B - D, C - B, D - C)     # (D, B, C)

        # old outer slot -> (new slot, sign relating new vector = s * old)
        remap = {
            (t, (i + 1) % 3): ((t2, 1), 1),
            (t, (i + 2) % 3): ((t, 2), 1),
            (t2, (j + 1) % 3): ((t, 0), sgn),
            (t2, (j + 2) % 3): ((t2, 0), sgn),
        }

        gluings: Dict[Slot, Tuple[Slot, str]] = {}
        for a, (b, flag) in self.gluings.items():
            if a in ((t, i), (t2, j)) or b in ((t, i), (t2, j)):
                continue
            if a not in remap and b not in remap:
                gluings[a] = (b, flag)
                continue
            na, sa = remap.get(a, (a, 1))
            nb, sb = remap.get(b, (b, 1))
            nflag = flag if sa * sb == 1 else (
                HALF_TRANSLATION if flag == TRANSLATION else TRANSLATION
            )
            gluings[na] = (nb, nflag)
        gluings[(t, 1)] = ((t2, 2), TRANSLATION)  # the new diagonal

        triangles = list(self.triangles)
        triangles[t] = new_t
        triangles[t2] = new_t2
        return Surface(self.d, triangles, gluings)

    # -- deformation -----------------------------------------------------------

    def deform(self, M: Mat2) -> "Surface":
        det = M.det().sign()
        if det == 0:
            raise ValueError("singular deformation matrix")
        if det > 0:
            triangles = [
                Triangle(*(M.apply(e) for e in tri.edges)) for tri in self.triangles
            ]
            return Surface(self.d, triangles, dict(self.gluings))
        # orientation-reversing: reverse each triangle's vertex order
        triangles = [
            Triangle(-M.apply(tri.edges[2]), -M.apply(tri.edges[1]), -M.apply(tri.edges[0]))
            for tri in self.triangles
        ]
        gluings = {}
        for (t, e), ((t2, e2), flag) in self.gluings.items():
            gluings[(t, 2 - e)] = ((t2, 2 - e2), flag)
        return Surface(self.d, triangles, gluings)

    # -- identity / serialization -----------------------------------------------

    def canonical_key(self):
        return (
            self.d,
            tuple(tuple((e.x.a, e.x.b, e.x.den, e.y.a, e.y.b, e.y.den) for e in tri.edges)
                  for tri in self.triangles),
            tuple(self.gluing_pairs()),
        )

    def __eq__(self, other):
        if not isinstance(other, Surface):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        return hash(self.canonical_key())

    def to_json_obj(self) -> dict:
        def num(n: int):
            return str(n) if abs(n) >= _BIG else n

        def scalar(s: Scalar):
            return [num(s.a), num(s.b), num(s.den)]

        return {
            "d": self.d,
            "triangles": [
                [[scalar(e.x), scalar(e.y)] for e in tri.edges]
                for tri in self.triangles
            ],
            "gluings": [
                [[a[0], a[1]], [b[0], b[1]], flag] for a, b, flag in self.gluing_pairs()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json_obj(obj: dict) -> "Surface":
        d = int(obj["d"])

        def scalar(v) -> Scalar:
            a, b, den = (int(x) for x in v)
            return Scalar(a, b, den, d if b != 0 else 0)

        triangles = [
            Triangle(*(Vec2(scalar(e[0]), scalar(e[1])) for e in tri))
            for tri in obj["triangles"]
        ]
        gluings = {}
        for a, b, flag in obj["gluings"]:
            gluings[(int(a[0]), int(a[1]))] = ((int(b[0]), int(b[1])), flag)
        return Surface(d, triangles, gluings)

    @staticmethod
    def from_json(text: str) -> "Surface":
        return Surface.from_json_obj(json.loads(text))


# -- corpus builders ------------------------------------------------------------


def square_torus() -> Surface:
    """Unit square torus, two triangles, one removable singularity (k=2)."""
    t0 = Triangle(Vec2(1, 0), Vec2(0, 1), Vec2(-1, -1))
    t1 = Triangle(Vec2(1, 1), Vec2(-1, 0), Vec2(0, -1))
    gluings = {
        (0, 2): ((1, 0), TRANSLATION),
        (0, 0): ((1, 1), TRANSLATION),
        (0, 1): ((1, 2), TRANSLATION),
    }
    return Surface(0, [t0, t1], gluings)


def pillowcase() -> Surface:
    """[0,2]x[0,1] with left-right translation and top/bottom folds:
    four simple poles (k=1 each), genus 0."""
    lo = [Triangle(Vec2(1, 0), Vec2(0, 1), Vec2(-1, -1)),
          Triangle(Vec2(1, 1), Vec2(-1, 0), Vec2(0, -1))]
    hi = [Triangle(Vec2(1, 0), Vec2(0, 1), Vec2(-1, -1)),
          Triangle(Vec2(1, 1), Vec2(-1, 0), Vec2(0, -1))]
    gluings = {
        (0, 2): ((1, 0), TRANSLATION),   # diagonal, left square
        (2, 2): ((3, 0), TRANSLATION),   # diagonal, right square
        (0, 1): ((3, 2), TRANSLATION),   # middle vertical x=1
        (1, 2): ((2, 1), TRANSLATION),   # x=0 ~ x=2
        (0, 0): ((2, 0), HALF_TRANSLATION),  # bottom fold (x,0)~(2-x,0)
        (1, 1): ((3, 1), HALF_TRANSLATION),  # top fold (x,1)~(2-x,1)
    }
    return Surface(0, lo + hi, gluings)


def l_shape() -> Surface:
    """Three unit squares in an L, opposite sides glued by translations:
    one singularity with cone angle 6*pi, genus 2."""
    tris = []
    for _ in range(3):
        tris.append(Triangle(Vec2(1, 0), Vec2(0, 1), Vec2(-1, -1)))
        tris.append(Triangle(Vec2(1, 1), Vec2(-1, 0), Vec2(0, -1)))
    # squares: S0 = [0,1]^2 (T0,T1), S1 = [1,2]x[0,1] (T2,T3), S2 = [0,1]x[1,2] (T4,T5)
    gluings = {
        (0, 2): ((1, 0), TRANSLATION),
        (2, 2): ((3, 0), TRANSLATION),
        (4, 2): ((5, 0), TRANSLATION),
        (0, 1): ((3, 2), TRANSLATION),  # x=1 wall between S0 and S1
        (1, 1): ((4, 0), TRANSLATION),  # y=1 wall between S0 and S2
        (0, 0): ((5, 1), TRANSLATION),  # (x,0) ~ (x,2), x in [0,1]
        (2, 0): ((3, 1), TRANSLATION),  # (x,0) ~ (x,1), x in [1,2]
        (1, 2): ((2, 1), TRANSLATION),  # (0,y) ~ (2,y), y in [0,1]
        (5, 2): ((4, 1), TRANSLATION),  # (0,y) ~ (1,y), y in [1,2]
    }
    return Surface(0, tris, gluings)


def regular_octagon() -> Surface:
    """Regular octagon (side 1) with opposite sides glued by translations:
    one singularity with cone angle 6*pi, genus 2, field Q(sqrt 2)."""
    d = 2
    h = Scalar(0, 1, 2, d)  # sqrt(2)/2
    a = Vec2(1, 0)
    b = Vec2(h, h)
    c = Vec2(0, 1)
    e = Vec2(-h, h)  # the paper example's d-vector

    def T(u: Vec2, v: Vec2) -> Triangle:
        return Triangle(u, v, -(u + v))

    tris = [
        T(a, b),
        T(-a, -b),
        Triangle(c, -(c + b + a), a + b),
        Triangle(-c, c + b + a, -(a + b)),
        Triangle(-e, a + b + c, -(c + b + a) + e),
        Triangle(e, -(a + b + c), (c + b + a) - e),
    ]
    gluings = {
        (0, 0): ((1, 0), TRANSLATION),
        (0, 1): ((1, 1), TRANSLATION),
        (0, 2): ((2, 2), TRANSLATION),
        (1, 2): ((3, 2), TRANSLATION),
        (2, 0): ((3, 0), TRANSLATION),
        (2, 1): ((4, 1), TRANSLATION),
        (3, 1): ((5, 1), TRANSLATION),
        (4, 0): ((5, 0), TRANSLATION),
        (4, 2): ((5, 2), TRANSLATION),
    }
    return Surface(d, tris, gluings)


CORPUS = {
    "square_torus": square_torus,
    "pillowcase": pillowcase,
    "l_shape": l_shape,
    "regular_octagon": regular_octagon,
}


def build_corpus(name: str) -> Surface:
    try:
        builder = CORPUS[name]
    except KeyError:
        raise ValueError(f"unknown corpus surface {name!r}") from None
    return builder()
