"""Saddle connections: exact geodesic tracing, enumeration, crossing tests.

A saddle connection is stored relative to the base triangulation of its
surface: start corner, direction, ordered edge crossings, and the exact
per-triangle segment decomposition.  Two traversal directions normalize to
one canonical record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .numeric import Scalar, Vec2
from .surface import Slot, Surface, TRANSLATION

Corner = Tuple[int, int]


class Chart:
    """Affine map local -> developed plane: p |-> s*p + tau with s = +-1."""

    __slots__ = ("s", "tau")

    def __init__(self, s: int = 1, tau: Vec2 = Vec2(0, 0)):
        self.s = s
        self.tau = tau

    def apply(self, p: Vec2) -> Vec2:
        return (p if self.s == 1 else -p) + self.tau

    def apply_dir(self, v: Vec2) -> Vec2:
        return v if self.s == 1 else -v

    def pull(self, q: Vec2) -> Vec2:
        r = q - self.tau
        return r if self.s == 1 else -r

    def pull_dir(self, v: Vec2) -> Vec2:
        return v if self.s == 1 else -v


def gluing_chart(surface: Surface, slot: Slot) -> Tuple[Slot, int, Vec2]:
    """Map from the neighbor triangle's local chart into this triangle's
    local chart, across `slot`.  Returns (neighbor slot, sign, translation)."""
    (t2, j), flag = surface.gluings[slot]
    A = surface.vertex_position(slot)
    Q = surface.triangles[t2].vertex((j + 1) % 3)
    if flag == TRANSLATION:
        return (t2, j), 1, A - Q
    return (t2, j), -1, A + Q


def cross_chart(surface: Surface, slot: Slot, chart: Chart) -> Tuple[int, int, Chart]:
    """Developed chart of the triangle across `slot`, given the current
    triangle's developed chart."""
    (t2, j), s, tau = gluing_chart(surface, slot)
    new = Chart(chart.s * s, chart.apply_dir(tau) + chart.tau)
    return t2, j, new


def in_sector(surface: Surface, corner: Corner, w: Vec2) -> bool:
    """Is direction w in the half-open angular sector [opening, closing)
    of the corner (opening ray included, closing excluded)?"""
    u, v = surface.corner_rays(corner)
    cu = u.cross(w).sign()
    cv = w.cross(v).sign()
    if cu == 0:
        return u.dot(w).sign() > 0
    return cu > 0 and cv > 0


def resolve_ray(surface: Surface, corner: Corner, w: Vec2, max_steps: int = 10000):
    """Rotate counterclockwise around the vertex until direction w lies in
    the current corner's sector.  Returns (corner, w transformed, sign).
    The caller guarantees the intended ray is within [opening, opening+pi)
    counterclockwise of the starting corner's sector."""
    if w.is_zero():
        raise ValueError("zero direction")
    acc = 1
    for _ in range(max_steps):
        if in_sector(surface, corner, w):
            return corner, w, acc
        corner, sg = surface.corner_succ(corner)
        if sg < 0:
            w = -w
        acc *= sg
    raise RuntimeError("resolve_ray did not terminate")


@dataclass(frozen=True)
class RawTrace:
    start: Corner
    direction: Vec2                # in start corner's local chart
    end: Corner
    end_direction: Vec2            # reversed outgoing direction at end corner
    holonomy: Vec2                 # developed, start chart
    crossings: Tuple[Slot, ...]    # exit slots in traversal order
    segments: Tuple[Tuple[int, Vec2, Vec2], ...]  # (triangle, p, q) local


def trace_from_corner(
    surface: Surface,
    corner: Corner,
    w: Vec2,
    max_len2: Optional[Scalar] = None,
    max_steps: int = 10000,
) -> Optional[RawTrace]:
    """Trace the geodesic ray from a singularity until the next singularity.

    Returns None if the length bound or step cap is exceeded first.
    The direction is first resolved into the correct corner sector.
    """
    corner, w, _ = resolve_ray(surface, corner, w)
    t, i = corner
    chart = Chart()
    p0 = surface.vertex_position(corner)
    entry: Optional[int] = None  # local edge index we entered through
    seg_start = p0
    crossings: List[Slot] = []
    segments: List[Tuple[int, Vec2, Vec2]] = []
    w2 = w.norm2()

    for _ in range(max_steps):
        tri = surface.triangles[t]
        # vertex hits ahead of the segment start
        best_vertex = None  # (u_times_w2, vertex index, developed position)
        for vj in range(3):
            V = chart.apply(tri.vertex(vj))
            r = V - p0
            if r.is_zero():
                continue
            if w.cross(r).is_zero() and w.dot(r).sign() > 0:
                u_scaled = w.dot(r)  # = u * |w|^2, exact monotone in u
                if (V - seg_start).dot(w).sign() <= 0:
                    continue  # behind the current segment start
                if best_vertex is None or u_scaled < best_vertex[0]:
                    best_vertex = (u_scaled, vj, V)

        # edge crossings strictly ahead
        best_edge = None  # (u Scalar, slot index, exit point)
        for e in range(3):
            if e == entry:
                continue
            Va = chart.apply(tri.vertex(e))
            Vb = chart.apply(tri.vertex((e + 1) % 3))
            sa = w.cross(Va - p0).sign()
            sb = w.cross(Vb - p0).sign()
            if sa * sb >= 0:
                continue  # touch/vertex handled above
            dvec = Vb - Va
            u = dvec.cross(Va - p0) / dvec.cross(w)
            x = p0 + w.scale(u)
            if (x - seg_start).dot(w).sign() <= 0:
                continue
            if best_edge is None or u < best_edge[0]:
                best_edge = (u, e, x)

        if best_vertex is not None and (
            best_edge is None or best_vertex[0] < best_edge[0] * w2
        ):
            _, vj, V = best_vertex
            hol = V - p0
            if max_len2 is not None and hol.norm2() > max_len2:
                return None
            segments.append((t, chart.pull(seg_start), chart.pull(V)))
            end_corner = (t, vj)
            end_dir = chart.pull_dir(-w)
            return RawTrace(
                start=corner,
                direction=w,
                end=end_corner,
                end_direction=end_dir,
                holonomy=hol,
                crossings=tuple(crossings),
                segments=tuple(segments),
            )

        if best_edge is None:
            raise RuntimeError("trace lost inside a triangle")
        u, e, x = best_edge
        if max_len2 is not None and u * u * w2 > max_len2:
            return None
        segments.append((t, chart.pull(seg_start), chart.pull(x)))
        crossings.append((t, e))
        t, j, chart = cross_chart(surface, (t, e), chart)
        entry = j
        seg_start = x
    return None


class SaddleConnection:
    """Canonical immutable record of a saddle connection on a surface."""

    __slots__ = (
        "surface",
        "start",
        "direction",
        "end",
        "end_direction",
        "holonomy_norm",
        "length2",
        "crossings",
        "segments",
        "_by_tri",
        "_key",
    )

    def __init__(self, surface: Surface, raw: RawTrace):
        # normalize both traversal representations into half-open sector
        # form, so equal connections always compare equal
        f_c, f_w, _ = resolve_ray(surface, raw.start, raw.direction)
        r_c, r_w, _ = resolve_ray(surface, raw.end, raw.end_direction)
        raw = RawTrace(f_c, f_w, r_c, r_w, raw.holonomy,
                       raw.crossings, raw.segments)
        fwd_key = (raw.start, raw.direction.ray_key())
        rev_key = (raw.end, raw.end_direction.ray_key())
        if rev_key < fwd_key:
            raw = RawTrace(
                start=raw.end,
                direction=raw.end_direction,
                end=raw.start,
                end_direction=raw.direction,
                holonomy=Vec2(0, 0),  # recomputed below
                crossings=tuple(
                    surface.gluings[c][0] for c in reversed(raw.crossings)
                ),
                segments=tuple((t, q, p) for (t, p, q) in reversed(raw.segments)),
            )
            # holonomy of the reversed traversal, measured in its own chart:
            # the first segment's direction scaled to the full length
            hol = _full_holonomy(raw)
            raw = RawTrace(raw.start, raw.direction, raw.end, raw.end_direction,
                           hol, raw.crossings, raw.segments)
        self.surface = surface
        self.start = raw.start
        self.direction = raw.direction
        self.end = raw.end
        self.end_direction = raw.end_direction
        self.length2 = raw.holonomy.norm2()
        self.holonomy_norm = raw.holonomy.sign_normalized()
        self.crossings = raw.crossings
        self.segments = raw.segments
        by_tri: Dict[int, List[Tuple[Vec2, Vec2]]] = {}
        for t, p, q in raw.segments:
            by_tri.setdefault(t, []).append((p, q))
        self._by_tri = by_tri
        self._key = (self.start, self.direction.ray_key())

    def triangles(self) -> Iterable[int]:
        return self._by_tri.keys()

    def segments_in(self, t: int) -> Sequence[Tuple[Vec2, Vec2]]:
        return self._by_tri.get(t, ())

    def is_edge(self) -> bool:
        return not self.crossings

    def edge_slots(self) -> Optional[Tuple[Slot, Slot]]:
        """If this is a base edge, the two glued slots (canonical first)."""
        if self.crossings:
            return None
        return self.start, self.surface.gluings[self.start][0]

    def sort_key(self):
        return (self.length2.key(), self.holonomy_norm.key(), self.start,
                self.direction.ray_key())

    def __eq__(self, other):
        if not isinstance(other, SaddleConnection):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"SC(start={self.start}, hol={self.holonomy_norm})"


def _full_holonomy(raw: RawTrace) -> Vec2:
    total2 = Scalar(0)
    first_dir = None
    for t, p, q in raw.segments:
        d = q - p
        total2 = total2 + d.norm2()
        if first_dir is None:
            first_dir = d
    # all segments are parallel; holonomy = direction scaled so that
    # |hol|^2 = (sum of lengths)^2; sum of lengths = sum |d_i| with all d_i
    # positive multiples of first_dir
    assert first_dir is not None
    coeff = Scalar(0)
    for t, p, q in raw.segments:
        d = q - p
        # local charts differ by sign, so take the magnitude of the ratio
        r = d.dot(first_dir) / first_dir.norm2()
        coeff = coeff + (r if r.sign() > 0 else -r)
    return first_dir.scale(coeff)


def connection_from_ray(
    surface: Surface,
    corner: Corner,
    w: Vec2,
    max_len2: Optional[Scalar] = None,
) -> Optional[SaddleConnection]:
    raw = trace_from_corner(surface, corner, w, max_len2=max_len2)
    if raw is None:
        return None
    return SaddleConnection(surface, raw)


def edge_connection(surface: Surface, slot: Slot) -> SaddleConnection:
    t, i = slot
    conn = connection_from_ray(surface, slot, surface.triangles[t].edges[i])
    assert conn is not None and conn.is_edge()
    return conn


def base_edges(surface: Surface) -> List[SaddleConnection]:
    out = {}
    for a, b, flag in surface.gluing_pairs():
        c = edge_connection(surface, a)
        out[c._key] = c
    return sorted(out.values(), key=SaddleConnection.sort_key)


# -- enumeration -----------------------------------------------------------------


def _arc_intersect(lo: Vec2, hi: Vec2, a: Vec2, b: Vec2):
    """Intersect the open ccw arc (lo, hi) with the open ccw arc (a, b);
    both arcs subtend less than pi.  Returns (nlo, nhi) or None."""
    nlo = a if lo.cross(a).sign() > 0 else lo
    nhi = b if b.cross(hi).sign() > 0 else hi
    if nlo.cross(nhi).sign() > 0:
        return nlo, nhi
    return None


def _min_dist2_to_segment(p: Vec2, a: Vec2, b: Vec2) -> Scalar:
    d = b - a
    t_num = (p - a).dot(d)
    if t_num.sign() <= 0:
        return (p - a).norm2()
    if t_num > d.norm2():
        return (p - b).norm2()
    c = d.cross(a - p)
    return c * c / d.norm2()


def _clip_segment_to_arc(lo: Vec2, hi: Vec2, a: Vec2, b: Vec2):
    """Clip segment [a, b] (apex at origin) to the open cone (lo, hi).
    Returns clipped endpoints (both on the segment)."""
    d = b - a

    def ray_param(r: Vec2) -> Optional[Scalar]:
        den = d.cross(r)
        if den.is_zero():
            return None
        t = a.cross(r) / -den
        return t

    ca, cb = a, b
    # position of endpoints relative to the cone
    for r, side in ((lo, 1), (hi, -1)):
        # side=1: keep cross(r, x) > 0 ; side=-1: keep cross(x, r) > 0
        def ok(x: Vec2) -> bool:
            c = r.cross(x).sign() if side == 1 else x.cross(r).sign()
            return c > 0

        if ok(ca) and ok(cb):
            continue
        t = ray_param(r)
        if t is None or t < 0 or t > 1:
            if not ok(ca) and not ok(cb):
                return None
            continue
        x = a + d.scale(t)
        if ok(ca):
            cb = x
        elif ok(cb):
            ca = x
        else:
            return None
    return ca, cb


def _sector_search(
    surface: Surface,
    apex: Corner,
    found: Dict,
    L2: Scalar,
    max_depth: int = 4096,
):
    """Find all saddle connections from `apex` whose initial direction is
    strictly inside the corner's angular sector, with length^2 <= L2."""
    t, i = apex
    u_open, u_close = surface.corner_rays(apex)
    p0 = surface.vertex_position(apex)
    # shift so the apex is the origin of the developed picture
    chart0 = Chart(1, -p0)

    # every ray strictly inside the sector leaves the apex triangle through
    # the edge opposite the apex; seed the search in the neighbor
    t1, j1, chart1 = cross_chart(surface, (t, (i + 1) % 3), chart0)
    stack = [(t1, j1, chart1, u_open, u_close, 0)]
    while stack:
        t_cur, entry, chart, lo, hi, depth = stack.pop()
        if depth > max_depth:
            raise RuntimeError("sector search too deep")
        tri_cur = surface.triangles[t_cur]
        dev = [chart.apply(tri_cur.vertex(j)) for j in range(3)]

        # vertex hit: the vertex opposite the entry edge
        vj = (entry + 2) % 3
        q = dev[vj]
        if not q.is_zero() and lo.cross(q).sign() > 0 and q.cross(hi).sign() > 0:
            if q.norm2() <= L2:
                # apex chart is a pure translation, so q is already the
                # direction in the apex triangle's local chart
                raw = trace_from_corner(surface, apex, q, max_len2=L2)
                assert raw is not None
                conn = SaddleConnection(surface, raw)
                found[conn._key] = conn

        for e in range(3):
            if e == entry:
                continue
            A = dev[e]
            B = dev[(e + 1) % 3]
            ca = A.cross(B).sign()
            if ca == 0:
                continue  # seen edge-on from the apex
            a_dir, b_dir = (A, B) if ca > 0 else (B, A)
            if a_dir.is_zero() or b_dir.is_zero():
                # edge adjacent to the apex: its cone is bounded by the
                # other endpoint's direction and a sector boundary; such
                # rays stay within (lo, hi) automatically via clipping below
                continue
            arc = _arc_intersect(lo, hi, a_dir, b_dir)
            if arc is None:
                continue
            nlo, nhi = arc
            clipped = _clip_segment_to_arc(nlo, nhi, A, B)
            if clipped is None:
                continue
            ca_pt, cb_pt = clipped
            if _min_dist2_to_segment(Vec2(0, 0), ca_pt, cb_pt) > L2:
                continue
            t2, j, chart2 = cross_chart(surface, (t_cur, e), chart)
            stack.append((t2, j, chart2, nlo, nhi, depth + 1))


def enumerate_connections(surface: Surface, L2: Scalar) -> List[SaddleConnection]:
    """All saddle connections with length^2 <= L2, canonical and sorted."""
    L2 = Scalar.of(L2)
    if L2.sign() <= 0:
        raise ValueError("L2 must be positive")
    found: Dict = {}
    for c in base_edges(surface):
        if c.length2 <= L2:
            found[c._key] = c
    for t in range(len(surface.triangles)):
        for i in range(3):
            _sector_search(surface, (t, i), found, L2)
    return sorted(found.values(), key=SaddleConnection.sort_key)


# -- crossing predicate -------------------------------------------------------------


def _corner_positions(surface: Surface, t: int) -> Tuple[Vec2, Vec2, Vec2]:
    tri = surface.triangles[t]
    return tuple(tri.vertex(j) for j in range(3))


def crossing_points(a: SaddleConnection, b: SaddleConnection) -> List[Tuple[int, Vec2]]:
    """All transverse intersection events between a and b, as (triangle,
    local point) pairs.  A crossing at a point interior to a base edge is
    reported in both adjacent triangles (two events)."""
    if a is b or a == b:
        return []
    s = a.surface
    events: List[Tuple[int, Vec2]] = []
    for t in a.triangles():
        if not b.segments_in(t):
            continue
        corners = _corner_positions(s, t)
        for p1, q1 in a.segments_in(t):
            d1 = q1 - p1
            for p2, q2 in b.segments_in(t):
                d2 = q2 - p2
                if d1.cross(d2).is_zero():
                    if d1.cross(p2 - p1).is_zero():
                        # collinear: any overlap would force equal germs
                        lo1 = p1.dot(d1)
                        hi1 = q1.dot(d1)
                        lo2 = p2.dot(d1)
                        hi2 = q2.dot(d1)
                        lo1, hi1 = (lo1, hi1) if lo1 <= hi1 else (hi1, lo1)
                        lo2, hi2 = (lo2, hi2) if lo2 <= hi2 else (hi2, lo2)
                        if lo1 < hi2 and lo2 < hi1:
                            raise AssertionError(
                                "distinct saddle connections overlap collinearly"
                            )
                    continue
                denom = d1.cross(d2)
                tpar = (p2 - p1).cross(d2) / denom
                upar = (p2 - p1).cross(d1) / denom
                if tpar < 0 or tpar > 1 or upar < 0 or upar > 1:
                    continue
                x = p1 + d1.scale(tpar)
                if any((x - c).is_zero() for c in corners):
                    continue  # meeting at a singularity does not count
                events.append((t, x))
    return events


def crosses(a: SaddleConnection, b: SaddleConnection) -> bool:
    """True iff the interiors of a and b intersect transversely."""
    return bool(crossing_points(a, b))


def crossing_count(a: SaddleConnection, b: SaddleConnection) -> int:
    """Number of distinct transverse intersection points on the surface.

    An event on a base edge may be reported in both adjacent triangles;
    dedup by the canonical representative of the surface point."""
    events = crossing_points(a, b)
    if not events:
        return 0
    s = a.surface
    points = set()
    for t, x in events:
        tri = s.triangles[t]
        key = (t, x.key())
        for e in range(3):
            A = tri.vertex(e)
            B = tri.vertex((e + 1) % 3)
            if (B - A).cross(x - A).is_zero():
                (t2, j), sg, tau = gluing_chart(s, (t, e))
                x2 = x - tau if sg == 1 else tau - x
                alt = (t2, x2.key())
                key = min(key, alt)
                break
        points.add(key)
    return len(points)


def is_simplex(conns: Iterable[SaddleConnection]) -> bool:
    conns = list(conns)
    for i in range(len(conns)):
        for j in range(i + 1, len(conns)):
            if crosses(conns[i], conns[j]):
                return False
    return True
