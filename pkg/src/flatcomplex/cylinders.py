"""Maximal flat cylinders in a periodic direction.

For each slope among enumerated saddle connections, all separatrices in
that direction are traced; when every one of them closes up, the direction
is periodic and the complement of the parallel connections is a disjoint
union of cylinders.  Each cylinder is assembled by walking its two boundary
chains and measuring its height with an exact perpendicular flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .numeric import Scalar, Vec2
from .surface import Surface
from .saddles import (
    Chart,
    Corner,
    RawTrace,
    SaddleConnection,
    cross_chart,
    enumerate_connections,
    gluing_chart,
    in_sector,
    resolve_ray,
    trace_from_corner,
    crosses,
)

STEP_CAP = 10000

# a wedge piece: directions at `corner` in the half-open arc [lo, hi)
WedgePiece = Tuple[Corner, Vec2, Vec2]


def _abs(x: Scalar) -> Scalar:
    return x if x.sign() >= 0 else -x


def rotate_halfturn(
    surface: Surface, corner: Corner, v: Vec2
) -> Tuple[List[WedgePiece], Corner, Vec2]:
    """Rotate clockwise by exactly half a turn from ray (corner, v).

    Walking a cylinder boundary with the cylinder on the left, the wedge of
    directions into the cylinder at a corner sweeps clockwise from the
    reversed arrival ray to the continuation ray; the two differ by exactly
    pi.  Returns the swept sector pieces (each a ccw arc [lo, hi)), plus
    the corner and local direction of the continuation ray (the first ray
    parallel to the line of v encountered clockwise)."""
    pieces: List[WedgePiece] = []
    hi = v
    cur = corner
    vloc = v
    for _ in range(STEP_CAP):
        u_open, u_close = surface.corner_rays(cur)
        for t in (vloc, -vloc):
            if t.cross(hi).sign() <= 0:
                continue
            c_open = u_open.cross(t).sign()
            if c_open > 0 or (c_open == 0 and u_open.dot(t).sign() > 0):
                pieces.append((cur, t, hi))
                return pieces, cur, t
        pieces.append((cur, u_open, hi))
        nxt, sg = surface.corner_pred(cur)
        if sg < 0:
            vloc = -vloc
        cur = nxt
        hi = surface.corner_rays(cur)[1]
    raise RuntimeError("rotate_halfturn did not terminate")


@dataclass
class _PerpHit:
    kind: str                      # 'conn' | 'corner'
    param: Scalar                  # along the flow ray, exact
    conn: Optional[SaddleConnection] = None
    conn_dir: Optional[Vec2] = None  # canonical segment direction, flow chart
    corner: Optional[Corner] = None


def trace_perpendicular(
    surface: Surface,
    t: int,
    p: Vec2,
    u: Vec2,
    sigma_segs: Dict[int, List[Tuple[SaddleConnection, Vec2, Vec2]]],
    max_steps: int = STEP_CAP,
) -> _PerpHit:
    """Flow from an interior point until the first crossing of a sigma
    connection or arrival at a singularity."""
    chart = Chart()
    p0 = p
    seg_start = p0
    entry: Optional[int] = None
    u2 = u.norm2()

    for _ in range(max_steps):
        tri = surface.triangles[t]
        events: List[Tuple[Scalar, int, object]] = []  # (param, prio, payload)

        for vj in range(3):
            V = chart.apply(tri.vertex(vj))
            r = V - p0
            if r.is_zero():
                continue
            if u.cross(r).is_zero() and u.dot(r).sign() > 0:
                param = u.dot(r) / u2
                if (V - seg_start).dot(u).sign() > 0:
                    events.append((param, 0, ("corner", (t, vj))))

        for conn, a, b in sigma_segs.get(t, ()):  # closed segments
            A = chart.apply(a)
            B = chart.apply(b)
            dvec = B - A
            den = dvec.cross(u)
            if den.is_zero():
                continue  # parallel to the flow: sigma is never parallel to u
            s_par = (A - p0).cross(u) / -den
            if s_par < 0 or s_par > 1:
                continue
            X = A + dvec.scale(s_par)
            param = u.dot(X - p0) / u2
            # a crossing exactly at the triangle entry point is genuine (the
            # segment may be stored only on this side of the edge); only the
            # flow origin itself is excluded
            if param.sign() <= 0:
                continue
            if (X - seg_start).dot(u).sign() < 0:
                continue
            events.append((param, 1, ("conn", conn, X, chart.apply_dir(b - a))))

        exit_ev = None
        for e in range(3):
            if e == entry:
                continue
            Va = chart.apply(tri.vertex(e))
            Vb = chart.apply(tri.vertex((e + 1) % 3))
            sa = u.cross(Va - p0).sign()
            sb = u.cross(Vb - p0).sign()
            if sa * sb >= 0:
                continue
            dvec = Vb - Va
            param = dvec.cross(Va - p0) / dvec.cross(u)
            X = p0 + u.scale(param)
            if (X - seg_start).dot(u).sign() <= 0:
                continue
            if exit_ev is None or param < exit_ev[0]:
                exit_ev = (param, X, e)

        events.sort(key=lambda ev: (ev[0].key(), ev[1]))
        if events and (exit_ev is None or events[0][0] <= exit_ev[0]):
            param, _, payload = events[0]
            if payload[0] == "corner":
                return _PerpHit("corner", param, corner=payload[1])
            _, conn, X, d_loc = payload
            return _PerpHit("conn", param, conn=conn, conn_dir=d_loc)
        if exit_ev is None:
            raise RuntimeError("perpendicular flow lost in a triangle")
        param, X, e = exit_ev
        seg_start = X
        t, entry, chart = cross_chart(surface, (t, e), chart)
    raise RuntimeError("perpendicular flow exceeded step cap")


@dataclass
class Cylinder:
    """A maximal flat cylinder in a periodic direction."""

    direction: Vec2                       # slope representative
    components: Tuple[Tuple[Tuple[SaddleConnection, int], ...], ...]
    circumference2: Scalar
    height2: Scalar
    area: Scalar                          # exact, = circumference * height
    wedges: Tuple[Tuple[WedgePiece, ...], ...]  # one per chain node

    def boundary_connections(self) -> Set[SaddleConnection]:
        return {c for comp in self.components for c, _ in comp}

    def pair_set(self) -> frozenset:
        return frozenset((c, s) for comp in self.components for c, s in comp)

    def sort_key(self):
        return tuple(sorted((c.sort_key(), s) for comp in self.components
                            for c, s in comp))


@dataclass
class DirectionReport:
    direction: Vec2
    complete: bool
    connections: List[SaddleConnection]
    cylinders: List[Cylinder]


def _slope_groups(conns: Sequence[SaddleConnection]) -> List[List[SaddleConnection]]:
    groups: List[List[SaddleConnection]] = []
    for c in conns:
        for g in groups:
            if g[0].holonomy_norm.cross(c.holonomy_norm).is_zero():
                g.append(c)
                break
        else:
            groups.append([c])
    return groups


def _parallel_connections(
    surface: Surface, w: Vec2
) -> Optional[List[SaddleConnection]]:
    """All saddle connections parallel to w, by tracing every separatrix in
    the +-w directions.  None when some separatrix fails to close up."""
    found: Dict = {}
    for t in range(len(surface.triangles)):
        for i in range(3):
            for eps in (w, -w):
                if not in_sector(surface, (t, i), eps):
                    continue
                raw = trace_from_corner(surface, (t, i), eps,
                                        max_steps=STEP_CAP)
                if raw is None:
                    return None
                c = SaddleConnection(surface, raw)
                assert c.holonomy_norm.cross(w).is_zero()
                found[c._key] = c
    return sorted(found.values(), key=SaddleConnection.sort_key)


def _chain_walk(
    surface: Surface,
    sigma: Set[SaddleConnection],
    start: SaddleConnection,
    orient: int,
    ref: Vec2,
) -> Tuple[List[Tuple[SaddleConnection, int]], List[Tuple[WedgePiece, ...]], Scalar]:
    """Walk one boundary chain of a cylinder kept on the left of travel.

    Returns the (connection, side) pairs in order, the half-turn wedge at
    each chain node, and the chain length divided by |ref| as an exact
    scalar (ref is a direction yardstick parallel to the chain)."""
    pairs: List[Tuple[SaddleConnection, int]] = []
    wedges: List[Tuple[WedgePiece, ...]] = []
    coeff = Scalar(0)
    cur, o = start, orient
    for _ in range(STEP_CAP):
        pairs.append((cur, o))
        coeff = coeff + _abs(cur.holonomy_norm.dot(ref)) / ref.norm2()
        if o == 1:
            corner, back = cur.end, cur.end_direction
        else:
            corner, back = cur.start, cur.direction
        pieces, c2, ray = rotate_halfturn(surface, corner, back)
        wedges.append(tuple(pieces))
        raw = trace_from_corner(surface, c2, ray, max_steps=STEP_CAP)
        assert raw is not None, "boundary chain separatrix did not close"
        nxt = SaddleConnection(surface, raw)
        assert nxt in sigma, "boundary chain left the parallel family"
        fc, fw, _ = resolve_ray(surface, raw.start, raw.direction)
        o2 = 1 if (fc, fw.ray_key()) == (nxt.start, nxt.direction.ray_key()) else -1
        cur, o = nxt, o2
        if (cur, o) == (start, orient):
            break
    else:
        raise RuntimeError("boundary chain did not close")
    return pairs, wedges, coeff


_PROBE_PARAMS = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 4),
                 Fraction(3, 4), Fraction(1, 5), Fraction(2, 5), Fraction(3, 5),
                 Fraction(4, 5), Fraction(1, 7), Fraction(2, 7), Fraction(3, 7)]


def cylinders_in_direction(
    surface: Surface, w: Vec2
) -> DirectionReport:
    """All maximal cylinders in the direction of w (slope representative)."""
    sigma = _parallel_connections(surface, w)
    if sigma is None:
        return DirectionReport(w, False, [], [])
    sigma_set = set(sigma)
    sigma_segs: Dict[int, List[Tuple[SaddleConnection, Vec2, Vec2]]] = {}
    for c in sigma:
        for t in c.triangles():
            for p, q in c.segments_in(t):
                sigma_segs.setdefault(t, []).append((c, p, q))

    todo = [(c, s) for c in sigma for s in (1, -1)]
    assigned: Set[Tuple[SaddleConnection, int]] = set()
    cyls: List[Cylinder] = []
    total_area = Scalar(0)

    for pair in todo:
        if pair in assigned:
            continue
        b, side = pair
        pairsA, wedgesA, coeffA = _chain_walk(surface, sigma_set, b, side, w)
        assigned.update(pairsA)

        # perpendicular probe into the cylinder from a boundary point
        t_seg, (p, q) = next(iter(
            (t, seg) for t in b.triangles() for seg in b.segments_in(t)
        ))
        d = q - p
        u = d.perp() if side == 1 else -d.perp()
        if b.is_edge():
            # the segment lies on a triangulation edge; if the probe points
            # out of the stored triangle, start in the neighbor instead
            slot = None
            for tt, ee in b.edge_slots():
                if tt != t_seg:
                    continue
                va = surface.triangles[tt].vertex(ee)
                vb = surface.triangles[tt].vertex((ee + 1) % 3)
                if ((p - va).is_zero() and (q - vb).is_zero()) or (
                    (p - vb).is_zero() and (q - va).is_zero()
                ):
                    slot = (tt, ee)
                    break
            assert slot is not None
            e_vec = surface.triangles[slot[0]].edges[slot[1]]
            if e_vec.cross(u).sign() < 0:
                (t2, j), sg, tau = gluing_chart(surface, slot)
                p = (p - tau) if sg == 1 else (tau - p)
                q = (q - tau) if sg == 1 else (tau - q)
                d = q - p
                u = u if sg == 1 else -u
                t_seg = t2
        hit = None
        for fr in _PROBE_PARAMS:
            m = p + d.scale(Scalar.of(fr))
            h = trace_perpendicular(surface, t_seg, m, u, sigma_segs)
            if h.kind == "conn":
                hit = h
                break
        assert hit is not None, "all perpendicular probes hit singularities"
        c2 = hit.conn
        side2 = -(hit.conn_dir.cross(u).sign())
        assert side2 != 0
        if (c2, side2) in pairsA:
            # the probe landed back on the chain already walked: the
            # cylinder's two boundary circles share this chain
            pairsB, wedgesB, coeffB = pairsA, wedgesA, coeffA
            comps = (tuple(pairsA),)
        else:
            pairsB, wedgesB, coeffB = _chain_walk(surface, sigma_set, c2, side2, w)
            assigned.update(pairsB)
            comps = (tuple(pairsA), tuple(pairsB))
        assert coeffA == coeffB, "cylinder boundary components differ in length"

        circumference2 = coeffA * coeffA * w.norm2()
        height2 = hit.param * hit.param * u.norm2()
        # |w| * |d| = |w . d| since the vectors are parallel
        area = coeffA * hit.param * _abs(w.dot(d))
        total_area = total_area + area
        cyls.append(Cylinder(
            direction=w,
            components=comps,
            circumference2=circumference2,
            height2=height2,
            area=area,
            wedges=tuple(tuple(ws) for ws in (wedgesA if len(comps) == 1
                                              else list(wedgesA) + list(wedgesB))),
        ))

    assert total_area + total_area == surface.area2(), \
        "cylinder areas do not fill the surface"
    cyls.sort(key=Cylinder.sort_key)
    return DirectionReport(w, True, sigma, cyls)


def cylinders(surface: Surface, L2: Scalar) -> Tuple[List[Cylinder], List[DirectionReport]]:
    """All maximal cylinders whose boundary consists of saddle connections
    of length^2 <= L2.  Also returns the per-direction reports."""
    L2 = Scalar.of(L2)
    conns = enumerate_connections(surface, L2)
    reports = []
    out: List[Cylinder] = []
    seen = set()
    for group in _slope_groups(conns):
        w = group[0].holonomy_norm
        rep = cylinders_in_direction(surface, w)
        reports.append(rep)
        if not rep.complete:
            continue
        for cyl in rep.cylinders:
            if any(c.length2 > L2 for c in cyl.boundary_connections()):
                continue
            k = cyl.pair_set()
            if k not in seen:
                seen.add(k)
                out.append(cyl)
    out.sort(key=Cylinder.sort_key)
    return out, reports


def is_transverse_arc(cyl: Cylinder, a: SaddleConnection) -> bool:
    """Does the saddle connection `a` cross the cylinder transversely, with
    its interior inside and endpoints on the two boundary circles?"""
    boundary = cyl.boundary_connections()
    if a in boundary:
        return False
    if any(crosses(a, bc) for bc in boundary):
        return False
    for pieces in cyl.wedges:
        for rep in ((a.start, a.direction), (a.end, a.end_direction)):
            if _ray_in_wedge(pieces, rep[0], rep[1]):
                return True
    return False


def _ray_in_wedge(pieces: Sequence[WedgePiece], corner: Corner, d: Vec2) -> bool:
    """Strict interior membership of a ray in a half-turn wedge."""
    for idx, (pc, lo, hi) in enumerate(pieces):
        if pc != corner:
            continue
        clo = lo.cross(d).sign()
        on_lo_ok = idx < len(pieces) - 1 and clo == 0 and lo.dot(d).sign() > 0
        if (clo > 0 or on_lo_ok) and d.cross(hi).sign() > 0:
            return True
    return False
