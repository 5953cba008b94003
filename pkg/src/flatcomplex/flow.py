"""Straight-line flow across the strip spanned by a saddle connection.

The flow emanating from one side of a saddle connection `a` sweeps out a
half-infinite strip.  Developing that strip exactly into the plane records
two things: the points where trajectories terminate at singularities, and
the developed images of a reference simplex's connections crossing the
strip.  Those data answer visibility questions (which singularities can be
reached without being shadowed by the simplex), produce triangles with `a`
as a side, and detect awnings: a single blocking segment spanning the whole
strip height, which pins `a` as non-flippable in every triangulation
containing the simplex.

Coordinates: the strip is normalized so `a` runs from (0, 0) to (0, 1) and
the flow moves in the +x direction.  The normalizing frame is a plain
linear map over the surface's field (a basis change, entered as an exact
Mat2), so no square roots are ever introduced.  All comparisons stay in
exact arithmetic.
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .numeric import Mat2, Scalar, Vec2, orient
from .surface import Surface, Slot
from .saddles import (
    SaddleConnection,
    crosses,
    gluing_chart,
    in_sector,
    is_simplex,
    resolve_ray,
    trace_from_corner,
)
from .triangulate import Triangulation, realize, flip_ball

Corner = Slot

STEP_CAP = 200000

ONE = Scalar.of(1)
ZERO = Scalar.of(0)


# -- corner ray resolution -------------------------------------------------------


def rotate_cw_to(
    surface: Surface, corner: Corner, ref: Vec2, target: Vec2,
    max_steps: int = 10000,
) -> Tuple[Corner, Vec2]:
    """Resolve a ray that lies clockwise of a reference ray at a vertex.

    Starting from the ray (corner, ref), rotate clockwise until the target
    direction fits in the current sector.  The caller guarantees the
    intended ray is within half a turn clockwise of the reference."""
    t = target
    first = True
    for _ in range(max_steps):
        u_open, u_close = surface.corner_rays(corner)
        if first:
            co = u_open.cross(t).sign()
            in_from_open = co > 0 or (co == 0 and u_open.dot(t).sign() > 0)
            cr = t.cross(ref).sign()
            below_ref = cr > 0 or (cr == 0 and t.dot(ref).sign() > 0)
            if in_from_open and below_ref:
                return corner, t
            first = False
        elif in_sector(surface, corner, t):
            return corner, t
        corner, sg = surface.corner_pred(corner)
        if sg < 0:
            t = -t
    raise RuntimeError("rotate_cw_to did not terminate")


# -- strip development -----------------------------------------------------------


@dataclass(frozen=True)
class BlockerSegment:
    """A maximal non-horizontal developed image of a simplex connection.

    Endpoints are ordered by height (p below q).  An open endpoint lies on
    a deleted ray, strictly to the right of a recorded singularity hit."""

    p: Vec2
    q: Vec2
    closed_p: bool
    closed_q: bool
    conn: SaddleConnection

    def x_at(self, y: Scalar) -> Scalar:
        dy = self.q.y - self.p.y
        return self.p.x + (self.q.x - self.p.x) * ((y - self.p.y) / dy)

    def shadows(self, z: Vec2) -> bool:
        """Does z lie directly to the right of a point of this segment?"""
        if self.p.y < z.y < self.q.y:
            return self.x_at(z.y) < z.x
        if z.y == self.p.y:
            return self.closed_p and self.p.x < z.x
        if z.y == self.q.y:
            return self.closed_q and self.q.x < z.x
        return False


@dataclass
class FlowDomain:
    """Exact development of the flow strip of a connection, up to a horizon."""

    surface: Surface
    tri: Triangulation
    sigma: FrozenSet[SaddleConnection]
    a: SaddleConnection
    frame: Mat2
    frame_inv: Mat2
    horizon: Scalar
    z_hits: List[Vec2]
    segments: List[BlockerSegment]
    truncated: bool
    # seed bookkeeping: the strip-side triangle and the corners at the two
    # endpoints of `a` ((0,0) and (0,1) in strip coordinates)
    seed_slot: Slot
    corner_lo: Corner
    corner_hi: Corner

    height = ONE

    def _z_keys(self) -> Set[Tuple]:
        return {(z.x.key(), z.y.key()) for z in self.z_hits}

    def ray_connection(self, origin: str, target: Vec2) -> SaddleConnection:
        """Trace the straight segment from a strip endpoint of `a` towards
        a strip displacement `target`, returning the base-surface saddle
        connection it spans.  origin: "lo" for (0,0), "hi" for (0,1)."""
        v = self.frame_inv.apply(target)
        surf = self.tri.surf
        if origin == "lo":
            # rays into the strip sit clockwise of a's upward direction
            t, k = self.seed_slot
            up = -surf.triangles[t].edges[k]
            corner, v2 = rotate_cw_to(surf, self.corner_lo, up, v)
        else:
            # rays into the strip sit counterclockwise of a's downward
            # direction, which is the opening ray of the top corner
            corner, v2, _ = resolve_ray(surf, self.corner_hi, v)
        conn = self.tri.trace(corner, v2)
        if conn is None:
            raise RuntimeError("strip ray did not close up")
        assert conn.length2 == v.norm2(), "strip ray hit an unexpected point"
        return conn

    def conn_height(self, c: SaddleConnection) -> Scalar:
        """Extent of a connection transverse to the flow, in strip units.

        Local frames agree up to sign across the whole surface, so the
        component is well defined in absolute value."""
        d = self.frame.apply(c.holonomy_norm)
        return d.y if d.y.sign() >= 0 else -d.y

    def is_tallest(self, c: SaddleConnection) -> bool:
        h = self.conn_height(c)
        return all(self.conn_height(o) <= h for o in self.sigma)


def _dev(G: Mat2, s: int, off: Vec2, p: Vec2) -> Vec2:
    return G.apply(p if s == 1 else -p) + off


def _x_on(P: Vec2, Q: Vec2, y: Scalar) -> Scalar:
    return P.x + (Q.x - P.x) * ((y - P.y) / (Q.y - P.y))


def _lerp(P: Vec2, Q: Vec2, y: Scalar) -> Vec2:
    return Vec2(_x_on(P, Q, y), y)


def default_horizon(tri: Triangulation, G: Mat2) -> Scalar:
    total = Scalar.of(0)
    for s1, s2, flag in tri.surf.gluing_pairs():
        d = G.apply(tri.surf.edge_vector(s1))
        total = total + (d.x if d.x.sign() >= 0 else -d.x)
        total = total + (d.y if d.y.sign() >= 0 else -d.y)
    return total * 4 + 4


def _build(
    tri: Triangulation,
    sigma: FrozenSet[SaddleConnection],
    a: SaddleConnection,
    seed_slot: Slot,
    G: Mat2,
    horizon: Optional[Scalar],
) -> FlowDomain:
    """Develop the strip right of the seed slot's edge under frame G.

    G is expressed in the seed triangle's local frame and must send the
    edge vector at seed_slot to (0, -1), so the strip spans heights
    [0, 1] and the seed triangle lies at x > 0."""
    surf = tri.surf
    t0, k0 = seed_slot
    tri0 = surf.triangles[t0]
    assert G.apply(tri0.edges[k0]) == Vec2(0, -1), "frame does not normalize seed"
    if horizon is None:
        horizon = default_horizon(tri, G)
    Ginv = G.inverse()

    v_a0 = tri0.vertex((k0 + 1) % 3)
    off0 = -G.apply(v_a0)
    corner_lo: Corner = (t0, (k0 + 1) % 3)
    corner_hi: Corner = (t0, k0)

    sigma_slots: Dict[Slot, SaddleConnection] = {
        slot: c for slot, c in tri.conn.items() if c in sigma
    }

    z_hits: List[Vec2] = []
    pieces: List[Tuple[SaddleConnection, Vec2, Vec2]] = []
    truncated = False

    # measure-zero boundary trajectories along the strip edges: traced as
    # plain rays from the two endpoint corners of `a`
    def boundary_hit(origin: str) -> Optional[Vec2]:
        v = Ginv.apply(Vec2(1, 0))
        if origin == "lo":
            up = -tri0.edges[k0]
            corner, v2 = rotate_cw_to(surf, corner_lo, up, v)
        else:
            corner, v2, _ = resolve_ray(surf, corner_hi, v)
        # bound on local length so that the strip x stays within horizon;
        # v maps to (1, 0) by construction
        L2 = horizon * horizon * v.norm2()
        raw = trace_from_corner(surf, corner, v2, max_len2=L2)
        if raw is None:
            return None
        # holonomy is developed in the resolved start chart; resolution
        # only ever flips signs, so map back by the sign relating v2 to v
        if (v2 - v).is_zero():
            sgn = 1
        elif (v2 + v).is_zero():
            sgn = -1
        else:
            raise AssertionError("boundary ray resolution changed direction")
        d = G.apply(raw.holonomy if sgn == 1 else -raw.holonomy)
        assert d.y.is_zero()
        y = ZERO if origin == "lo" else ONE
        return Vec2(d.x, y)

    for origin in ("lo", "hi"):
        z = boundary_hit(origin)
        if z is not None:
            z_hits.append(z)
        else:
            truncated = True

    # interior trajectories: beams of parallel flow lines sharing a chart
    queue = deque()
    queue.append((t0, k0, 1, off0, ZERO, ONE))
    steps = 0
    while queue:
        steps += 1
        if steps > STEP_CAP:
            raise RuntimeError("strip development exceeded step cap")
        t, e, s, off, lo, hi = queue.popleft()
        tri_t = surf.triangles[t]
        devs = [_dev(G, s, off, tri_t.vertex(j)) for j in range(3)]

        for j in range(3):
            c = sigma_slots.get((t, j))
            if c is None:
                continue
            P, Q = devs[j], devs[(j + 1) % 3]
            if P.y == Q.y:
                continue  # horizontal segments never block
            if Q.y < P.y:
                P, Q = Q, P
            if Q.y <= lo or P.y >= hi:
                continue
            if P.y < lo:
                P = _lerp(P, Q, lo)
            if Q.y > hi:
                P, Q = P, _lerp(P, Q, hi)
            if P.y == Q.y:
                continue
            if P.x.is_zero() and Q.x.is_zero():
                continue  # the seed copy of `a` itself
            pieces.append((c, P, Q))

        o = (e + 2) % 3
        yo = devs[o].y
        if lo < yo < hi:
            if devs[o].x <= horizon:
                z_hits.append(devs[o])
            else:
                truncated = True
            windows = [(lo, yo), (yo, hi)]
        else:
            windows = [(lo, hi)]

        Pe, Qe = devs[e], devs[(e + 1) % 3]
        for w1, w2 in windows:
            x1, x2 = _x_on(Pe, Qe, w1), _x_on(Pe, Qe, w2)
            if x1 >= horizon and x2 >= horizon:
                truncated = True
                continue
            mid = (w1 + w2) / 2
            exit_edge = None
            for cand in ((e + 1) % 3, (e + 2) % 3):
                ya, yb = devs[cand].y, devs[(cand + 1) % 3].y
                if ya > yb:
                    ya, yb = yb, ya
                if ya < mid < yb:
                    assert exit_edge is None
                    exit_edge = cand
            assert exit_edge is not None, "beam found no exit"
            (t2, j2), sg, tau = gluing_chart(surf, (t, exit_edge))
            off2 = off + G.apply(tau if s == 1 else -tau)
            queue.append((t2, j2, s * sg, off2, w1, w2))

    segments = _merge_pieces(pieces, z_hits)
    z_hits.sort(key=lambda z: (z.x.key(), z.y.key()))
    return FlowDomain(
        surface=tri.base,
        tri=tri,
        sigma=sigma,
        a=a,
        frame=G,
        frame_inv=Ginv,
        horizon=horizon,
        z_hits=z_hits,
        segments=segments,
        truncated=truncated,
        seed_slot=seed_slot,
        corner_lo=corner_lo,
        corner_hi=corner_hi,
    )


def _merge_pieces(
    pieces: Sequence[Tuple[SaddleConnection, Vec2, Vec2]],
    z_hits: Sequence[Vec2],
) -> List[BlockerSegment]:
    """Fuse per-triangle clipped pieces into maximal segments, then cut
    them open again at singularity hits and along deleted rays."""
    groups: Dict[Tuple, List[Tuple[Vec2, Vec2]]] = {}
    reps: Dict[Tuple, SaddleConnection] = {}
    for c, P, Q in pieces:
        dy = Q.y - P.y
        slope = (Q.x - P.x) / dy
        x0 = P.x - slope * P.y
        key = (c._key, slope.key(), x0.key())
        groups.setdefault(key, []).append((P, Q))
        reps[key] = c

    out: List[BlockerSegment] = []
    for key, segs in groups.items():
        c = reps[key]
        segs.sort(key=lambda pq: pq[0].y.key())
        runs: List[Tuple[Vec2, Vec2]] = []
        cur_p, cur_q = segs[0]
        for P, Q in segs[1:]:
            if P.y <= cur_q.y:
                if Q.y > cur_q.y:
                    cur_q = Q
            else:
                runs.append((cur_p, cur_q))
                cur_p, cur_q = P, Q
        runs.append((cur_p, cur_q))

        for P, Q in runs:
            # cut points: (height, both_sides_closed)
            cuts: List[Tuple[Scalar, bool]] = []
            open_p = open_q = False
            for z in z_hits:
                if z.y < P.y or z.y > Q.y:
                    continue
                x = _x_on(P, Q, z.y)
                if x < z.x:
                    continue
                on_ray = x > z.x
                if z.y == P.y:
                    if on_ray:
                        open_p = True
                elif z.y == Q.y:
                    if on_ray:
                        open_q = True
                else:
                    cuts.append((z.y, not on_ray))
            # collapse coincident cut heights; an open cut (deleted ray)
            # dominates a closed one
            by_h: Dict[Tuple, Tuple[Scalar, bool]] = {}
            for cy, closed in cuts:
                k = cy.key()
                if k in by_h:
                    by_h[k] = (cy, by_h[k][1] and closed)
                else:
                    by_h[k] = (cy, closed)
            cuts = sorted(by_h.values(), key=lambda cy: cy[0].key())
            prev = P
            prev_closed = not open_p
            for cy, closed in cuts:
                M = _lerp(P, Q, cy)
                if M.y > prev.y:
                    out.append(BlockerSegment(prev, M, prev_closed, closed, c))
                prev, prev_closed = M, closed
            if Q.y > prev.y:
                out.append(BlockerSegment(prev, Q, prev_closed, not open_q, c))
    out.sort(key=lambda J: (J.p.y.key(), J.p.x.key(), J.q.y.key(), J.q.x.key()))
    return out


# -- public construction ---------------------------------------------------------


def build_flow(
    tri: Triangulation,
    sigma: FrozenSet[SaddleConnection],
    a: SaddleConnection,
    side: str = "right",
    horizon: Optional[Scalar] = None,
) -> FlowDomain:
    """Develop the flow strip of `a` on the given side.

    `tri` must contain every connection of `sigma` (including `a`) as an
    edge.  "right"/"left" are relative to the canonical orientation of `a`.
    The frame is the orthogonal one: the flow direction is perpendicular
    to `a`."""
    assert a in sigma
    slots = _slots_of(tri, a)
    fwd = _forward_slot(tri, a, slots)
    rev = slots[0] if slots[1] == fwd else slots[1]
    seed = rev if side == "right" else fwd
    t, k = seed
    w = -tri.surf.triangles[t].edges[k]
    u = Vec2(w.y, -w.x)
    n = w.norm2()
    G = Mat2(u.x / n, u.y / n, w.x / n, w.y / n)
    return _build(tri, sigma, a, seed, G, horizon)


def _slots_of(tri: Triangulation, c: SaddleConnection) -> Tuple[Slot, Slot]:
    found = [slot for slot, cc in tri.conn.items() if cc == c]
    assert len(found) == 2, "connection is not an edge of the triangulation"
    s1 = min(found)
    s2 = found[0] if found[1] == s1 else found[1]
    return s1, s2


def _forward_slot(
    tri: Triangulation, c: SaddleConnection, slots: Tuple[Slot, Slot]
) -> Slot:
    """The slot whose edge traverses the connection from its canonical
    start to its canonical end."""
    for slot in slots:
        t, k = slot
        bc, w = tri.resolve(slot, tri.surf.triangles[t].edges[k])
        if bc == c.start and w.ray_key() == c.direction.ray_key():
            return slot
    raise AssertionError("neither slot matches the canonical orientation")


# -- visibility ------------------------------------------------------------------


def is_visible(f: FlowDomain, z: Vec2) -> bool:
    return not any(J.shadows(z) for J in f.segments)


def visible_singularities(f: FlowDomain) -> List[Vec2]:
    return [z for z in f.z_hits if is_visible(f, z)]


def visible_segments(f: FlowDomain) -> List[BlockerSegment]:
    """The blocking segments not themselves shadowed by another one.

    Shadow regions of two segments are nested or disjoint, so testing the
    midpoint of each segment against all others is decisive."""
    out = []
    for J in f.segments:
        m = Vec2((J.p.x + J.q.x) / 2, (J.p.y + J.q.y) / 2)
        if not any(Jp is not J and Jp.shadows(m) for Jp in f.segments):
            out.append(J)
    return out


def visible_intervals(
    f: FlowDomain,
) -> List[Tuple[Scalar, Scalar, bool, bool, SaddleConnection]]:
    """Height intervals shadowed by the visible segments."""
    zk = f._z_keys()
    out = []
    for J in visible_segments(f):
        lo_c = J.closed_p and (J.p.x.key(), J.p.y.key()) not in zk
        hi_c = J.closed_q and (J.q.x.key(), J.q.y.key()) not in zk
        out.append((J.p.y, J.q.y, lo_c, hi_c, J.conn))
    out.sort(key=lambda r: (r[0].key(), r[1].key()))
    return out


def find_awning(f: FlowDomain) -> Optional[SaddleConnection]:
    """The unique visible segment spanning the whole strip height, hanging
    from the top endpoint of `a` down to the bottom boundary, if present.

    When it exists, `a` cannot be flipped in any triangulation containing
    the simplex.  Requires `a` tallest in the simplex (caller-checked; we
    assert it).  Two independent characterizations are evaluated and must
    agree: the segment condition, and uniqueness of a visible singularity
    at height zero."""
    assert f.is_tallest(f.a), "flow base is not tallest in its simplex"
    vis = visible_segments(f)
    top = Vec2(0, 1)
    awning = None
    if len(vis) == 1:
        J = vis[0]
        if (J.q - top).is_zero() and J.p.y.is_zero():
            awning = J.conn
    zs = visible_singularities(f)
    unique_floor = len(zs) == 1 and zs[0].y.is_zero()
    assert (awning is not None) == unique_floor, (
        "awning characterizations disagree"
    )
    return awning


# -- triangle construction -------------------------------------------------------


@dataclass
class VisibleTriangle:
    """A triangle with `a` as a side, grown on the flow side of `a`."""

    a: SaddleConnection
    lower: SaddleConnection   # side from strip point (0,0) to the apex
    upper: SaddleConnection   # side from strip point (0,1) to the apex
    apex: Vec2                # strip coordinates of the corner opposite a
    z: Vec2                   # the visible hit that produced the triangle

    def sides(self) -> Tuple[SaddleConnection, ...]:
        return (self.a, self.lower, self.upper)

    def width(self) -> Scalar:
        return self.apex.x

    def check(self, f: FlowDomain) -> None:
        assert ZERO < self.apex.y < ONE or self.apex.y == self.z.y
        for s in (self.lower, self.upper):
            for c in f.sigma:
                assert not crosses(s, c), "triangle side crosses the simplex"


def _hull_path(
    points: List[Vec2], anchor: Vec2, target: Vec2, cw: bool
) -> List[Vec2]:
    """Walk along the convex hull boundary from anchor to target, clockwise
    or counterclockwise."""
    uniq: Dict[Tuple, Vec2] = {}
    for p in points:
        uniq[(p.x.key(), p.y.key())] = p
    pts = sorted(uniq.values(), key=lambda p: (p.x.key(), p.y.key()))
    if len(pts) <= 2:
        return [anchor, target] if not (anchor - target).is_zero() else [anchor]

    def chain(seq):
        h: List[Vec2] = []
        for p in seq:
            while len(h) >= 2 and orient(h[-2], h[-1], p) <= 0:
                h.pop()
            h.append(p)
        return h

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]  # counterclockwise
    keys = [(p.x.key(), p.y.key()) for p in hull]
    ia = keys.index((anchor.x.key(), anchor.y.key()))
    it = keys.index((target.x.key(), target.y.key()))
    step = -1 if cw else 1
    path = [hull[ia]]
    i = ia
    while i != it:
        i = (i + step) % len(hull)
        path.append(hull[i])
    return path


def _first_vertex(
    points: List[Vec2], anchor: Vec2, target: Vec2, cw: bool
) -> Vec2:
    """Second point of the hull walk, refined to the nearest collinear
    point of the set on its first segment."""
    path = _hull_path(points, anchor, target, cw)
    assert len(path) >= 2
    v1 = path[1]
    d = v1 - anchor
    best = v1
    best_t = d.norm2()
    for p in points:
        r = p - anchor
        if r.is_zero() or not d.cross(r).is_zero():
            continue
        tpar = d.dot(r)
        if tpar.sign() > 0 and tpar < best_t:
            best, best_t = p, tpar
    return best


def visible_triangle(f: FlowDomain, z: Vec2) -> VisibleTriangle:
    """Grow the triangle determined by a visible singularity hit.

    The corner opposite `a` is the first hull vertex along one of the two
    extremal paths from the endpoints of `a` to z; the narrower of the two
    candidate triangles is kept."""
    assert is_visible(f, z), "hit is shadowed"
    bot, top = Vec2(0, 0), Vec2(0, 1)
    up_pts = [p for p in f.z_hits if p.y >= z.y and p.x <= z.x] + [top]
    lo_pts = [p for p in f.z_hits if p.y <= z.y and p.x <= z.x] + [bot]
    z_up = _first_vertex(up_pts, top, z, cw=True)
    z_lo = _first_vertex(lo_pts, bot, z, cw=False)
    # keep the narrower of the two candidate triangles among those whose
    # corner height is admissible; on ties the upper path wins
    def admissible(p: Vec2) -> bool:
        return ZERO < p.y < ONE or p.y == z.y

    cands = [p for p in (z_up, z_lo) if admissible(p)]
    assert cands, "no admissible triangle corner"
    apex = z_lo if len(cands) == 2 and z_lo.x < z_up.x else cands[0]
    lower = f.ray_connection("lo", apex)
    upper = f.ray_connection("hi", apex - top)
    vt = VisibleTriangle(a=f.a, lower=lower, upper=upper, apex=apex, z=z)
    vt.check(f)
    return vt


# -- extension witnesses ---------------------------------------------------------


@dataclass
class ExtensionWitness:
    tri: Triangulation
    sigma: FrozenSet[SaddleConnection]
    a: SaddleConnection
    b: SaddleConnection
    c: SaddleConnection
    first: VisibleTriangle
    second: Optional[VisibleTriangle]
    case: str  # "annulus", "pentagon", "pentagon_floor", "pentagon_ceiling"


def _locate_triangle(
    tri: Triangulation,
    a: SaddleConnection,
    b: SaddleConnection,
    c: SaddleConnection,
) -> Tuple[Slot, SaddleConnection, SaddleConnection]:
    """Find a triangulation triangle bounded by exactly {a, b, c}, with `a`
    at the returned slot.  Returns the slot and the (b, c) labels in
    counterclockwise order after `a` (swapping the input labels if they
    were given in the opposite cyclic order)."""
    for t in range(len(tri.surf.triangles)):
        cs = [tri.conn[(t, k)] for k in range(3)]
        for k in range(3):
            if cs[k] == a:
                nb, nc = cs[(k + 1) % 3], cs[(k + 2) % 3]
                if {nb, nc} == {b, c}:
                    return (t, k), nb, nc
    raise ValueError("the given sides do not bound a triangle")


def _triangle_flow(
    tri: Triangulation,
    sigma: FrozenSet[SaddleConnection],
    slot_in: Slot,
    horizon: Optional[Scalar],
) -> FlowDomain:
    """Flow away from the triangle across the edge at slot_in, in the
    sheared frame that makes that edge span the strip and the next side of
    the triangle run along the flow direction."""
    surf = tri.surf
    t, k = slot_in
    a_vec = surf.triangles[t].edges[k]
    c_vec = -surf.triangles[t].edges[(k + 2) % 3]
    (t2, j2), flag = surf.gluings[(t, k)]
    sg = 1 if flag == "T" else -1
    a_seed = a_vec if sg == 1 else -a_vec
    c_seed = c_vec if sg == 1 else -c_vec
    G = Mat2.from_columns(-c_seed, a_seed).inverse()
    return _build(tri, sigma, tri.conn[slot_in], (t2, j2), G, horizon)


def _pick_visible(f: FlowDomain, above_floor: bool) -> Optional[Vec2]:
    vis = visible_singularities(f)
    if above_floor:
        vis = [z for z in vis if z.y.sign() > 0]
    if not vis:
        return None
    return min(vis, key=lambda z: (z.x.key(), z.y.key()))


def extend_triangle(
    base: Surface,
    a: SaddleConnection,
    b: SaddleConnection,
    c: SaddleConnection,
    horizon: Optional[Scalar] = None,
    retries: int = 3,
) -> ExtensionWitness:
    """Extend a triangle's boundary to a triangulation in which `a` is
    flippable, by gluing on one or two constructed triangles.

    The sides must bound a triangle; b and c are relabeled if needed so
    that, walking counterclockwise around it, they follow `a`."""
    sigma = frozenset((a, b, c))
    assert is_simplex(sigma)
    tri0 = realize(base, sigma)
    assert tri0 is not None, "triangle boundary could not be realized"
    slot_a, b, c = _locate_triangle(tri0, a, b, c)

    f1 = None
    for attempt in range(retries + 1):
        f1 = _triangle_flow(tri0, sigma, slot_a, horizon)
        z = _pick_visible(f1, above_floor=True)
        if z is not None:
            break
        if not f1.truncated:
            break
        horizon = f1.horizon * 2
    assert f1 is not None
    assert find_awning(f1) is None, "triangle side unexpectedly pinned"
    if z is None:
        raise RuntimeError("no visible singularity above the floor")
    t1 = visible_triangle(f1, z)

    if b in (t1.lower, t1.upper):
        sigma2 = sigma | {t1.lower, t1.upper}
        tri2 = realize(base, sigma2)
        assert tri2 is not None
        witness = ExtensionWitness(tri2, sigma2, a, b, c, t1, None, "annulus")
    else:
        sigma1 = sigma | {t1.lower, t1.upper}
        assert is_simplex(sigma1)
        tri1 = realize(base, sigma1)
        assert tri1 is not None
        slot_b, _, _ = _locate_triangle(tri1, b, c, a)
        f2 = None
        z2 = None
        h2 = horizon
        for attempt in range(retries + 1):
            f2 = _sheared_side_flow(tri1, sigma1, slot_b, f1, h2)
            assert f2.is_tallest(f2.a), "triangle side lost tallest status"
            z2 = _pick_visible(f2, above_floor=False)
            if z2 is not None:
                break
            if not f2.truncated:
                break
            h2 = f2.horizon * 2
        if z2 is None:
            raise RuntimeError("no visible singularity across the second side")
        t2 = visible_triangle(f2, z2)
        sigma2 = sigma1 | {t2.lower, t2.upper}
        tri2 = realize(base, sigma2)
        assert tri2 is not None
        if ZERO < t2.apex.y < ONE:
            case = "pentagon"
        elif t2.apex.y.is_zero():
            case = "pentagon_floor"
        else:
            case = "pentagon_ceiling"
        witness = ExtensionWitness(tri2, sigma2, a, b, c, t1, t2, case)

    slot = witness.tri.slot_of(a)
    assert slot is not None and witness.tri.is_flippable(slot), (
        "extension failed to make the side flippable"
    )
    return witness


def _sheared_side_flow(
    tri: Triangulation,
    sigma: FrozenSet[SaddleConnection],
    slot_b: Slot,
    f_prev: FlowDomain,
    horizon: Optional[Scalar],
) -> FlowDomain:
    """Flow across the edge at slot_b, keeping the previous flow direction.

    The frame shears so that the edge spans the strip while heights stay
    proportional to those of the previous flow; the flow direction itself
    is transported up to the global sign ambiguity and fixed by requiring
    the strip to open away from the triangle."""
    surf = tri.surf
    t, k = slot_b
    b_vec = surf.triangles[t].edges[k]
    # previous flow direction, as a base-surface ray (any representative
    # of the global direction class; local frames agree up to sign)
    v_prev = f_prev.frame_inv.apply(Vec2(1, 0))
    _, v_base = f_prev.tri.resolve(
        (f_prev.seed_slot[0], f_prev.seed_slot[1]), v_prev
    )
    (t2, j2), flag = surf.gluings[(t, k)]
    sg = 1 if flag == "T" else -1
    b_seed = b_vec if sg == 1 else -b_vec
    for s in (1, -1):
        h_seed = v_base.scale(s)
        M = Mat2.from_columns(h_seed, b_seed)
        if M.det().is_zero():
            raise AssertionError("flow direction parallel to the side")
        G = M.inverse()
        apex = surf.triangles[t2].vertex((j2 + 2) % 3)
        dev = G.apply(apex) - G.apply(surf.triangles[t2].vertex((j2 + 1) % 3))
        if dev.x.sign() > 0:
            return _build(tri, sigma, tri.conn[slot_b], (t2, j2), G, horizon)
    raise AssertionError("could not orient the second flow")


def extend_major(
    base: Surface,
    a: SaddleConnection,
    b: SaddleConnection,
    c: SaddleConnection,
    horizon: Optional[Scalar] = None,
    search_radius: int = 3,
) -> ExtensionWitness:
    """Extension for a triangle forming at least half of a strictly convex
    quadrilateral across `c`: the result has both `a` and `c` flippable.

    If the flow away from `a` is pinned by an awning, the awning is folded
    back onto the triangle to produce an annulus in which both diagonals
    are transverse arcs."""
    sigma = frozenset((a, b, c))
    assert is_simplex(sigma)
    tri0 = realize(base, sigma)
    assert tri0 is not None

    found = None
    for cand in flip_ball(tri0, search_radius, frozen=sigma):
        try:
            slot_a, b2, c2 = _locate_triangle(cand, a, b, c)
        except ValueError:
            continue
        t, k = slot_a
        if _is_major_config(cand, (t, (k + 2) % 3)):
            found = (cand, slot_a, b2, c2)
            break
    if found is None:
        raise ValueError("no strictly convex base quadrilateral found")
    tri0, slot_a, b, c = found
    t, k = slot_a
    slot_c = (t, (k + 2) % 3)
    (tc2, jc2), _ = tri0.surf.gluings[slot_c]
    quad_sides = frozenset(
        tri0.conn[(tc2, (jc2 + i) % 3)] for i in (1, 2)
    )
    sigma_q = sigma | quad_sides
    f = _triangle_flow(tri0, sigma_q, slot_a, horizon)
    aw = find_awning(f)
    if aw is None:
        z = _pick_visible(f, above_floor=True)
        for attempt in range(3):
            if z is not None or not f.truncated:
                break
            f = _triangle_flow(tri0, sigma_q, slot_a, f.horizon * 2)
            z = _pick_visible(f, above_floor=True)
        if z is None:
            raise RuntimeError("no visible singularity above the floor")
        t1 = visible_triangle(f, z)
        sigma2 = sigma_q | {t1.lower, t1.upper}
        tri2 = realize(base, sigma2)
        assert tri2 is not None
        witness = ExtensionWitness(tri2, sigma2, a, b, c, t1, None, "pentagon")
    else:
        # the blocking side folds back: the deck translation glues a copy
        # of the far triangle onto the strip, and its diagonal closes an
        # annulus around a and c
        d = f.ray_connection("lo", Vec2(1, 1))
        sigma2 = frozenset((a, b, c, d))
        assert is_simplex(sigma2)
        tri2 = realize(base, sigma2)
        assert tri2 is not None
        t1 = VisibleTriangle(a=a, lower=d, upper=c, apex=Vec2(1, 1), z=Vec2(1, 1))
        witness = ExtensionWitness(tri2, sigma2, a, b, c, t1, None, "annulus")

    for side in (a, c):
        slot = witness.tri.slot_of(side)
        assert slot is not None and witness.tri.is_flippable(slot), (
            "major extension failed to free a diagonal"
        )
    return witness


def _is_major_config(tri: Triangulation, slot_c: Slot) -> bool:
    """Is the quadrilateral across this slot strictly convex, with the
    triangle at the slot covering at least half of it?"""
    surf = tri.surf
    t, k = slot_c
    (t2, j2), flag = surf.gluings[slot_c]
    A = surf.vertex_position(slot_c)
    B = surf.triangles[t].vertex((k + 1) % 3)
    C = surf.triangles[t].vertex((k + 2) % 3)
    sg = 1 if flag == "T" else -1
    Bn = surf.triangles[t2].vertex((j2 + 1) % 3)
    Dn = surf.triangles[t2].vertex((j2 + 2) % 3)
    tau = A - Bn if sg == 1 else A + Bn
    D = (Dn if sg == 1 else -Dn) + tau
    quad = [A, D, B, C]
    for i in range(4):
        if orient(quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]) <= 0:
            return False
    area_t = surf.triangles[t].area2()
    area_t2 = surf.triangles[t2].area2()
    return area_t >= area_t2
