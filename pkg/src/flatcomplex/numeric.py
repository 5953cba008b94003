"""Exact arithmetic over Q(sqrt(d)) and the geometric predicates built on it.

Every coordinate in this package is a Scalar: (a + b*sqrt(d)) / den with
integer a, b, positive integer den and a fixed square-free d >= 0 shared by
all values on a surface.  d = 0 is the pure rational mode (b forced to 0).
No floating point is used in any predicate; float() is for logging only.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

_IntLike = Union[int, "Scalar", Fraction]


def _isqrt_floor(n: int) -> int:
    return math.isqrt(n)


def square_free(d: int) -> bool:
    if d < 0:
        return False
    if d in (0, 1):
        return d == 0  # d = 1 is not a valid field tag; use d = 0
    k = 2
    while k * k <= d:
        if d % (k * k) == 0:
            return False
        k += 1
    return True


class Scalar:
    """Immutable element (a + b*sqrt(d)) / den of Q(sqrt(d)).

    Canonical form: den > 0, gcd(a, b, den) = 1, and b = 0 when d = 0.
    Values with different d mix only when one side is rational (b = 0).
    """

    __slots__ = ("a", "b", "den", "d")

    def __init__(self, a: int, b: int = 0, den: int = 1, d: int = 0):
        if den == 0:
            raise ZeroDivisionError("Scalar with zero denominator")
        if d == 0 and b != 0:
            raise ValueError("irrational part requires d > 0")
        if den < 0:
            a, b, den = -a, -b, -den
        g = math.gcd(math.gcd(abs(a), abs(b)), den)
        if g > 1:
            a //= g
            b //= g
            den //= g
        if b == 0:
            d = 0
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "d", d)

    def __setattr__(self, *unused):
        raise AttributeError("Scalar is immutable")

    # -- construction helpers --------------------------------------------

    @staticmethod
    def of(v: _IntLike, d: int = 0) -> "Scalar":
        if isinstance(v, Scalar):
            return v
        if isinstance(v, Fraction):
            return Scalar(v.numerator, 0, v.denominator)
        return Scalar(int(v))

    @staticmethod
    def sqrt_of_field(d: int) -> "Scalar":
        """sqrt(d) itself as an element of Q(sqrt(d))."""
        if d == 0:
            return Scalar(0)
        return Scalar(0, 1, 1, d)

    # -- field plumbing ---------------------------------------------------

    def _coerce(self, other: _IntLike) -> "Scalar":
        o = Scalar.of(other)
        if self.d != o.d and self.d != 0 and o.d != 0:
            raise ValueError(f"mixing fields d={self.d} and d={o.d}")
        return o

    def _field(self, other: "Scalar") -> int:
        return self.d or other.d

    def __add__(self, other: _IntLike) -> "Scalar":
        o = self._coerce(other)
        return Scalar(
            self.a * o.den + o.a * self.den,
            self.b * o.den + o.b * self.den,
            self.den * o.den,
            self._field(o),
        )

    __radd__ = __add__

    def __neg__(self) -> "Scalar":
        return Scalar(-self.a, -self.b, self.den, self.d)

    def __sub__(self, other: _IntLike) -> "Scalar":
        return self + (-self._coerce(other))

    def __rsub__(self, other: _IntLike) -> "Scalar":
        return self._coerce(other) - self

    def __mul__(self, other: _IntLike) -> "Scalar":
        o = self._coerce(other)
        d = self._field(o)
        return Scalar(
            self.a * o.a + self.b * o.b * d,
            self.a * o.b + self.b * o.a,
            self.den * o.den,
            d,
        )

    __rmul__ = __mul__

    def conj(self) -> "Scalar":
        return Scalar(self.a, -self.b, self.den, self.d)

    def inverse(self) -> "Scalar":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero Scalar")
        # 1/x = conj(x) / (x * conj(x));  x * conj(x) = (a^2 - b^2 d)/den^2
        norm_num = self.a * self.a - self.b * self.b * self.d
        return Scalar(self.a * self.den, -self.b * self.den, norm_num, self.d)

    def __truediv__(self, other: _IntLike) -> "Scalar":
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other: _IntLike) -> "Scalar":
        return self._coerce(other) * self.inverse()

    # -- exact sign and order ---------------------------------------------

    def sign(self) -> int:
        """Exact sign in {-1, 0, +1} (den > 0, so sign of a + b*sqrt(d))."""
        a, b, d = self.a, self.b, self.d
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare |a| with |b| sqrt(d) via squares
        lhs = a * a
        rhs = b * b * d
        if a > 0:  # b < 0
            return (lhs > rhs) - (lhs < rhs)
        return (rhs > lhs) - (rhs < lhs)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, (Scalar, int, Fraction)):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        if self.b == 0:
            return hash(Fraction(self.a, self.den))
        return hash((self.a, self.b, self.den, self.d))

    def __lt__(self, other: _IntLike) -> bool:
        return (self - other).sign() < 0

    def __le__(self, other: _IntLike) -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other: _IntLike) -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other: _IntLike) -> bool:
        return (self - other).sign() >= 0

    # -- misc ---------------------------------------------------------------

    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError("not rational")
        return Fraction(self.a, self.den)

    def __float__(self) -> float:  # logging/sorting hints only, never predicates
        return (self.a + self.b * math.sqrt(self.d)) / self.den

    def __repr__(self) -> str:
        if self.b == 0:
            return f"{self.a}/{self.den}" if self.den != 1 else f"{self.a}"
        s = f"({self.a}{self.b:+d}*sqrt({self.d}))"
        return s if self.den == 1 else f"{s}/{self.den}"

    def key(self):
        """Total-order sort key: exact, deterministic."""
        return _ScalarKey(self)


class _ScalarKey:
    __slots__ = ("v",)

    def __init__(self, v: Scalar):
        self.v = v

    def __lt__(self, other: "_ScalarKey") -> bool:
        return self.v < other.v

    def __eq__(self, other) -> bool:
        return self.v == other.v

    def __hash__(self) -> int:
        return hash(self.v)


ZERO = Scalar(0)
ONE = Scalar(1)


class Vec2:
    """Exact 2-vector over the surface's field."""

    __slots__ = ("x", "y")

    def __init__(self, x: _IntLike, y: _IntLike):
        object.__setattr__(self, "x", Scalar.of(x))
        object.__setattr__(self, "y", Scalar.of(y))

    def __setattr__(self, *unused):
        raise AttributeError("Vec2 is immutable")

    def __add__(self, o: "Vec2") -> "Vec2":
        return Vec2(self.x + o.x, self.y + o.y)

    def __sub__(self, o: "Vec2") -> "Vec2":
        return Vec2(self.x - o.x, self.y - o.y)

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def scale(self, t: _IntLike) -> "Vec2":
        return Vec2(self.x * t, self.y * t)

    def cross(self, o: "Vec2") -> Scalar:
        return self.x * o.y - self.y * o.x

    def dot(self, o: "Vec2") -> Scalar:
        return self.x * o.x + self.y * o.y

    def norm2(self) -> Scalar:
        return self.dot(self)

    def is_zero(self) -> bool:
        return self.x.is_zero() and self.y.is_zero()

    def is_parallel(self, o: "Vec2") -> bool:
        return self.cross(o).is_zero()

    def perp(self) -> "Vec2":
        """Rotation by +90 degrees."""
        return Vec2(-self.y, self.x)

    def sign_normalized(self) -> "Vec2":
        """Flip sign so y > 0, or y = 0 and x > 0.  Zero vector rejected."""
        if self.is_zero():
            raise ValueError("zero vector has no direction")
        sy = self.y.sign()
        if sy < 0 or (sy == 0 and self.x.sign() < 0):
            return -self
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vec2):
            return NotImplemented
        return self.x == other.x and self.y == other.y

    def __hash__(self):
        return hash((self.x, self.y))

    def __repr__(self) -> str:
        return f"({self.x}, {self.y})"

    def key(self):
        return (self.x.key(), self.y.key())

    def ray_key(self):
        """Sort key of the ray through this vector: invariant under
        scaling by any positive factor.  Zero vector rejected."""
        sx = self.x.sign()
        if sx != 0:
            m = self.x if sx > 0 else -self.x
        else:
            sy = self.y.sign()
            if sy == 0:
                raise ValueError("zero vector has no direction")
            m = self.y if sy > 0 else -self.y
        return ((self.x / m).key(), (self.y / m).key())


VEC_ZERO = Vec2(0, 0)


class Mat2:
    """Exact 2x2 matrix [[a, b], [c, d]]."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a: _IntLike, b: _IntLike, c: _IntLike, d: _IntLike):
        object.__setattr__(self, "a", Scalar.of(a))
        object.__setattr__(self, "b", Scalar.of(b))
        object.__setattr__(self, "c", Scalar.of(c))
        object.__setattr__(self, "d", Scalar.of(d))

    def __setattr__(self, *unused):
        raise AttributeError("Mat2 is immutable")

    @staticmethod
    def identity() -> "Mat2":
        return Mat2(1, 0, 0, 1)

    @staticmethod
    def from_columns(u: Vec2, v: Vec2) -> "Mat2":
        return Mat2(u.x, v.x, u.y, v.y)

    def det(self) -> Scalar:
        return self.a * self.d - self.b * self.c

    def apply(self, v: Vec2) -> Vec2:
        return Vec2(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)

    def mul(self, o: "Mat2") -> "Mat2":
        return Mat2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def inverse(self) -> "Mat2":
        dt = self.det()
        if dt.is_zero():
            raise ZeroDivisionError("singular matrix")
        inv = dt.inverse()
        return Mat2(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv)

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mat2):
            return NotImplemented
        return (
            self.a == other.a
            and self.b == other.b
            and self.c == other.c
            and self.d == other.d
        )

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    def __repr__(self) -> str:
        return f"[[{self.a}, {self.b}], [{self.c}, {self.d}]]"


def apply(M: Mat2, v: Vec2) -> Vec2:
    return M.apply(v)


def orient(p: Vec2, q: Vec2, r: Vec2) -> int:
    """Sign of the cross product (q - p) x (r - p): +1 ccw, -1 cw, 0 collinear."""
    return (q - p).cross(r - p).sign()


def _on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool:
    """Is p on the closed segment [a, b]?  Assumes p, a, b collinear."""
    return (a - p).dot(b - p).sign() <= 0


DISJOINT = "disjoint"
SHARED_ENDPOINT = "shared_endpoint"
TRANSVERSE = "transverse"
COLLINEAR_OVERLAP = "collinear_overlap"


def segment_relation(s1, s2) -> str:
    """Exact classification of a pair of nondegenerate closed segments.

    Returns one of disjoint / shared_endpoint / transverse / collinear_overlap.
    A single intersection point that is an endpoint of both segments is
    shared_endpoint; any other single intersection point is transverse.
    """
    p1, q1 = s1
    p2, q2 = s2
    if (q1 - p1).is_zero() or (q2 - p2).is_zero():
        raise ValueError("degenerate segment")

    o1 = orient(p1, q1, p2)
    o2 = orient(p1, q1, q2)
    o3 = orient(p2, q2, p1)
    o4 = orient(p2, q2, q1)

    if o1 == 0 and o2 == 0:
        # all four points collinear
        pts_on = [
            p for p in (p2, q2) if _on_segment(p, p1, q1)
        ] + [p for p in (p1, q1) if _on_segment(p, p2, q2)]
        if not pts_on:
            return DISJOINT
        distinct = []
        for p in pts_on:
            if all(not (p - q).is_zero() for q in distinct):
                distinct.append(p)
        if len(distinct) > 1:
            return COLLINEAR_OVERLAP
        x = distinct[0]
        endpoint_of_1 = (x - p1).is_zero() or (x - q1).is_zero()
        endpoint_of_2 = (x - p2).is_zero() or (x - q2).is_zero()
        return SHARED_ENDPOINT if (endpoint_of_1 and endpoint_of_2) else TRANSVERSE

    if o1 * o2 > 0 or o3 * o4 > 0:
        return DISJOINT
    if o1 * o2 < 0 and o3 * o4 < 0:
        return TRANSVERSE

    # touching configurations: some orientation is zero with the point on
    # the other closed segment
    touch = None
    for p, a, b, oz in ((p2, p1, q1, o1), (q2, p1, q1, o2), (p1, p2, q2, o3), (q1, p2, q2, o4)):
        if oz == 0 and _on_segment(p, a, b):
            touch = p
            break
    if touch is None:
        return DISJOINT
    endpoint_of_1 = (touch - p1).is_zero() or (touch - q1).is_zero()
    endpoint_of_2 = (touch - p2).is_zero() or (touch - q2).is_zero()
    return SHARED_ENDPOINT if (endpoint_of_1 and endpoint_of_2) else TRANSVERSE


def segment_intersection_point(s1, s2):
    """Intersection point of two non-parallel segment-supporting lines,
    returned if it lies on both closed segments, else None."""
    p1, q1 = s1
    p2, q2 = s2
    d1 = q1 - p1
    d2 = q2 - p2
    denom = d1.cross(d2)
    if denom.is_zero():
        return None
    t = (p2 - p1).cross(d2) / denom
    u = (p2 - p1).cross(d1) / denom
    if t < 0 or t > 1 or u < 0 or u > 1:
        return None
    return p1 + d1.scale(t)
