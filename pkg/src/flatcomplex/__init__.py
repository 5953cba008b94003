"""Exact-arithmetic toolkit for flat surfaces and their saddle connection complexes."""

from .numeric import Scalar, Vec2, Mat2, orient, segment_relation, apply

__all__ = [
    "Scalar",
    "Vec2",
    "Mat2",
    "orient",
    "segment_relation",
    "apply",
]
