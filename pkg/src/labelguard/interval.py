"""Closed real intervals and the arithmetic used for naive bound propagation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    """A closed interval ``[lo, hi]`` of doubles. Degenerate intervals are allowed."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if lo != lo or hi != hi:
            raise ValueError(f"interval bound is NaN: [{self.lo}, {self.hi}]")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo} > hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(value, value)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def issubset(self, other: "Interval", tol: float = 0.0) -> bool:
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def __add__(self, other: "Interval") -> "Interval":
        return add(self, other)

    def __sub__(self, other: "Interval") -> "Interval":
        return sub(self, other)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __rmul__(self, c: float) -> "Interval":
        return scale(c, self)

    def __iter__(self):
        yield self.lo
        yield self.hi


def add(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo + y.lo, x.hi + y.hi)


def sub(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo - y.hi, x.hi - y.lo)


def scale(c: float, x: Interval) -> Interval:
    if c >= 0:
        return Interval(c * x.lo, c * x.hi)
    return Interval(c * x.hi, c * x.lo)


def relu(x: Interval) -> Interval:
    return Interval(max(0.0, x.lo), max(0.0, x.hi))


def hull(x: Interval, y: Interval) -> Interval:
    return Interval(min(x.lo, y.lo), max(x.hi, y.hi))


def intersect(x: Interval, y: Interval) -> Interval:
    """Intersection of two overlapping intervals; raises if they are disjoint."""
    return Interval(max(x.lo, y.lo), min(x.hi, y.hi))
