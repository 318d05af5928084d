"""Finite-window sequence data and the elementary norms on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError


def parse_exponent(p) -> float:
    """Accept 1 <= p <= inf given as a number or as the string 'inf'."""
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return math.inf
        try:
            p = float(s)
        except ValueError:
            raise DomainError(f"bad exponent {p!r}") from None
    p = float(p)
    if not p >= 1:
        raise DomainError(f"exponent must lie in [1, inf], got {p}")
    return p


def exponent_str(p: float):
    """JSON-friendly form of an exponent: finite values stay numbers."""
    return "inf" if math.isinf(p) else p


def lp_norm(x, p: float, axis: int = -1):
    """l^p norm along ``axis``; scaled by the max so large weights do not overflow."""
    ax = np.abs(np.asarray(x, dtype=float))
    if ax.shape[axis] == 0:
        return np.zeros(np.delete(ax.shape, axis)) if ax.ndim > 1 else 0.0
    m = np.max(ax, axis=axis, keepdims=True)
    if math.isinf(p):
        out = np.squeeze(m, axis=axis)
    else:
        safe = np.where(m > 0, m, 1.0)
        out = np.squeeze(safe * np.sum((ax / safe) ** p, axis=axis, keepdims=True) ** (1.0 / p), axis=axis)
        out = np.where(np.squeeze(m, axis=axis) > 0, out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SeqVector:
    """A sequence supported on the index window ``start .. start+len-1``."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise DomainError("SeqVector values must be a finite 1-d array")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dict(cls, entries: Mapping[int, float]) -> SeqVector:
        if not entries:
            return cls(0, np.zeros(0))
        lo, hi = min(entries), max(entries)
        v = np.zeros(hi - lo + 1)
        for i, x in entries.items():
            v[i - lo] = x
        return cls(lo, v)

    @classmethod
    def unit(cls, j: int, value: float = 1.0) -> SeqVector:
        return cls(j, np.array([float(value)]))

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    @property
    def support(self) -> list[int]:
        return [self.start + int(j) for j in np.nonzero(self.values)[0]]

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def gather(self, indices) -> np.ndarray:
        """Values at ``indices`` (zero outside the stored window)."""
        idx = np.asarray(indices, dtype=int) - self.start
        out = np.zeros(idx.shape)
        ok = (idx >= 0) & (idx < len(self.values))
        out[ok] = self.values[idx[ok]]
        return out

    def scale(self, c: float) -> SeqVector:
        return SeqVector(self.start, c * self.values)

    def to_dict(self) -> dict[int, float]:
        return {i: float(self.values[i - self.start]) for i in self.support}


@dataclass(frozen=True)
class WeightedSeqCouple:
    """The couple (l^q(v), l^q(w)) on the index window ``start .. start+n-1``."""

    q: float
    v: np.ndarray
    w: np.ndarray
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "q", parse_exponent(self.q))
        v = np.asarray(self.v, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise DomainError("weights v and w must share one index window")
        if np.any(~(v > 0)) or np.any(~(w > 0)) or not np.all(np.isfinite(v * w)):
            raise DomainError("weights must be positive and finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def stop(self) -> int:
        return self.start + len(self.v)

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    def contains(self, a: SeqVector) -> bool:
        sup = a.support
        return not sup or (sup[0] >= self.start and sup[-1] < self.stop)

    def aligned(self, a: SeqVector) -> np.ndarray:
        if not self.contains(a):
            raise DomainError(f"vector support {a.support} leaves the couple window "
                              f"[{self.start}, {self.stop - 1}]")
        return a.gather(self.indices)


@dataclass(frozen=True)
class StepFunction:
    """Non-negative step function on (0, inf), zero beyond the last breakpoint.

    ``breaks`` are ``0 = s_0 < s_1 < ... < s_n``; ``levels[j]`` is the value on
    ``[s_j, s_{j+1})``.
    """

    breaks: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if b.ndim != 1 or len(b) != len(lv) + 1 or len(lv) == 0:
            raise DomainError("need n+1 breakpoints for n levels")
        if b[0] != 0 or np.any(np.diff(b) <= 0) or not np.all(np.isfinite(b)):
            raise DomainError("breakpoints must start at 0 and increase strictly")
        if np.any(lv < 0) or not np.all(np.isfinite(lv)):
            raise DomainError("levels must be finite and non-negative")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_pieces(cls, pieces) -> StepFunction:
        """Build from consecutive ``(length, level)`` pieces starting at 0."""
        lengths = [float(n) for n, _ in pieces]
        return cls(np.concatenate([[0.0], np.cumsum(lengths)]), [float(v) for _, v in pieces])

    def scale(self, c: float) -> StepFunction:
        return StepFunction(self.breaks, abs(c) * self.levels)
