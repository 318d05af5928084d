"""Discretizing sequences and the block partitions built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConstructionError, DomainError
from .qcfn import QuasiConcaveFn, VerificationReport

BISECT_TOL = 1e-12
TIGHT_TOL = 1e-9
WINDOW_SLACK = 1e-9
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class DiscretizingSequence:
    """Points ``t_k`` for ``k = k_min .. k_max`` with their zone labels.

    ``zones[j]`` labels the step from ``t_{k_min+j}`` to ``t_{k_min+j+1}``:
    1 when phi grows by exactly rho over the step, 2 when t/phi does, and
    None when neither holds (only possible for hand-supplied points).
    """

    k_min: int
    log_points: np.ndarray
    zones: tuple
    rho: float
    source: QuasiConcaveFn | None = field(default=None, compare=False)

    @property
    def points(self) -> np.ndarray:
        return np.exp(self.log_points)

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.log_points) - 1

    @property
    def indices(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def __len__(self) -> int:
        return len(self.log_points)

    def t(self, k: int) -> float:
        if not self.k_min <= k <= self.k_max:
            raise DomainError(f"index {k} outside [{self.k_min}, {self.k_max}]")
        return math.exp(self.log_points[k - self.k_min])

    def zone(self, k: int):
        return self.zones[k - self.k_min]

    def csv_rows(self) -> list[tuple]:
        """Rows ``(k, t_k, phi(t_k), zone)``; the last point has an empty zone."""
        lphi = self.source.log_eval(self.log_points) if self.source is not None else None
        rows = []
        for j, k in enumerate(self.indices):
            z = self.zones[j] if j < len(self.zones) else None
            phi = math.exp(lphi[j]) if lphi is not None else ""
            rows.append((k, math.exp(self.log_points[j]), phi, f"Z{z}" if z else ""))
        return rows


def _first_crossing(h: Callable[[float], float], target: float, x: float,
                    step: float, x_limit: float, tol: float) -> float | None:
    """Smallest ``y > x`` with ``h(y) >= target`` for non-decreasing ``h``.

    Returns None when the crossing lies beyond ``x_limit``.
    """
    lo, hi = x, x + step
    while h(hi) < target:
        if hi > x_limit:
            return None
        lo, hi = hi, x + 2.0 * (hi - x)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _zone(f: QuasiConcaveFn, x0: float, x1: float, lrho: float, tight_tol: float):
    d_phi = f.log_eval(x1) - f.log_eval(x0)
    d_ratio = (x1 - x0) - d_phi
    if d_phi - lrho <= tight_tol:
        return 1
    if d_ratio - lrho <= tight_tol:
        return 2
    return None


def build(f: QuasiConcaveFn, window, rho: float = 2.0, *, tol: float = BISECT_TOL,
          tight_tol: float = TIGHT_TOL) -> DiscretizingSequence:
    """Greedy discretizing sequence anchored at ``t_0 = 1``.

    Each next point is the first ``t`` at which both phi and t/phi have
    grown by the factor ``rho``; it is located by bisection in ``log t``.
    Construction walks outward in both directions until the window is
    exhausted.
    """
    t_min, t_max = map(float, window)
    if not 0 < t_min < 1 < t_max:
        raise DomainError(f"window must satisfy 0 < t_min < 1 < t_max, got {window!r}")
    if not rho > 1:
        raise DomainError(f"rho must exceed 1, got {rho}")
    lrho = math.log(rho)
    x_lo, x_hi = math.log(t_min) - WINDOW_SLACK, math.log(t_max) + WINDOW_SLACK

    def lphi(x):
        return float(f.log_eval(x))

    def lratio(x):
        return x - float(f.log_eval(x))

    forward = [0.0]
    while True:
        x = forward[-1]
        ends = []
        for h in (lphi, lratio):
            y = _first_crossing(h, h(x) + lrho, x, lrho, x_hi, tol)
            if y is None:
                break
            ends.append(y)
        if len(ends) < 2 or max(ends) > x_hi:
            break
        forward.append(max(ends))

    backward = []
    x = 0.0
    while True:
        ends = []
        for h in (lphi, lratio):
            # mirror so the same search finds sup{y < x : h(y) <= h(x) - lrho}
            y = _first_crossing(lambda u, h=h: -h(-u), -(h(x) - lrho), -x, lrho, -x_lo, tol)
            if y is None:
                break
            ends.append(-y)
        if len(ends) < 2 or min(ends) < x_lo:
            break
        x = min(ends)
        backward.append(x)

    log_points = np.array(backward[::-1] + forward)
    zones = []
    for j in range(len(log_points) - 1):
        z = _zone(f, log_points[j], log_points[j + 1], lrho, tight_tol)
        if z is None:
            raise ConstructionError(
                f"neither constraint is tight at step k={j - len(backward)}; "
                "is the tabulated function continuous?")
        zones.append(z)
    return DiscretizingSequence(-len(backward), log_points, tuple(zones), float(rho), f)


def from_points(f: QuasiConcaveFn, points: Iterable[float], rho: float = 2.0, k_min: int = 0,
                tight_tol: float = TIGHT_TOL) -> DiscretizingSequence:
    """Wrap hand-supplied points, labelling each step with the first zone it fits."""
    lp = np.log(np.asarray(list(points), dtype=float))
    if lp.size == 0:
        raise DomainError("empty point list")
    if np.any(np.diff(lp) <= 0):
        raise DomainError("points must be strictly increasing")
    lrho = math.log(rho)
    zones = tuple(_zone(f, lp[j], lp[j + 1], lrho, tight_tol) for j in range(lp.size - 1))
    return DiscretizingSequence(k_min, lp, zones, float(rho), f)


def verify(f: QuasiConcaveFn, seq: DiscretizingSequence, tol: float = TIGHT_TOL) -> VerificationReport:
    """Check strong monotonicity, the zone inequalities and the zone cover."""
    if len(seq) == 0:
        raise DomainError("empty sequence")
    lrho = math.log(seq.rho)
    x = seq.log_points
    lphi = np.asarray(f.log_eval(x), dtype=float)
    d_phi = np.diff(lphi)
    d_ratio = np.diff(x) - d_phi
    rep = VerificationReport("discretizing")
    if len(seq.zones) != len(x) - 1:
        rep.violations.append({"kind": "zone_cover", "zones": len(seq.zones), "steps": len(x) - 1})
    slack = 0.0
    for j in range(len(x) - 1):
        k = seq.k_min + j
        if d_phi[j] < lrho - tol:
            rep.violations.append({"kind": "phi_not_strongly_increasing", "k": k,
                                   "ratio": math.exp(d_phi[j])})
        if d_ratio[j] < lrho - tol:
            rep.violations.append({"kind": "ratio_not_strongly_decreasing", "k": k,
                                   "ratio": math.exp(d_ratio[j])})
        z = seq.zones[j] if j < len(seq.zones) else None
        if z == 1:
            excess = d_phi[j] - lrho
        elif z == 2:
            excess = d_ratio[j] - lrho
        else:
            rep.violations.append({"kind": "no_zone", "k": k, "phi_ratio": math.exp(d_phi[j]),
                                   "t_over_phi_ratio": math.exp(d_ratio[j])})
            continue
        if excess > tol:
            rep.violations.append({"kind": f"zone{z}_bound", "k": k, "log_excess": float(excess)})
        slack = max(slack, abs(float(excess)))
    rep.values = {"k_min": seq.k_min, "k_max": seq.k_max, "rho": seq.rho,
                  "max_tightness_slack": slack}
    return rep


def build_covering(f: QuasiConcaveFn, lo: float, hi: float, rho: float = 2.0,
                   pad: int = 1) -> DiscretizingSequence:
    """Build on a window wide enough to leave ``pad`` points below ``lo`` and above ``hi``."""
    margin = 1.0
    while True:
        t_min = min(lo * math.exp(-margin), 0.5)
        t_max = max(hi * math.exp(margin), 2.0)
        seq = build(f, (t_min, t_max), rho)
        pts = seq.points
        below = int(np.sum(pts < lo))
        above = int(np.sum(pts > hi))
        if below >= pad and above >= pad:
            return seq
        if margin > 1e4:
            raise ConstructionError(f"could not cover [{lo}, {hi}] with {pad} points of padding")
        margin *= 2.0


@dataclass(frozen=True)
class BlockPartition:
    """Blocks ``M_k = {i : t_{k-1} < r_i <= t_k}`` of inner indices.

    ``members`` maps block label to a sorted tuple of inner indices;
    ``unassigned`` lists inner indices whose ratio fell outside the outer
    window.
    """

    members: Mapping[int, tuple]
    unassigned: tuple = ()
    outer: DiscretizingSequence | None = field(default=None, compare=False)

    def block_of(self) -> dict[int, int]:
        return {i: k for k, idx in self.members.items() for i in idx}

    def sizes(self) -> dict[int, int]:
        return {k: len(v) for k, v in self.members.items()}

    @classmethod
    def from_blocks(cls, blocks: Mapping[int, Iterable[int]] | Iterable[Iterable[int]]):
        """Hand-built partition; a plain list of blocks is labelled 0, 1, ..."""
        if not isinstance(blocks, Mapping):
            blocks = dict(enumerate(blocks))
        members = {int(k): tuple(sorted(int(i) for i in v)) for k, v in blocks.items()}
        seen: set[int] = set()
        for idx in members.values():
            if seen.intersection(idx):
                raise DomainError("blocks overlap")
            seen.update(idx)
        return cls(members)


def block_partition(outer: DiscretizingSequence, ratios, tol: float = BOUNDARY_TOL) -> BlockPartition:
    """Assign each ``(i, r_i)`` to the block ``k`` with ``t_{k-1} < r_i <= t_k``.

    Comparisons are made in log coordinates with a relative tolerance so that a
    ratio equal to ``t_k`` up to rounding lands in block ``k``.
    """
    if isinstance(ratios, Mapping):
        ratios = ratios.items()
    items = [(int(i), float(r)) for i, r in ratios]
    if any(not r > 0 for _, r in items):
        raise DomainError("ratios must be positive")
    if np.any(np.diff(outer.log_points) <= 0):
        raise DomainError("outer sequence must be strictly increasing")
    members: dict[int, list[int]] = {}
    unassigned = []
    if items:
        lr = np.log([r for _, r in items])
        pos = np.searchsorted(outer.log_points + tol, lr, side="left")
        for (i, _), j in zip(items, pos):
            if 1 <= j < len(outer):
                members.setdefault(outer.k_min + int(j), []).append(i)
            else:
                unassigned.append(i)
    return BlockPartition({k: tuple(sorted(v)) for k, v in sorted(members.items())},
                          tuple(sorted(unassigned)), outer)
