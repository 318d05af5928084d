"""Norms of the interpolation spaces: Janson, block spaces and Gilbert's description."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .discretize import BlockPartition, DiscretizingSequence, block_partition
from .errors import DomainError, WindowError
from .qcfn import QuasiConcaveFn
from .sequences import SeqVector, WeightedSeqCouple, lp_norm, parse_exponent

TAIL_FLAG = 1e-6


@dataclass(frozen=True)
class NormReport:
    value: float
    window: tuple[int, int]
    tail_estimate: float
    summands: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def tail_flagged(self) -> bool:
        return self.tail_estimate > TAIL_FLAG * self.value

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "window": list(self.window),
                "tail_estimate": self.tail_estimate, "tail_flagged": self.tail_flagged}


@dataclass(frozen=True)
class BlockSpace:
    """l^p(l^q^{M_k}(weight)): inner l^q inside each block, outer l^p across blocks."""

    p: float
    q: float
    partition: BlockPartition
    weight: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "q", parse_exponent(self.q))
        order, starts = [], []
        for k in sorted(self.partition.members):
            idx = self.partition.members[k]
            if idx:
                starts.append(len(order))
                order.extend(idx)
        missing = [i for i in order if i not in self.weight]
        if missing:
            raise DomainError(f"no weight for block members {missing[:5]}")
        stray = set(self.weight) - set(order)
        if stray:
            raise DomainError(f"weighted indices outside every block: {sorted(stray)[:5]}")
        w = np.array([float(self.weight[i]) for i in order])
        if np.any(~(w > 0)):
            raise DomainError("block-space weights must be positive")
        object.__setattr__(self, "_order", np.array(order, dtype=int))
        object.__setattr__(self, "_starts", np.array(starts, dtype=int))
        object.__setattr__(self, "_w", w)

    @property
    def indices(self) -> np.ndarray:
        """Inner indices in block order (the column order used by ``norm_rows``)."""
        return self._order

    @property
    def weights(self) -> np.ndarray:
        return self._w

    def gather(self, a: SeqVector) -> np.ndarray:
        """|a_i| * weight_i in column order; raises if ``a`` lives off the blocks."""
        known = set(self._order.tolist())
        off = [i for i in a.support if i not in known]
        if off:
            raise DomainError(f"supported indices {off[:5]} are not assigned to any block")
        return np.abs(a.gather(self._order)) * self._w

    def norm_rows(self, X: np.ndarray) -> np.ndarray:
        """Norms of each row of ``X``, whose columns are weighted magnitudes in block order."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] == 0:
            return np.zeros(X.shape[0])
        if math.isinf(self.q):
            inner = np.maximum.reduceat(X, self._starts, axis=1)
        else:
            m = np.max(X, axis=1, keepdims=True)
            m = np.where(m > 0, m, 1.0)
            inner = m * np.add.reduceat((X / m) ** self.q, self._starts, axis=1) ** (1.0 / self.q)
        return np.asarray(lp_norm(inner, self.p, axis=1)).reshape(X.shape[0])

    def norm(self, a: SeqVector) -> float:
        return float(self.norm_rows(self.gather(a)[None, :])[0])


def block_norm(E: BlockSpace, a: SeqVector) -> float:
    """Two-scale norm (sum_k (sum_{i in M_k} |a_i w_i|^q)^{p/q})^{1/p}."""
    return E.norm(a)


def weighted_lp_norm(a: SeqVector, weight: Mapping[int, float], p: float) -> float:
    """Norm of ``a`` in l^p(weight); every supported index needs a weight."""
    sup = a.support
    missing = [i for i in sup if i not in weight]
    if missing:
        raise DomainError(f"no weight for indices {missing[:5]}")
    return float(lp_norm([a.values[i - a.start] * weight[i] for i in sup], parse_exponent(p)))


def janson_norm(kprovider, x, seq: DiscretizingSequence, p) -> NormReport:
    """Discrete norm (sum_k (K(t_k, x) / phi(t_k))^p)^{1/p} over the window of ``seq``.

    ``kprovider`` is a K-engine from :mod:`interpstab.kfunc`; it validates
    that ``x`` belongs to its couple.  ``seq.source`` supplies phi.
    """
    p = parse_exponent(p)
    if seq.source is None:
        raise DomainError("discretizing sequence carries no parameter function")
    kprovider.check(x)
    ts = seq.points
    k = np.asarray(kprovider.profile(x, ts), dtype=float)
    s = k * np.exp(-np.asarray(seq.source.log_eval(seq.log_points), dtype=float))
    value = float(lp_norm(s, p))
    tail = float(max(s[0], s[-1])) if len(s) else 0.0
    return NormReport(value, (seq.k_min, seq.k_max), tail, s)


def janson_norm_rows(kprovider, xs, seq: DiscretizingSequence, p) -> np.ndarray:
    """Janson norms of many elements at once (engines with ``profile_rows``)."""
    p = parse_exponent(p)
    k = kprovider.profile_rows(xs, seq.points)
    s = k * np.exp(-np.asarray(seq.source.log_eval(seq.log_points), dtype=float))[None, :]
    return np.asarray(lp_norm(s, p, axis=1)).reshape(len(k))


def gilbert_space(c: WeightedSeqCouple, phi: QuasiConcaveFn, seq: DiscretizingSequence,
                  p) -> tuple[BlockSpace, tuple]:
    """Block space l^p(l^q^{M_k}(v_i / phi(v_i/w_i))) with M_k cut by ``seq``.

    Returns the space and the couple indices whose ratio fell outside the
    window of ``seq``.
    """
    idx = list(c.indices)
    ratios = c.v / c.w
    part = block_partition(seq, zip(idx, ratios))
    lw = np.log(c.v) - np.asarray(phi.log_eval(np.log(ratios)), dtype=float)
    assigned = set(part.block_of())
    weight = {i: float(math.exp(lw[j])) for j, i in enumerate(idx) if i in assigned}
    return BlockSpace(p, c.q, part, weight), part.unassigned


def gilbert_rhs(c: WeightedSeqCouple, phi: QuasiConcaveFn, seq: DiscretizingSequence, p,
                a: SeqVector) -> float:
    """Right-hand side of Gilbert's description of (l^q(v), l^q(w))_{phi,p}."""
    c.aligned(a)
    space, unassigned = gilbert_space(c, phi, seq, p)
    bad = sorted(set(unassigned).intersection(a.support))
    if bad:
        raise WindowError(f"ratios v_i/w_i for indices {bad[:5]} fall outside the discretizing "
                          f"window [{seq.points[0]:.3g}, {seq.points[-1]:.3g}]; enlarge it")
    return space.norm(a)
