"""K-functionals of the concrete couples used in the experiments.

Each couple gets a function computing K(t, x) and a small engine class with
a vectorised ``profile`` over many t, which is what the Janson norm needs.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np
from scipy.special import expit

from .discretize import BOUNDARY_TOL
from .errors import CapacityError, ContractError, DomainError
from .sequences import SeqVector, StepFunction, WeightedSeqCouple, lp_norm
from .spaces import BlockSpace

ORACLE_CAP = 8
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def k_min_formula(c: WeightedSeqCouple, a: SeqVector, t: float) -> float:
    """F(t) = || a_i min(v_i, t w_i) ||_q, equivalent to K within a factor 2."""
    _check_positive(t)
    vals = c.aligned(a)
    return float(lp_norm(vals * np.minimum(c.v, t * c.w), c.q))


def _check_positive(t):
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"t must be positive and finite, got {t!r}")


def _golden(h, lo: float, hi: float, n_scan: int, xtol: float) -> tuple[float, float]:
    """Minimise a unimodal ``h`` on [lo, hi]: coarse scan, then golden section."""
    xs = np.linspace(lo, hi, n_scan)
    vals = [h(x) for x in xs]
    j = int(np.argmin(vals))
    best_x, best = xs[j], vals[j]
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, n_scan - 1)]
    x1, x2 = b - _GOLD * (b - a), a + _GOLD * (b - a)
    f1, f2 = h(x1), h(x2)
    while b - a > xtol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLD * (b - a)
            f1 = h(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLD * (b - a)
            f2 = h(x2)
    for x, fx in ((x1, f1), (x2, f2)):
        if fx < best:
            best_x, best = x, fx
    return best_x, best


def _pnorm(xs, q: float) -> float:
    if math.isinf(q):
        return max(xs)
    return sum(x ** q for x in xs) ** (1.0 / q)


def k_exact_oracle(c: WeightedSeqCouple, a: SeqVector, t: float, cap: int = ORACLE_CAP,
                   return_lambda: bool = False):
    """Brute-force K(t, a) = inf ||b||_{l^q(v)} + t ||c||_{l^q(w)} over a = b + c.

    Coordinates split as b_i = (1 - lam_i) a_i, c_i = lam_i a_i with lam_i in
    [0, 1].  The minimisation is reduced to a one-dimensional convex search:

    * q = 1: the objective separates; each lam_i is searched on its own.
    * q = inf: for a bound alpha on the l^inf(v) part the best c is explicit,
      leaving a convex piecewise-linear function of alpha.
    * 1 < q < inf: minimisers of ||b||^q + nu ||c||^q (explicit per
      coordinate) trace the Pareto front of the two norms; K is searched
      along that front in log(nu).

    With ``return_lambda`` the minimising split is returned as well.
    """
    _check_positive(t)
    vals = c.aligned(a)
    sup = np.nonzero(vals)[0]
    if len(sup) > cap:
        raise CapacityError(f"oracle handles at most {cap} supported coordinates, got {len(sup)}; "
                            "use k_min_formula for larger vectors")
    if len(sup) == 0:
        return (0.0, {}) if return_lambda else 0.0
    cv = [abs(float(x)) for x in vals[sup]]
    v = [float(x) for x in c.v[sup]]
    w = [float(x) for x in c.w[sup]]
    n, q = len(cv), c.q

    if q == 1:
        lam, total = [], 0.0
        for ci, vi, wi in zip(cv, v, w):
            x, fx = _golden(lambda l: ci * ((1 - l) * vi + t * l * wi), 0.0, 1.0, 9, 1e-13)
            for end in (0.0, 1.0):
                fe = ci * ((1 - end) * vi + t * end * wi)
                if fe < fx:
                    x, fx = end, fe
            lam.append(x)
            total += fx
    elif math.isinf(q):
        top = max(ci * vi for ci, vi in zip(cv, v))

        def h(alpha):
            return alpha + t * max(wi * max(0.0, ci - alpha / vi) for ci, vi, wi in zip(cv, v, w))

        alpha, total = _golden(h, 0.0, top, 65, 1e-14 * top)
        for end in (0.0, top):
            if h(end) < total:
                alpha, total = end, h(end)
        lam = [max(0.0, ci - alpha / vi) / ci for ci, vi in zip(cv, v)]
    else:
        e = q / (q - 1.0)
        lr = [e * math.log(wi / vi) for vi, wi in zip(v, w)]

        def split(sigma):
            z = np.array([sigma + r for r in lr])
            return expit(-z), expit(z)

        def h(sigma):
            moved, kept = split(sigma)
            return (_pnorm([ci * vi * k for ci, vi, k in zip(cv, v, kept)], q)
                    + t * _pnorm([ci * wi * m for ci, wi, m in zip(cv, w, moved)], q))

        sigma, total = _golden(h, -max(lr) - 60.0, -min(lr) + 60.0, 97, 1e-10)
        lam = list(split(sigma)[0])
        ends = ((_pnorm([ci * vi for ci, vi in zip(cv, v)], q), [0.0] * n),
                (t * _pnorm([ci * wi for ci, wi in zip(cv, w)], q), [1.0] * n))
        for fe, le in ends:
            if fe < total:
                total, lam = fe, le
    total = float(total)
    if return_lambda:
        idx = [c.start + int(j) for j in sup]
        return total, {i: float(l) for i, l in zip(idx, lam)}
    return total


def k_l1_linf(f: StepFunction, t: float) -> float:
    """K(t, f; L^1, L^inf) as the integral of the decreasing rearrangement over (0, t)."""
    _check_positive(t)
    lengths = np.diff(f.breaks)
    order = np.argsort(-f.levels, kind="stable")
    lv, ln = f.levels[order], lengths[order]
    before = np.concatenate([[0.0], np.cumsum(ln)[:-1]])
    return float(np.sum(lv * np.clip(t - before, 0.0, ln)))


def _ratio_array(ratio: Mapping[int, float], indices) -> np.ndarray:
    out = np.empty(len(indices))
    for j, i in enumerate(indices):
        r = ratio.get(int(i)) if hasattr(ratio, "get") else None
        out[j] = np.nan if r is None else float(r)
    return out


def k_block_couple(a: SeqVector, t: float, space0: BlockSpace, space1: BlockSpace,
                   ratio: Mapping[int, float]) -> float:
    """||a chi_{R <= t}||_{space0} + t ||a chi_{R > t}||_{space1} with R_i = ``ratio[i]``.

    This split is two-sided equivalent to the K-functional of the pair of
    block spaces.
    """
    _check_positive(t)
    return float(BlockCouple(space0, space1, ratio).profile(a, np.array([t]))[0])


class MinFormula:
    """K-engine for (l^q(v), l^q(w)) using the min(v, t w) formula."""

    def __init__(self, couple: WeightedSeqCouple):
        self.couple = couple

    def check(self, x):
        if not isinstance(x, SeqVector):
            raise ContractError(f"{type(self).__name__} needs a SeqVector, got {type(x).__name__}")
        if not self.couple.contains(x):
            raise ContractError(f"support {x.support} is outside the couple window")

    def __call__(self, t: float, x: SeqVector) -> float:
        self.check(x)
        return k_min_formula(self.couple, x, t)

    def profile(self, x: SeqVector, ts) -> np.ndarray:
        return self.profile_rows([x], ts)[0]

    def profile_rows(self, xs, ts) -> np.ndarray:
        c = self.couple
        ts = np.asarray(ts, dtype=float)
        m = np.minimum(c.v[None, :], ts[:, None] * c.w[None, :])
        out = np.empty((len(xs), len(ts)))
        for r, x in enumerate(xs):
            self.check(x)
            out[r] = lp_norm(np.abs(x.gather(c.indices))[None, :] * m, c.q, axis=1)
        return out


class ExactOracle(MinFormula):
    """K-engine for (l^q(v), l^q(w)) using the brute-force oracle."""

    def __init__(self, couple: WeightedSeqCouple, cap: int = ORACLE_CAP):
        super().__init__(couple)
        self.cap = cap

    def __call__(self, t: float, x: SeqVector) -> float:
        self.check(x)
        return k_exact_oracle(self.couple, x, t, self.cap)

    def profile_rows(self, xs, ts) -> np.ndarray:
        out = np.empty((len(xs), len(ts)))
        for r, x in enumerate(xs):
            self.check(x)
            out[r] = [k_exact_oracle(self.couple, x, float(t), self.cap) for t in ts]
        return out


class L1Linf:
    """K-engine for the couple (L^1, L^inf) on (0, inf)."""

    def check(self, x):
        if not isinstance(x, StepFunction):
            raise ContractError(f"L1Linf needs a StepFunction, got {type(x).__name__}")

    def __call__(self, t: float, x: StepFunction) -> float:
        self.check(x)
        return k_l1_linf(x, t)

    def profile(self, x: StepFunction, ts) -> np.ndarray:
        self.check(x)
        return np.array([k_l1_linf(x, float(t)) for t in ts])


class BlockCouple:
    """K-engine for a pair of block spaces, split along R_i <= t."""

    def __init__(self, space0: BlockSpace, space1: BlockSpace, ratio: Mapping[int, float]):
        self.space0, self.space1 = space0, space1
        self.ratio = ratio
        self._lr0 = np.log(_ratio_array(ratio, space0.indices))
        self._lr1 = np.log(_ratio_array(ratio, space1.indices))

    def check(self, x):
        if not isinstance(x, SeqVector):
            raise ContractError(f"BlockCouple needs a SeqVector, got {type(x).__name__}")
        for i in x.support:
            r = self.ratio.get(i)
            if r is None or not (r > 0 and math.isfinite(r)):
                raise DomainError(f"ratio undefined at supported index {i}")

    def __call__(self, t: float, x: SeqVector) -> float:
        _check_positive(t)
        return float(self.profile(x, np.array([t]))[0])

    def profile(self, x: SeqVector, ts) -> np.ndarray:
        self.check(x)
        lt = np.log(np.asarray(ts, dtype=float))[:, None]
        g0 = self.space0.gather(x)
        g1 = self.space1.gather(x)
        g0 = np.where(np.isnan(self._lr0), 0.0, g0)
        g1 = np.where(np.isnan(self._lr1), 0.0, g1)
        low0 = self._lr0[None, :] <= lt + BOUNDARY_TOL
        low1 = self._lr1[None, :] <= lt + BOUNDARY_TOL
        n0 = self.space0.norm_rows(np.where(low0, g0[None, :], 0.0))
        n1 = self.space1.norm_rows(np.where(low1, 0.0, g1[None, :]))
        return n0 + np.exp(lt[:, 0]) * n1

    def profile_rows(self, xs, ts) -> np.ndarray:
        return np.array([self.profile(x, ts) for x in xs])


def k_profile_rows(engine, x, ts) -> list[tuple[float, float]]:
    """``(t, K(t, x))`` rows for CSV export."""
    engine.check(x)
    ks = engine.profile(x, np.asarray(ts, dtype=float))
    return [(float(t), float(k)) for t, k in zip(ts, ks)]
