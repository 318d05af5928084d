"""Numerical experiments on stability and reiteration for sequence couples.

Everything is realised on the couple l_q = (l^q, l^q(1/t~_k)) where t~_k
discretizes the composite parameter phi0 * phi(phi1/phi0).  The two
interpolated spaces (l_q)_{phi_j,P} are the block spaces
l^P(l^q^{M^j}(1/phi_j(t~_i))), their K-functional is the Omega_t split, and
the outer (.,.)_{phi,p} norm is the Janson sum over a discretizing
sequence of phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .discretize import (BOUNDARY_TOL, DiscretizingSequence, block_partition, build,
                         build_covering)
from .errors import DomainError, WindowError
from .kfunc import BlockCouple
from .qcfn import QuasiConcaveFn, compose_parameter, power_log
from .sequences import SeqVector, exponent_str, lp_norm, parse_exponent
from .spaces import BlockSpace, janson_norm_rows

# outer points kept beyond the ratio range; rho**-PAD bounds the Janson tail
PAD = 34
SAFE_MARGIN = 4
ORIENTATIONS = ("ratio10", "ratio01")
# relative step a table must clear to count as strictly increasing
STRICT_MARGIN = 1e-6
VARIANTS = ("ratio_tau", "ratio_z", "phi_ratio_tau", "phi_ratio_over_ratio_z")


@dataclass(frozen=True)
class Triple:
    phi: QuasiConcaveFn
    phi0: QuasiConcaveFn
    phi1: QuasiConcaveFn
    composite: QuasiConcaveFn

    @classmethod
    def of(cls, phi, phi0, phi1, window=(1e-12, 1e12)) -> Triple:
        return cls(phi, phi0, phi1, compose_parameter(phi, phi0, phi1, window=window))

    def to_spec(self) -> dict[str, Any]:
        return {"phi": self.phi.to_spec(), "phi0": self.phi0.to_spec(), "phi1": self.phi1.to_spec()}


def power_triple() -> Triple:
    """phi = t^(1/2), phi0 = t^(1/3), phi1 = t^(2/3); octave cardinalities stay bounded."""
    return Triple.of(power_log(0.5), power_log(1 / 3), power_log(2 / 3))


def log_triple() -> Triple:
    """phi = phi0 = t^(1/2), phi1 = t^(1/2) log(e+t); octave cardinalities grow with the window."""
    return Triple.of(power_log(0.5), power_log(0.5), power_log(0.5, a=1.0))


def double_window(window) -> tuple[float, float]:
    """Double the log-width of a window: [t_min^2, t_max^2]."""
    return (float(window[0]) ** 2, float(window[1]) ** 2)


def _log_ratios(triple: Triple, log_pts: np.ndarray, orientation: str) -> np.ndarray:
    if orientation not in ORIENTATIONS:
        raise DomainError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    lr = (np.asarray(triple.phi1.log_eval(log_pts), dtype=float)
          - np.asarray(triple.phi0.log_eval(log_pts), dtype=float))
    return lr if orientation == "ratio10" else -lr


class SequenceCoupleModel:
    """All discretizations and block spaces for one triple on one window."""

    def __init__(self, triple: Triple, window, rho: float = 2.0, orientation: str = "ratio10"):
        self.triple, self.window, self.rho = triple, tuple(map(float, window)), float(rho)
        self.orientation = orientation
        self.tilde = build(triple.composite, self.window, rho)
        x = self.tilde.log_points
        self.index = np.arange(self.tilde.k_min, self.tilde.k_max + 1)
        self.log_ratio = _log_ratios(triple, x, "ratio10")
        self.log_ratio_oriented = _log_ratios(triple, x, orientation)
        t_lo, t_hi = math.exp(x[0]), math.exp(x[-1])
        self.tau = build_covering(triple.phi0, t_lo, t_hi, rho, pad=1)
        self.z = build_covering(triple.phi1, t_lo, t_hi, rho, pad=1)
        r_lo, r_hi = math.exp(self.log_ratio.min()), math.exp(self.log_ratio.max())
        self.outer = build_covering(triple.phi, r_lo, r_hi, rho, pad=PAD)
        ro_lo = math.exp(self.log_ratio_oriented.min())
        ro_hi = math.exp(self.log_ratio_oriented.max())
        self.count_outer = (self.outer if orientation == "ratio10"
                            else build_covering(triple.phi, ro_lo, ro_hi, rho, pad=1))
        idx = self.index.tolist()
        self.part0 = block_partition(self.tau, zip(idx, np.exp(x)))
        self.part1 = block_partition(self.z, zip(idx, np.exp(x)))
        self.w0 = dict(zip(idx, np.exp(-np.asarray(triple.phi0.log_eval(x)))))
        self.w1 = dict(zip(idx, np.exp(-np.asarray(triple.phi1.log_eval(x)))))
        self.log_target = -np.asarray(triple.composite.log_eval(x), dtype=float)
        self.ratio = dict(zip(idx, np.exp(self.log_ratio)))
        self._engines: dict = {}

    @property
    def safe_range(self) -> tuple[int, int]:
        return self.tilde.k_min + SAFE_MARGIN, self.tilde.k_max - SAFE_MARGIN

    def spaces(self, P, q) -> tuple[BlockSpace, BlockSpace]:
        """Block realisations of (l_q)_{phi0,P} and (l_q)_{phi1,P}."""
        return (BlockSpace(P, q, self.part0, self.w0), BlockSpace(P, q, self.part1, self.w1))

    def engine(self, P, q) -> BlockCouple:
        key = (parse_exponent(P), parse_exponent(q))
        if key not in self._engines:
            self._engines[key] = BlockCouple(*self.spaces(*key), self.ratio)
        return self._engines[key]

    def lhs(self, xs: Sequence[SeqVector], P, q, p) -> np.ndarray:
        """Norms in ((l_q)_{phi0,P}, (l_q)_{phi1,P})_{phi,p}."""
        return janson_norm_rows(self.engine(P, q), xs, self.outer, p)

    def rhs(self, xs: Sequence[SeqVector], p) -> np.ndarray:
        """Norms in l^p(1 / phi(phi0,phi1)(t~_i))."""
        w = np.exp(self.log_target)
        return np.array([lp_norm(x.gather(self.index) * w, parse_exponent(p)) for x in xs])

    def octave_members(self) -> dict[int, np.ndarray]:
        """Inner indices with t_n <= ratio <= t_{n+1}, for every outer n (closed intervals)."""
        lt = self.count_outer.log_points
        lr = self.log_ratio_oriented
        order = np.argsort(lr, kind="stable")
        srt = lr[order]
        out = {}
        for j in range(len(lt) - 1):
            lo = np.searchsorted(srt, lt[j] - BOUNDARY_TOL, side="left")
            hi = np.searchsorted(srt, lt[j + 1] + BOUNDARY_TOL, side="right")
            out[self.count_outer.k_min + j] = np.sort(self.index[order[lo:hi]])
        return out


@dataclass
class CardinalityProfile:
    counts: dict[int, int]
    window: tuple[float, float]
    orientation: str
    inner_points: int
    degenerate_ratio: bool = False

    @property
    def max_count(self) -> int:
        return max(self.counts.values(), default=0)

    @property
    def argmax(self) -> int | None:
        return max(self.counts, key=lambda n: (self.counts[n], -n)) if self.counts else None

    def to_dict(self) -> dict[str, Any]:
        return {"max_cardinality": self.max_count, "argmax_n": self.argmax,
                "window": list(self.window), "orientation": self.orientation,
                "inner_points": self.inner_points, "degenerate_ratio": self.degenerate_ratio,
                "counts": {str(n): c for n, c in sorted(self.counts.items())}}


def _profile_from_model(m: SequenceCoupleModel) -> CardinalityProfile:
    counts = {n: len(v) for n, v in m.octave_members().items()}
    degenerate = float(np.ptp(m.log_ratio_oriented)) < 1e-9
    return CardinalityProfile(counts, m.window, m.orientation, len(m.index), degenerate)


def condition_v_profile(phi: QuasiConcaveFn, phi0: QuasiConcaveFn, phi1: QuasiConcaveFn,
                        window, rho: float = 2.0, orientation: str = "ratio10") -> CardinalityProfile:
    """Count, per outer n, the composite points whose ratio falls in [t_n, t_{n+1}].

    ``orientation='ratio10'`` uses phi1/phi0 (as in the block constructions),
    ``'ratio01'`` uses phi0/phi1.
    """
    triple = phi if isinstance(phi, Triple) else Triple.of(phi, phi0, phi1)
    return _profile_from_model(SequenceCoupleModel(triple, window, rho, orientation))


@dataclass
class SumSupReport:
    variant: str
    r: float
    ratios: dict[int, float]
    sizes: dict[int, int]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios.values(), default=1.0)

    def to_dict(self) -> dict[str, Any]:
        return {"variant": self.variant, "r": self.r, "max_ratio": self.max_ratio,
                "max_block_size": max(self.sizes.values(), default=0),
                "ratios": {str(k): v for k, v in sorted(self.ratios.items())}}


def sum_sup_ratio(variant, r: float, triple: Triple, window, rho: float = 2.0,
                  model: SequenceCoupleModel | None = None) -> SumSupReport:
    """Per-block (sum of terms) / (sup of terms) for the four sum-versus-sup estimates.

    ``variant`` is one of ``VARIANTS`` (or 1..4): R^r over tau-blocks, R^r
    over z-blocks, phi(R)^r over tau-blocks, (phi(R)/R)^r over z-blocks,
    with R = phi1/phi0 at the composite points.  Blocks are the closed
    intervals [tau_k, tau_{k+1}] (resp. [z_k, z_{k+1}]).
    """
    if isinstance(variant, int):
        variant = VARIANTS[variant - 1]
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}")
    if r == 0:
        raise DomainError("r must be non-zero")
    m = model or SequenceCoupleModel(triple, window, rho)
    lr = m.log_ratio
    if variant in ("ratio_tau", "ratio_z"):
        lterm = r * lr
    else:
        lphi = np.asarray(triple.phi.log_eval(lr), dtype=float)
        lterm = r * (lphi if variant == "phi_ratio_tau" else lphi - lr)
    outer = m.tau if variant.endswith("tau") else m.z
    x, lo = m.tilde.log_points, outer.log_points
    ratios, sizes = {}, {}
    for j in range(len(lo) - 1):
        sel = (x >= lo[j] - BOUNDARY_TOL) & (x <= lo[j + 1] + BOUNDARY_TOL)
        k = outer.k_min + j
        sizes[k] = int(sel.sum())
        if sizes[k] == 0:
            ratios[k] = 1.0
            continue
        lt = lterm[sel]
        ratios[k] = float(np.sum(np.exp(lt - lt.max())))
    return SumSupReport(variant, float(r), ratios, sizes)


def sample_vectors(rng: np.random.Generator, index_range: tuple[int, int], count: int,
                   log_scale=None) -> list[SeqVector]:
    """Random vectors supported in ``index_range`` (inclusive).

    Each draw picks a support pattern (1-8 points, gaps 1-3), Gaussian
    amplitudes and a position.  ``log_scale(i)`` (vectorised over index
    arrays) multiplies entry i by ``exp(log_scale(i))``; experiments pass
    the log of the inverse target weight so no coordinate dominates.
    """
    lo, hi = index_range
    out = []
    for _ in range(count):
        s = int(rng.integers(1, 9))
        gaps = rng.integers(1, 4, size=s - 1)
        amp = rng.standard_normal(s)
        u = rng.random()
        offs = np.concatenate([[0], np.cumsum(gaps)]).astype(int)
        span = int(offs[-1])
        if hi - lo < span:
            raise WindowError(f"window holds indices [{lo}, {hi}] after the safety margin; "
                              f"a support of span {span} does not fit")
        start = lo + int(u * (hi - lo - span + 1))
        vals = np.zeros(span + 1)
        vals[offs] = amp if log_scale is None else amp * np.exp(log_scale(start + offs))
        out.append(SeqVector(start, vals))
    return out


def model_vectors(model: SequenceCoupleModel, count: int, seed: int) -> list[SeqVector]:
    """Seeded samples on the safe interior of ``model``, scaled by phi(phi0,phi1)(t~_i)."""
    k0 = model.tilde.k_min
    return sample_vectors(np.random.default_rng(seed), model.safe_range, count,
                          lambda idx: -model.log_target[idx - k0])


def _stats(x: np.ndarray) -> dict[str, float]:
    if len(x) == 0:
        return {"min": math.nan, "median": math.nan, "max": math.nan}
    return {"min": float(np.min(x)), "median": float(np.median(x)), "max": float(np.max(x))}


@dataclass
class EquivalenceReport:
    vary: str
    exponents: tuple
    p: float
    samples: int
    skipped: int
    series: list[dict[str, Any]] = field(default_factory=list)

    @property
    def stats(self) -> dict[str, dict[str, float]]:
        return self.series[0]["stats"]

    def drift(self, family: str = "sides") -> float:
        """Largest relative change of the ratio extremes between consecutive windows."""
        worst = 0.0
        for a, b in zip(self.series, self.series[1:]):
            for key in ("min", "max"):
                worst = max(worst, abs(b["stats"][family][key] / a["stats"][family][key] - 1.0))
        return worst

    @property
    def families(self) -> list[str]:
        return list(self.series[0]["stats"]) if self.series else []

    @property
    def min_side_ratio(self) -> float:
        return min(s["stats"]["sides"]["min"] for s in self.series)

    def to_dict(self) -> dict[str, Any]:
        out = {"vary": self.vary, "exponents": [exponent_str(e) for e in self.exponents],
               "p": exponent_str(self.p), "samples": self.samples, "skipped": self.skipped,
               "drift": {f: self.drift(f) for f in self.families}, "series": self.series}
        if "sides" in self.families:
            out["min_side_ratio"] = self.min_side_ratio
        return out


def _sides(m: SequenceCoupleModel, xs, vary: str, pair, base_q, p):
    if vary == "couple":
        return [m.lhs(xs, p, q, p) for q in pair]
    if vary == "inner":
        return [m.lhs(xs, P, base_q, p) for P in pair]
    raise DomainError(f"vary must be 'couple' or 'inner', got {vary!r}")


def equivalence_experiment(pair, p, triple: Triple, window, samples: int = 100, seed: int = 0, *,
                           vary: str = "couple", base_q=None, doublings: int = 1,
                           rho: float = 2.0, vectors: Sequence[SeqVector] | None = None
                           ) -> EquivalenceReport:
    """Compare the l^1-built and l^inf-built reiterated spaces on random vectors.

    ``vary='couple'`` changes the exponent q of the couple l_q while both
    inner parameters use p, i.e. compares ((l_q)_{phi0,p}, (l_q)_{phi1,p})_{phi,p}
    for q in ``pair``.  ``vary='inner'`` keeps the couple exponent at
    ``base_q`` (default p) and changes the inner parameter exponent, i.e.
    compares (X_{phi0,P}, X_{phi1,P})_{phi,p} for P in ``pair``; this is the
    stability statement itself.  Each side is also compared with the
    weighted l^p target norm.  The experiment is repeated on ``doublings``
    successively doubled windows; the vectors are drawn once, on the safe
    interior of the first window, and reused so that the drift between
    windows isolates the effect of the window itself.
    """
    pair = tuple(parse_exponent(e) for e in pair)
    p = parse_exponent(p)
    base_q = p if base_q is None else parse_exponent(base_q)
    if samples < 1 and vectors is None:
        raise DomainError("samples must be >= 1")
    report = None
    w = tuple(map(float, window))
    xs = list(vectors) if vectors is not None else None
    for _ in range(doublings + 1):
        m = SequenceCoupleModel(triple, w, rho)
        if xs is None:
            xs = model_vectors(m, samples, seed)
        keep = [x for x in xs if not x.is_zero()]
        if report is None:
            report = EquivalenceReport(vary, pair, p, len(keep), len(xs) - len(keep))
        if keep:
            s0, s1 = _sides(m, keep, vary, pair, base_q, p)
            rhs = m.rhs(keep, p)
            fam = {"sides": s0 / s1, "side0_rhs": s0 / rhs, "side1_rhs": s1 / rhs}
        else:
            fam = {k: np.zeros(0) for k in ("sides", "side0_rhs", "side1_rhs")}
        report.series.append({"window": list(w), "composite_points": len(m.index),
                              "max_cardinality": _profile_from_model(m).max_count,
                              "stats": {k: _stats(v) for k, v in fam.items()}})
        w = double_window(w)
    return report


def gilbert_experiment(triple: Triple, window, p, q, samples: int = 200, seed: int = 0, *,
                       doublings: int = 1, rho: float = 2.0) -> EquivalenceReport:
    """Janson norm versus Gilbert's block norm on the couple (l^q, l^q(1/t~_k)).

    The couple uses the composite discretization t~_k of ``triple`` and the
    outer parameter ``triple.phi``.  Vectors are drawn once on the safe
    interior of the first window and reused on every doubled window.
    """
    from .kfunc import MinFormula
    from .sequences import WeightedSeqCouple
    from .spaces import gilbert_space

    p, q = parse_exponent(p), parse_exponent(q)
    report, xs = None, None
    w = tuple(map(float, window))
    for _ in range(doublings + 1):
        tilde = build(triple.composite, w, rho)
        x = tilde.log_points
        couple = WeightedSeqCouple(q, np.ones(len(x)), np.exp(-x), tilde.k_min)
        seq = build_covering(triple.phi, math.exp(x[0]), math.exp(x[-1]), rho, pad=PAD)
        space, _ = gilbert_space(couple, triple.phi, seq, p)
        if xs is None:
            lphi = np.asarray(triple.phi.log_eval(x), dtype=float)
            lo, hi = tilde.k_min + SAFE_MARGIN, tilde.k_max - SAFE_MARGIN
            xs = sample_vectors(np.random.default_rng(seed), (lo, hi), samples,
                                lambda idx: lphi[idx - tilde.k_min])
            xs = [v for v in xs if not v.is_zero()]
            report = EquivalenceReport("gilbert", (q,), p, len(xs), samples - len(xs))
        jn = janson_norm_rows(MinFormula(couple), xs, seq, p)
        gn = np.array([space.norm(v) for v in xs])
        report.series.append({"window": list(w), "composite_points": len(x),
                              "stats": {"janson_gilbert": _stats(jn / gn)}})
        w = double_window(w)
    return report


def witness_vectors(m: SequenceCoupleModel) -> dict[int, SeqVector]:
    """Per outer octave n, the target-normalised indicator of its composite points."""
    out = {}
    for n, members in m.octave_members().items():
        if len(members) == 0:
            continue
        pos = members - m.tilde.k_min
        vals = np.zeros(members[-1] - members[0] + 1)
        vals[members - members[0]] = np.exp(-m.log_target[pos])
        out[n] = SeqVector(int(members[0]), vals)
    return out


@dataclass
class DivergenceTable:
    p: float
    rows: list[dict[str, Any]]

    @property
    def worst(self) -> list[float]:
        return [r["worst_ratio"] for r in self.rows]

    @property
    def strictly_increasing(self) -> bool:
        w = self.worst
        return all(b > a * (1.0 + STRICT_MARGIN) for a, b in zip(w, w[1:]))

    @property
    def growth(self) -> float:
        w = self.worst
        return w[-1] / w[0] if w else 1.0

    @property
    def drift(self) -> float:
        w = self.worst
        return max((abs(b / a - 1.0) for a, b in zip(w, w[1:])), default=0.0)

    def csv_rows(self) -> list[tuple]:
        return [(f"{r['window'][0]:.6g}:{r['window'][1]:.6g}", r["worst_ratio"],
                 r["max_cardinality"]) for r in self.rows]

    def to_dict(self) -> dict[str, Any]:
        return {"p": exponent_str(self.p), "rows": self.rows,
                "strictly_increasing": self.strictly_increasing, "growth": self.growth,
                "drift": self.drift}


def counterexample_search(triple: Triple, windows, p, rho: float = 2.0, base_q=None,
                          orientation: str = "ratio10") -> DivergenceTable:
    """Worst (l^1-side)/(l^inf-side) ratio over overloaded-octave witnesses, per window.

    Sides are the stability pair (X_{phi0,1}, X_{phi1,1})_{phi,p} and
    (X_{phi0,inf}, X_{phi1,inf})_{phi,p} on X = l_q with q = ``base_q``
    (default p).  Each row also records the couple-exponent ratio (l_1 vs
    l_inf couple, inner exponent p) for the worst witness as a control.
    """
    p = parse_exponent(p)
    base_q = p if base_q is None else parse_exponent(base_q)
    rows = []
    for w in windows:
        m = SequenceCoupleModel(triple, w, rho, orientation)
        prof = _profile_from_model(m)
        wit = witness_vectors(m)
        ns = list(wit)
        xs = [wit[n] for n in ns]
        s1, sinf = _sides(m, xs, "inner", (1.0, math.inf), base_q, p)
        ratios = s1 / sinf
        j = int(np.argmax(ratios))
        c1, cinf = _sides(m, [xs[j]], "couple", (1.0, math.inf), base_q, p)
        rows.append({"window": [float(w[0]), float(w[1])], "worst_ratio": float(ratios[j]),
                     "witness_octave": int(ns[j]), "witness_size": len(xs[j].support),
                     "max_cardinality": prof.max_count,
                     "couple_ratio": float(c1[0] / cinf[0])})
    return DivergenceTable(p, rows)
