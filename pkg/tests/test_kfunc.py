import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interpstab.errors import CapacityError, ContractError, DomainError
from interpstab.kfunc import (ExactOracle, L1Linf, MinFormula, k_block_couple,
                              k_exact_oracle, k_l1_linf, k_min_formula, k_profile_rows)
from interpstab.sequences import SeqVector, StepFunction, WeightedSeqCouple
from interpstab.stability import SequenceCoupleModel, power_triple

INF = math.inf


def cvx_norm(expr, q):
    return cp.norm(expr, "inf" if math.isinf(q) else q)


def cvx_k(couple, a, t):
    """Independent K-functional: direct convex minimisation over b + c = a."""
    vals = couple.aligned(a)
    b = cp.Variable(len(vals))
    obj = cvx_norm(cp.multiply(couple.v, b), couple.q) + t * cvx_norm(
        cp.multiply(couple.w, vals - b), couple.q)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def random_instance(rng, q, n=None):
    n = n or int(rng.integers(1, 7))
    v = np.exp(rng.uniform(-3, 3, n))
    w = np.exp(rng.uniform(-3, 3, n))
    a = rng.standard_normal(n) * np.exp(rng.uniform(-2, 2, n))
    return WeightedSeqCouple(q, v, w, start=int(rng.integers(-5, 5))), a


# ---- k_min_formula

def test_min_formula_q1():
    c = WeightedSeqCouple(1, [1, 1, 1], [1, 0.25, 0.0625])
    assert k_min_formula(c, SeqVector(0, [1, 1, 1]), 4.0) == pytest.approx(2.25, rel=1e-15)


def test_min_formula_zero_vector():
    c = WeightedSeqCouple(2, [1, 2], [3, 4])
    assert k_min_formula(c, SeqVector(0, [0.0, 0.0]), 1.5) == 0.0


def test_min_formula_qinf():
    c = WeightedSeqCouple(INF, [1, 1], [1, 0.25])
    assert k_min_formula(c, SeqVector(0, [1, 1]), 2.0) == 1.0


def test_min_formula_rejects_bad_t():
    c = WeightedSeqCouple(1, [1], [1])
    with pytest.raises(DomainError):
        k_min_formula(c, SeqVector(0, [1.0]), 0.0)


def test_vector_outside_couple():
    c = WeightedSeqCouple(1, [1, 1], [1, 1])
    with pytest.raises(DomainError):
        k_min_formula(c, SeqVector(5, [1.0]), 1.0)


# ---- exact oracle

@pytest.mark.parametrize("seed", range(10))
def test_oracle_q1_equals_min_formula(seed):
    rng = np.random.default_rng(seed)
    c, a = random_instance(rng, 1)
    x = SeqVector(c.start, a)
    for t in np.geomspace(1e-3, 1e3, 7):
        assert k_exact_oracle(c, x, t) == pytest.approx(k_min_formula(c, x, t), rel=1e-12)


@pytest.mark.parametrize("q", [1, 1.5, 2, 3, INF])
def test_oracle_single_coordinate(q):
    c = WeightedSeqCouple(q, [2.0, 1.0], [0.5, 1.0])
    x = SeqVector(0, [-3.0, 0.0])
    for t in (0.1, 1.0, 4.0, 10.0):
        assert k_exact_oracle(c, x, t) == pytest.approx(3.0 * min(2.0, 0.5 * t), rel=1e-8)


def test_oracle_proportional_weights():
    c = WeightedSeqCouple(2, [1, 1], [1, 1])
    val, lam = k_exact_oracle(c, SeqVector(0, [3.0, 4.0]), 0.5, return_lambda=True)
    assert val == pytest.approx(2.5, rel=1e-10)
    assert set(lam) == {0, 1}
    assert all(l == pytest.approx(1.0, abs=1e-6) for l in lam.values())


def test_oracle_capacity():
    c = WeightedSeqCouple(2, np.ones(9), np.ones(9))
    with pytest.raises(CapacityError, match="k_min_formula"):
        k_exact_oracle(c, SeqVector(0, np.ones(9)), 1.0)


def test_oracle_zero():
    c = WeightedSeqCouple(2, np.ones(3), np.ones(3))
    assert k_exact_oracle(c, SeqVector(0, np.zeros(3)), 1.0) == 0.0


@pytest.mark.parametrize("q", [1, 1.5, 2, 4, INF])
@pytest.mark.parametrize("seed", range(6))
def test_oracle_matches_cvxpy(q, seed):
    rng = np.random.default_rng(100 + seed)
    c, a = random_instance(rng, q)
    x = SeqVector(c.start, a)
    for t in np.geomspace(1e-2, 1e2, 5):
        ref = cvx_k(c, x, t)
        got = k_exact_oracle(c, x, t)
        assert got == pytest.approx(ref, rel=2e-6)
        # the oracle is a minimiser, so it can not be noticeably above the true infimum
        assert got <= ref * (1 + 2e-6)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, INF]), st.floats(-6, 6))
@settings(max_examples=60, deadline=None)
def test_sandwich(seed, q, lt):
    rng = np.random.default_rng(seed)
    c, a = random_instance(rng, q)
    x, t = SeqVector(c.start, a), math.exp(lt)
    f = k_min_formula(c, x, t)
    k = k_exact_oracle(c, x, t)
    assert f * (1 - 1e-7) <= k <= 2 * f * (1 + 1e-7)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, INF]))
@settings(max_examples=15, deadline=None)
def test_k_shape(seed, q):
    rng = np.random.default_rng(seed)
    c, a = random_instance(rng, q)
    x = SeqVector(c.start, a)
    ts = np.geomspace(1e-3, 1e3, 32)
    k = ExactOracle(c).profile(x, ts)
    assert np.all(np.diff(k) >= -1e-8 * k[1:])
    assert np.all(np.diff(k / ts) <= 1e-8 * (k / ts)[:-1])
    # midpoint concavity on consecutive triples
    mid = ExactOracle(c).profile(x, (ts[:-1] + ts[1:]) / 2)
    assert np.all(mid >= (k[:-1] + k[1:]) / 2 * (1 - 1e-8))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, INF]),
       st.floats(-50, 50).filter(lambda s: abs(s) > 1e-3), st.floats(-4, 4))
@settings(max_examples=40, deadline=None)
def test_homogeneity(seed, q, lam, lt):
    rng = np.random.default_rng(seed)
    c, a = random_instance(rng, q)
    x, t = SeqVector(c.start, a), math.exp(lt)
    for engine in (MinFormula(c), ExactOracle(c)):
        assert engine(t, x.scale(lam)) == pytest.approx(abs(lam) * engine(t, x), rel=1e-7)


def test_engine_contract():
    c = WeightedSeqCouple(1, [1, 1], [1, 1])
    with pytest.raises(ContractError):
        MinFormula(c).check(StepFunction.from_pieces([(1, 1)]))
    with pytest.raises(ContractError):
        MinFormula(c).check(SeqVector(7, [1.0]))
    with pytest.raises(ContractError):
        L1Linf().check(SeqVector(0, [1.0]))


def test_profile_rows_csv():
    c = WeightedSeqCouple(1, [1, 1, 1], [1, 0.25, 0.0625])
    rows = k_profile_rows(MinFormula(c), SeqVector(0, [1, 1, 1]), [4.0, 16.0])
    assert rows == [(4.0, 2.25), (16.0, 3.0)]


# ---- (L1, Linf)

def lambda_formula(f, t):
    """K(t) = min over lam >= 0 of int (|f| - lam)_+ + t lam; the minimum sits at a level."""
    lengths = np.diff(f.breaks)
    cands = np.concatenate([[0.0], f.levels])
    return min(float(np.sum(lengths * np.maximum(f.levels - lam, 0))) + t * lam for lam in cands)


def test_l1linf_indicator():
    assert k_l1_linf(StepFunction.from_pieces([(1, 1)]), 2.0) == 1.0


def test_l1linf_decreasing():
    assert k_l1_linf(StepFunction.from_pieces([(1, 2), (2, 1)]), 2.0) == 3.0


def test_l1linf_rearranged():
    assert k_l1_linf(StepFunction.from_pieces([(1, 1), (1, 2)]), 2.0) == 3.0


pieces = st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, 10)), min_size=1, max_size=8)


@given(pieces, st.floats(-5, 5))
@settings(max_examples=80, deadline=None)
def test_l1linf_matches_lambda_formula(ps, lt):
    f = StepFunction.from_pieces(ps)
    t = math.exp(lt)
    assert k_l1_linf(f, t) == pytest.approx(lambda_formula(f, t), rel=1e-12, abs=1e-12)


@given(pieces, st.randoms(use_true_random=False), st.floats(0.01, 50))
@settings(max_examples=60, deadline=None)
def test_l1linf_rearrangement_invariance(ps, rnd, t):
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    a = k_l1_linf(StepFunction.from_pieces(ps), t)
    b = k_l1_linf(StepFunction.from_pieces(shuffled), t)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_l1linf_engine_profile():
    f = StepFunction.from_pieces([(1, 2), (2, 1)])
    assert list(L1Linf().profile(f, [0.5, 1.0, 3.0, 10.0])) == [1.0, 2.0, 4.0, 4.0]


# ---- block couple

@pytest.fixture(scope="module")
def small_model():
    return SequenceCoupleModel(power_triple(), (4.0 ** -6, 4.0 ** 6))


def test_block_couple_unit_vector_low_side(small_model):
    m = small_model
    s0, s1 = m.spaces(1, 1)
    for j in (-3, 0, 2):
        t = m.ratio[j] * 1.5
        assert k_block_couple(SeqVector.unit(j), t, s0, s1, m.ratio) == pytest.approx(
            1 / power_triple().phi0(4.0 ** j), rel=1e-12)


def test_block_couple_unit_vector_high_side(small_model):
    m = small_model
    s0, s1 = m.spaces(2, INF)
    for j in (-3, 0, 2):
        t = m.ratio[j] / 1.5
        assert k_block_couple(SeqVector.unit(j), t, s0, s1, m.ratio) == pytest.approx(
            t / power_triple().phi1(4.0 ** j), rel=1e-12)


def test_block_couple_power_triple_sum(small_model):
    m = small_model
    s0, s1 = m.spaces(1, 1)
    a = SeqVector(-6, np.ones(13))
    # ratio 4^(k/3) <= 1 iff k <= 0; weights 4^(-k/3) and 4^(-2k/3)
    expected = sum(4.0 ** (-k / 3) for k in range(-6, 1)) + sum(4.0 ** (-2 * k / 3) for k in range(1, 7))
    assert k_block_couple(a, 1.0, s0, s1, m.ratio) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(42.1916, abs=1e-4)


def test_block_couple_undefined_ratio(small_model):
    m = small_model
    s0, s1 = m.spaces(1, 1)
    ratio = dict(m.ratio)
    del ratio[0]
    with pytest.raises(DomainError):
        k_block_couple(SeqVector.unit(0), 1.0, s0, s1, ratio)


def test_block_couple_wrong_element(small_model):
    with pytest.raises(ContractError):
        small_model.engine(1, 1).check(StepFunction.from_pieces([(1, 1)]))


def cvx_block_norm(space, expr_of_index):
    blocks = []
    for k in sorted(space.partition.members):
        idx = space.partition.members[k]
        if idx:
            blocks.append(cvx_norm(cp.hstack([space.weight[i] * expr_of_index(i) for i in idx]),
                                   space.q))
    return cvx_norm(cp.hstack(blocks), space.p)


def cvx_block_k(space0, space1, a, t):
    idx = sorted(set(space0.indices.tolist()))
    pos = {i: j for j, i in enumerate(idx)}
    vals = a.gather(idx)
    b = cp.Variable(len(idx))
    n0 = cvx_block_norm(space0, lambda i: b[pos[i]])
    n1 = cvx_block_norm(space1, lambda i: vals[pos[i]] - b[pos[i]])
    prob = cp.Problem(cp.Minimize(n0 + t * n1))
    prob.solve(solver=cp.CLARABEL)
    return prob.value


@pytest.mark.parametrize("P,q", [(1, 1), (1, INF), (INF, 1), (2, 2), (INF, INF), (1, 2)])
def test_block_couple_against_true_infimum(P, q):
    m = SequenceCoupleModel(power_triple(), (4.0 ** -4, 4.0 ** 4))
    s0, s1 = m.spaces(P, q)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(4):
        a = SeqVector(-3, rng.standard_normal(7) * np.exp(-m.log_target[1:8]))
        for t in np.geomspace(0.05, 20, 6):
            split = k_block_couple(a, t, s0, s1, m.ratio)
            true = cvx_block_k(s0, s1, a, t)
            # the split is one admissible decomposition
            assert split >= true * (1 - 1e-6)
            worst = max(worst, split / true)
    # two-sided equivalence with a moderate constant on this couple
    assert worst < 4.0
