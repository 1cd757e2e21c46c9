import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import QVAL_CHSH, random_distribution
from entcert import (Behavior, BudgetExceededError, JointTable, NullEventError,
                     SamplingError, ThresholdGameSpec, ValidationError,
                     WinEventSpec, augment_dependency_breaking,
                     behavior_of, canonical_chsh_strategy, chsh_game,
                     chsh_outcome_broadcast_strategy,
                     claim27_max_deviation, classical_deterministic_strategy,
                     condition_on_event, correlated_sample,
                     correlated_sampling_joint, extraction_protocol,
                     hoeffding_completeness_bound, iid_lift_table,
                     iid_threshold_win_prob, lemma_audit,
                     monte_carlo_threshold, prop32_search)
from entcert.repetition import (agreement_probability, correlated_sample_batch,
                                expected_conditional_tv,
                                expected_conditional_tv_loop,
                                joint_table_from_strategy, omega_variables,
                                round_win_probability, sweep_threshold)

ALPHA_CHSH = QVAL_CHSH - 0.75
TAU_CHSH = 0.25 - 0.75 * ALPHA_CHSH
BETA_CHSH = ALPHA_CHSH ** 2 / (1000.0 * 2.0)


def _random_joint_table(rng, n, nx=2, ny=2, na=2, nb=2):
    """Random (possibly signaling) n-round table mu^n * P(avec, bvec | xvec, yvec)."""
    mu = rng.random((nx, ny)) + 0.1
    mu /= mu.sum()
    mu_n = mu
    for _ in range(n - 1):
        mu_n = np.multiply.outer(mu_n, mu)
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    mu_n = np.transpose(mu_n, perm)
    cond = rng.random((nx,) * n + (ny,) * n + (na,) * n + (nb,) * n) + 0.05
    cond /= cond.sum(axis=tuple(range(2 * n, 4 * n)), keepdims=True)
    w = mu_n.reshape(mu_n.shape + (1,) * (2 * n)) * cond
    names = tuple([f"X{i}" for i in range(1, n + 1)]
                  + [f"Y{i}" for i in range(1, n + 1)]
                  + [f"A{i}" for i in range(1, n + 1)]
                  + [f"B{i}" for i in range(1, n + 1)])
    return JointTable(names, w)


class TestBinomialTail:
    def test_certain_win(self):
        assert iid_threshold_win_prob(1.0, 10, 0.99) == 1.0

    def test_half_two_rounds_all_wins(self):
        assert iid_threshold_win_prob(0.5, 2, 1.0) == pytest.approx(0.25)

    def test_matches_direct_summation(self):
        direct = sum(math.comb(20, k) * 0.85 ** k * 0.15 ** (20 - k)
                     for k in range(15, 21))
        assert iid_threshold_win_prob(0.85, 20, 0.75) == pytest.approx(
            direct, abs=1e-14)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.integers(1, 60), st.floats(0.05, 1.0))
    @settings(max_examples=150, deadline=None)
    def test_monotone_in_p(self, p1, p2, n, threshold):
        lo, hi = min(p1, p2), max(p1, p2)
        assert iid_threshold_win_prob(lo, n, threshold) <= \
            iid_threshold_win_prob(hi, n, threshold) + 1e-12

    @given(st.floats(0.0, 1.0), st.integers(1, 60),
           st.floats(0.05, 1.0), st.floats(0.05, 1.0))
    @settings(max_examples=150, deadline=None)
    def test_antitone_in_threshold(self, p, n, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        assert iid_threshold_win_prob(p, n, hi) <= \
            iid_threshold_win_prob(p, n, lo) + 1e-12

    def test_invalid_p(self):
        with pytest.raises(ValidationError):
            iid_threshold_win_prob(1.5, 10, 0.5)


class TestHoeffding:
    def test_vacuous_at_equal_rates(self):
        with pytest.raises(ValidationError):
            hoeffding_completeness_bound(0.1, 0.1, 100)

    def test_closed_form(self):
        assert hoeffding_completeness_bound(0.05, 0.0, 1000) == pytest.approx(
            1.0 - math.exp(-5.0 / 6.0))

    def test_dominated_by_exact_tail(self):
        # per-round win qval - eta against threshold qval - nu
        eta, nu = 0.02, 0.05
        p = QVAL_CHSH - eta
        for n in range(25, 401, 25):
            exact = iid_threshold_win_prob(p, n, QVAL_CHSH - nu)
            assert hoeffding_completeness_bound(nu, eta, n) <= exact + 1e-12


class TestMonteCarlo:
    def test_always_win(self):
        from entcert import validate_game
        g1 = validate_game({
            "x_alphabet": [0, 1], "y_alphabet": [0, 1],
            "a_alphabet": [0, 1], "b_alphabet": [0, 1],
            "mu": np.full((2, 2), 0.25).tolist(),
            "predicate": np.ones((2, 2, 2, 2), dtype=int).tolist()})
        s = classical_deterministic_strategy(g1, (0, 0), (0, 0))
        rate, _ = monte_carlo_threshold(s, g1, ThresholdGameSpec(g1, 20, 1.0),
                                        500, seed=0)
        assert rate == 1.0

    def test_deterministic_for_fixed_seed(self, chsh, canonical):
        spec = ThresholdGameSpec(chsh, 50, 0.8)
        r1 = monte_carlo_threshold(canonical, chsh, spec, 2000, seed=3)
        r2 = monte_carlo_threshold(canonical, chsh, spec, 2000, seed=3)
        assert r1 == r2

    def test_converges_to_exact_tail(self, chsh, canonical):
        p = QVAL_CHSH
        for n in (20, 60, 100):
            spec = ThresholdGameSpec(chsh, n, 0.8)
            rate, (lo, hi) = monte_carlo_threshold(canonical, chsh, spec,
                                                   10000, seed=n)
            exact = iid_threshold_win_prob(p, n, 0.8)
            sigma = max((hi - lo) / (2 * 1.96), 1e-4)
            assert abs(rate - exact) <= 4 * sigma

    def test_sweep_rows(self, chsh, canonical):
        rows = sweep_threshold(canonical, chsh, [20, 40], 0.79, 500, seed=0)
        assert [r["n"] for r in rows] == [20, 40]
        for r in rows:
            assert 0.0 <= r["pass_rate"] <= 1.0
            assert r["hoeffding_bound"] <= r["exact_tail"] + 1e-12


class TestJointTables:
    def test_iid_lift_is_tensor_power(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        single = chsh.mu[:, :, None, None] * b.table
        tbl = iid_lift_table(b, chsh, 2)
        # reorder (x1,x2,y1,y2,a1,a2,b1,b2) -> (x1,y1,a1,b1,x2,y2,a2,b2)
        w = np.transpose(tbl.weights, (0, 2, 4, 6, 1, 3, 5, 7))
        oracle = np.multiply.outer(single, single)
        assert np.max(np.abs(w - oracle)) < 1e-12

    def test_single_round_marginals(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        single = chsh.mu[:, :, None, None] * b.table
        tbl = iid_lift_table(b, chsh, 3)
        for i in (1, 2, 3):
            m = tbl.marginal_array([f"X{i}", f"Y{i}", f"A{i}", f"B{i}"])
            assert np.max(np.abs(m - single)) < 1e-12

    def test_n1_reproduces_behavior(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 1)
        assert np.allclose(tbl.weights,
                           chsh.mu[:, :, None, None] * b.table, atol=1e-15)

    def test_correlated_table_normalized_and_nosignaling(self, chsh):
        s = chsh_outcome_broadcast_strategy(2)
        tbl = joint_table_from_strategy(s, chsh, 2)
        assert tbl.weights.sum() == pytest.approx(1.0, abs=1e-10)
        # Alice's answer marginal must not depend on Bob's questions
        pa = tbl.marginal_array(["X1", "X2", "Y1", "Y2", "A1", "A2"])
        mu_y = tbl.marginal_array(["Y1", "Y2"])
        cond = pa / mu_y[None, None, :, :, None, None] * 1.0
        ref = cond[:, :, 0, 0][..., None, None]
        # normalize by P(y1,y2) exactly 1/4 under uniform mu
        assert np.max(np.abs(cond - np.broadcast_to(
            np.moveaxis(ref, (4, 5), (2, 3)), cond.shape))) < 1e-8

    def test_budget_exceeded(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        with pytest.raises(BudgetExceededError):
            iid_lift_table(b, chsh, 3, budget=10)

    def test_tv_and_entropy_helpers(self):
        rng = np.random.default_rng(40)
        t1 = _random_joint_table(rng, 1)
        t2 = _random_joint_table(rng, 1)
        assert t1.tv_distance(t1) == 0.0
        assert 0.0 <= t1.tv_distance(t2) <= 1.0
        assert t1.entropy(["X1"]) <= 1.0 + 1e-12

    def test_negative_weights_rejected(self):
        with pytest.raises(ValidationError):
            JointTable(("X1",), np.array([1.5, -0.5]))


class TestAugmentation:
    def test_marginal_preserved(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 1)
        aug = augment_dependency_breaking(tbl, ())
        assert np.max(np.abs(aug.marginal_array(list(tbl.names))
                             - tbl.weights)) < 1e-12

    def test_claim_27_on_iid_tables(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        for n, S in ((1, ()), (2, ()), (2, (1,)), (3, (2,))):
            aug = augment_dependency_breaking(iid_lift_table(b, chsh, n), S)
            assert claim27_max_deviation(aug, S) < 1e-10

    def test_claim_27_on_correlated_tables(self):
        rng = np.random.default_rng(41)
        for seed in range(5):
            tbl = _random_joint_table(np.random.default_rng(seed), 2)
            aug = augment_dependency_breaking(tbl, (1,))
            assert claim27_max_deviation(aug, (1,)) < 1e-10

    def test_conditional_mutual_information_zero(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        aug = augment_dependency_breaking(iid_lift_table(b, chsh, 2), ())
        mi = aug.mutual_information(["X1", "X2"], ["Y1", "Y2"],
                                    given=omega_variables(2, ()))
        assert abs(mi) < 1e-12

    def test_s_out_of_range(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        with pytest.raises(ValidationError):
            augment_dependency_breaking(tbl, (3,))


class TestEventConditioning:
    def test_full_space_event(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        cond, prob = condition_on_event(
            tbl, WinEventSpec("global", gamma=1.0), chsh)
        assert prob == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(cond.weights - tbl.weights)) < 1e-12

    def test_threshold_zero_subset(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        cond, prob = condition_on_event(
            tbl, WinEventSpec("subset", tau=1.0, S=(1,)), chsh)
        assert prob == pytest.approx(1.0, abs=1e-12)

    def test_matches_binomial_tail(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 3)
        _, prob = condition_on_event(
            tbl, WinEventSpec("global", gamma=1.0 / 3.0), chsh)
        p = QVAL_CHSH
        oracle = sum(math.comb(3, k) * p ** k * (1 - p) ** (3 - k)
                     for k in (2, 3))
        assert prob == pytest.approx(oracle, abs=1e-12)

    def test_round_event(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        _, prob = condition_on_event(tbl, WinEventSpec("round", j=1), chsh)
        assert prob == pytest.approx(QVAL_CHSH, abs=1e-12)

    def test_null_event(self, chsh):
        never = classical_deterministic_strategy(chsh, (0, 0), (1, 1))
        # x=y=0 requires a==b: answers (0,1) always lose on that pair; the
        # all-rounds event over 3 rounds still has positive mass, so force a
        # genuinely null event with a zero-win behavior
        table = np.zeros((2, 2, 2, 2))
        for x, y in itertools.product(range(2), repeat=2):
            for a, b in itertools.product(range(2), repeat=2):
                if ((a ^ b) == (x & y)):
                    continue
                table[x, y, a, b] = 0.5
        losing = Behavior(table)
        tbl = iid_lift_table(losing, chsh, 2)
        with pytest.raises(NullEventError):
            condition_on_event(tbl, WinEventSpec("global", gamma=0.0), chsh)


class TestProp32Search:
    def test_iid_invariance(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 3)
        for seed in range(3):
            _, avg, _ = prop32_search(tbl, chsh, gamma=0.25, tau=0.25, t=1,
                                      samples=8, seed=seed)
            assert avg == pytest.approx(QVAL_CHSH, abs=1e-10)

    def test_t_zero_unconditional(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        S, avg, p_ws = prop32_search(tbl, chsh, gamma=0.25, tau=0.25, t=0,
                                     samples=1, seed=0)
        assert S == ()
        assert p_ws == 1.0
        assert avg == pytest.approx(QVAL_CHSH, abs=1e-12)

    def test_correlated_beats_unconditional_and_matches_exhaustive(self, chsh):
        s = chsh_outcome_broadcast_strategy(3)
        tbl = joint_table_from_strategy(s, chsh, 3)
        tau = 0.25
        _, best, _ = prop32_search(tbl, chsh, gamma=0.25, tau=tau, t=1,
                                   samples=50, seed=0)
        uncond = np.mean([round_win_probability(tbl, chsh, j)
                          for j in (1, 2, 3)])
        # exhaustive oracle over all singleton multisets
        exhaustive = -1.0
        for S in ((1,), (2,), (3,)):
            cond, _ = condition_on_event(
                tbl, WinEventSpec("subset", tau=tau, S=S), chsh)
            outside = [j for j in (1, 2, 3) if j != S[0]]
            exhaustive = max(exhaustive, float(np.mean(
                [round_win_probability(cond, chsh, j) for j in outside])))
        assert best == pytest.approx(exhaustive, abs=1e-12)
        assert best >= uncond - 1e-12


class TestConditionalTv:
    def test_two_paths_agree_on_random_tables(self):
        for seed in range(6):
            tbl = _random_joint_table(np.random.default_rng(100 + seed), 2)
            fast = expected_conditional_tv(tbl, ["A1"], ["X1", "Y1"], ["X1"])
            slow = expected_conditional_tv_loop(tbl, ["A1"], ["X1", "Y1"],
                                                ["X1"])
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_reduced_must_be_subset(self):
        tbl = _random_joint_table(np.random.default_rng(0), 1)
        with pytest.raises(ValidationError):
            expected_conditional_tv(tbl, ["A1"], ["X1"], ["Y1"])

    def test_zero_when_conditionals_coincide(self, chsh, canonical):
        b = behavior_of(canonical, chsh)
        tbl = iid_lift_table(b, chsh, 2)
        # A2 is independent of round-1 data given (X2, Y2)
        v = expected_conditional_tv(tbl, ["A2", "B2"],
                                    ["X1", "X2", "Y2"], ["X2", "Y2"])
        assert v == pytest.approx(0.0, abs=1e-12)


class TestLemmaAudit:
    def test_iid_product_structure_all_lhs_zero(self, chsh):
        # product single-round behavior: every lemma lhs vanishes
        s = classical_deterministic_strategy(chsh, (0, 0), (0, 0))
        b = behavior_of(s, chsh)
        aug = augment_dependency_breaking(iid_lift_table(b, chsh, 3), (2,))
        entries, _ = lemma_audit(aug, chsh, (2,), TAU_CHSH, BETA_CHSH, 0.0)
        for e in entries:
            assert e.lhs == pytest.approx(0.0, abs=1e-10)
            assert e.satisfied

    def test_iid_cross_round_lhs_zero(self, chsh, canonical):
        # quantum i.i.d. rounds: the cross-round lemmas (input distribution,
        # dependency-breaking variable) vanish; the within-round answer
        # correlation keeps the answer lemmas nonzero
        b = behavior_of(canonical, chsh)
        aug = augment_dependency_breaking(iid_lift_table(b, chsh, 3), (2,))
        entries, _ = lemma_audit(aug, chsh, (2,), TAU_CHSH, BETA_CHSH, 1.0)
        by_name = {e.lemma: e for e in entries}
        for name in ("input_distribution", "dependency_breaking_given_x",
                     "dependency_breaking_given_y"):
            assert by_name[name].lhs == pytest.approx(0.0, abs=1e-10)
        for e in entries:
            assert e.satisfied

    def test_correlated_instance(self, chsh):
        s = chsh_outcome_broadcast_strategy(3)
        aug = augment_dependency_breaking(
            joint_table_from_strategy(s, chsh, 3), (2,))
        entries, params = lemma_audit(aug, chsh, (2,), TAU_CHSH, BETA_CHSH, 1.0)
        assert params["p_ws"] > 0
        for e in entries:
            assert math.isfinite(e.lhs)
            assert e.satisfied
            assert e.detail["two_path_max_diff"] < 1e-10
            assert e.vacuous == (e.bound > 1.0)

    def test_relabeling_invariance(self, chsh):
        s = chsh_outcome_broadcast_strategy(3)
        tbl = joint_table_from_strategy(s, chsh, 3)
        aug = augment_dependency_breaking(tbl, (2,))
        entries, _ = lemma_audit(aug, chsh, (2,), TAU_CHSH, BETA_CHSH, 1.0,
                                 cross_check=False)
        # swap Bob's answer labels in every round
        axes = [aug.axis(f"B{i}") for i in (1, 2, 3)]
        w = aug.weights
        for ax in axes:
            w = np.flip(w, axis=ax)
        pred = np.asarray(chsh.predicate)[:, :, :, ::-1]
        from entcert import validate_game
        g2 = validate_game({
            "x_alphabet": [0, 1], "y_alphabet": [0, 1],
            "a_alphabet": [0, 1], "b_alphabet": [0, 1],
            "mu": np.asarray(chsh.mu).tolist(),
            "predicate": pred.astype(int).tolist()})
        entries2, _ = lemma_audit(JointTable(aug.names, w), g2, (2,),
                                  TAU_CHSH, BETA_CHSH, 1.0, cross_check=False)
        for e1, e2 in zip(entries, entries2):
            assert e1.lhs == pytest.approx(e2.lhs, abs=1e-10)


class TestCorrelatedSampling:
    def test_identical_distributions_always_agree(self):
        p = np.array([0.25, 0.25, 0.5])
        rng = np.random.default_rng(0)
        for _ in range(200):
            i, j = correlated_sample(p, p, rng)
            assert i == j
        assert agreement_probability(p, p) == pytest.approx(1.0)

    def test_disjoint_support_rejected(self):
        with pytest.raises(SamplingError):
            correlated_sample(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                              np.random.default_rng(0))

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_exact_joint_marginals(self, seed):
        rng = np.random.default_rng(seed)
        p = random_distribution(4, rng)
        q = random_distribution(4, rng)
        joint = correlated_sampling_joint(p, q)
        assert np.max(np.abs(joint.sum(axis=1) - p)) < 1e-12
        assert np.max(np.abs(joint.sum(axis=0) - q)) < 1e-12
        tv = 0.5 * np.abs(p - q).sum()
        assert np.trace(joint) >= 1.0 - 2.0 * tv - 1e-12

    def test_batch_matches_exact_joint(self):
        rng = np.random.default_rng(50)
        p = np.array([0.5, 0.3, 0.2])
        q = np.array([0.45, 0.25, 0.30])
        a, b = correlated_sample_batch(p, q, 50_000, rng)
        exact = agreement_probability(p, q)
        assert abs((a == b).mean() - exact) < 0.01
        assert np.max(np.abs(np.bincount(a, minlength=3) / a.size - p)) < 0.01
        assert np.max(np.abs(np.bincount(b, minlength=3) / b.size - q)) < 0.01

    def test_scalar_and_batch_same_scheme(self):
        p = np.array([0.7, 0.3])
        q = np.array([0.6, 0.4])
        r1 = np.random.default_rng(9)
        singles = [correlated_sample(p, q, r1) for _ in range(2000)]
        rate1 = np.mean([i == j for i, j in singles])
        r2 = np.random.default_rng(10)
        a, b = correlated_sample_batch(p, q, 2000, r2)
        assert abs(rate1 - (a == b).mean()) < 0.05


class TestExtractionProtocol:
    def test_iid_deterministic_equality(self, chsh):
        s = classical_deterministic_strategy(chsh, (0, 0), (0, 0))
        b = behavior_of(s, chsh)
        aug = augment_dependency_breaking(iid_lift_table(b, chsh, 3), (2,))
        res = extraction_protocol(aug, chsh, (2,), TAU_CHSH, BETA_CHSH)
        cond, _ = condition_on_event(
            aug, WinEventSpec("subset", tau=TAU_CHSH, S=(2,)), chsh)
        target = np.mean([round_win_probability(cond, chsh, j) for j in (1, 3)])
        assert res.win_prob == pytest.approx(target, abs=1e-10)
        assert res.tv_to_target < 1e-10
        assert res.skipped_mass == 0.0

    def test_correlated_tv_within_accrued_bound(self, chsh):
        s = chsh_outcome_broadcast_strategy(3)
        aug = augment_dependency_breaking(
            joint_table_from_strategy(s, chsh, 3), (2,))
        res = extraction_protocol(aug, chsh, (2,), TAU_CHSH, BETA_CHSH)
        _, params = lemma_audit(aug, chsh, (2,), TAU_CHSH, BETA_CHSH, 1.0,
                                cross_check=False)
        assert res.tv_to_target <= params["accrued_tv_bound"] + 1e-12
        assert 0.0 <= res.win_prob <= 1.0

    def test_behavior_table_normalized(self, chsh):
        s = chsh_outcome_broadcast_strategy(3)
        aug = augment_dependency_breaking(
            joint_table_from_strategy(s, chsh, 3), (2,))
        res = extraction_protocol(aug, chsh, (2,), TAU_CHSH, BETA_CHSH)
        sums = res.behavior_table.sum(axis=(2, 3))
        assert np.allclose(sums, 1.0, atol=1e-9)
