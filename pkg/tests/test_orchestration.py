import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colabel.errors import InfeasibleError, ValidationError
from colabel.orchestrate import assign_batch, carve_holdout, plan_rounds, sample_pool

from oracles import plan_oracle


class TestSamplePool:
    def test_large_pool_sample_sizes(self):
        corpus = [f"post-{i}" for i in range(12000)]
        picked = sample_pool(corpus, 10633, seed=11)
        assert len(picked) == 10633
        assert len(set(picked)) == 10633
        picked2 = sample_pool([f"post-{i}" for i in range(9000)], 8746, seed=12)
        assert len(set(picked2)) == 8746

    def test_deterministic(self):
        corpus = list(range(100))
        assert sample_pool(corpus, 30, seed=42) == sample_pool(corpus, 30, seed=42)
        assert sample_pool(corpus, 30, seed=42) != sample_pool(corpus, 30, seed=43)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            sample_pool([1, 2, 3], 4, seed=0)


class TestPlanRounds:
    def test_doubling_plan_large(self):
        assert plan_rounds(10633, 4, 2.0).round_sizes == (709, 1418, 2835, 5671)

    def test_doubling_plan_second_corpus(self):
        # frozen from the arithmetic oracle: quotas 583.07/1166.13/2332.27,
        # remainder to the last round
        expected = tuple(plan_oracle(8746, 4, 2.0))
        assert expected == (583, 1166, 2332, 4665)
        assert plan_rounds(8746, 4, 2.0).round_sizes == expected

    def test_uniform(self):
        assert plan_rounds(4, 4, 1.0).round_sizes == (1, 1, 1, 1)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            plan_rounds(3, 4, 2.0)
        with pytest.raises(InfeasibleError):
            plan_rounds(10, 0, 2.0)
        with pytest.raises(ValidationError):
            plan_rounds(10, 2, 0.5)

    @given(
        total=st.integers(1, 2000),
        n_rounds=st.integers(1, 8),
        growth=st.floats(1.0, 4.0, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_sizes_sum_and_are_monotone(self, total, n_rounds, growth):
        if total < n_rounds:
            return
        plan = plan_rounds(total, n_rounds, growth)
        assert sum(plan.round_sizes) == total
        assert all(s >= 1 for s in plan.round_sizes)
        assert list(plan.round_sizes) == sorted(plan.round_sizes)


class TestAssignBatch:
    def test_single_item_all_three(self):
        a = assign_batch(["i1"], ["x", "y", "z"], k=3, seed=1)
        assert set(a.items["i1"]) == {"x", "y", "z"}

    def test_too_few_annotators(self):
        with pytest.raises(InfeasibleError):
            assign_batch(["i1"], ["x", "y"], k=3, seed=1)

    def test_balanced_loads_ten_items_five_annotators(self):
        items = [f"i{n}" for n in range(10)]
        a = assign_batch(items, list("abcde"), k=3, seed=9)
        loads = a.load_per_annotator()
        assert all(load == 6 for load in loads.values())
        assert sum(loads.values()) == 30

    def test_every_item_gets_k_distinct(self):
        items = [f"i{n}" for n in range(17)]
        annotators = [f"p{n}" for n in range(7)]
        a = assign_batch(items, annotators, k=4, seed=3)
        for item, who in a.items.items():
            assert len(who) == 4
            assert len(set(who)) == 4

    def test_loads_within_one(self):
        for seed in range(5):
            a = assign_batch([f"i{n}" for n in range(13)], list("abcde"), k=3, seed=seed)
            loads = a.load_per_annotator()
            assert max(loads.values()) - min(loads.values()) <= 1

    def test_deterministic(self):
        items = [f"i{n}" for n in range(8)]
        one = assign_batch(items, list("abcd"), k=2, seed=5)
        two = assign_batch(items, list("abcd"), k=2, seed=5)
        assert one.items == two.items


class TestCarveHoldout:
    def test_fraction_zero(self):
        assert carve_holdout(["a", "b", "c"], 0.0, seed=1) == set()

    def test_fraction_one(self):
        assert carve_holdout(["a", "b", "c"], 1.0, seed=1) == {"a", "b", "c"}

    def test_large_corpus_holdout_count(self):
        ids = [f"i{n}" for n in range(10633)]
        holdout = carve_holdout(ids, 4980 / 10633, seed=4)
        assert len(holdout) == 4980

    def test_bounds(self):
        with pytest.raises(ValidationError):
            carve_holdout(["a"], 1.2, seed=0)

    def test_deterministic_and_order_independent(self):
        ids = [f"i{n}" for n in range(50)]
        h1 = carve_holdout(ids, 0.3, seed=7)
        h2 = carve_holdout(list(reversed(ids)), 0.3, seed=7)
        assert h1 == h2
