import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from hflc import fuzzy
from hflc.errors import ArityError, CountOverflowError, PartitionError, ZeroFiringError
from hflc.fuzzy import (
    FuzzyLogicUnit,
    LinguisticVariable,
    MembershipFunction,
    MFKind,
    TskRule,
    fire_strength,
    flat_rule_count,
    grid_flu,
    grid_partition,
    infer,
    make_variable,
    membership_degree,
)


def gauss(c=0.0, s=1.0, label="A"):
    return MembershipFunction(MFKind.GAUSSIAN, (c, s), label)


def tri(a, b, c, label="A"):
    return MembershipFunction(MFKind.TRIANGULAR, (a, b, c), label)


class TestMembership:
    def test_gaussian_center(self):
        assert membership_degree(gauss(), 0.0) == 1.0

    def test_triangular_midpoint(self):
        assert membership_degree(tri(0, 1, 2), 0.5) == 0.5

    def test_gaussian_one_sigma(self):
        # exp(-0.5), evaluated independently
        assert membership_degree(gauss(), 1.0) == pytest.approx(0.6065306597126334, abs=1e-15)

    def test_bell_half_crossing(self):
        mf = MembershipFunction(MFKind.BELL, (0.5, 2.0, 1.0), "B")
        assert membership_degree(mf, 1.5) == pytest.approx(0.5)
        assert membership_degree(mf, 1.0) == 1.0

    def test_triangular_outside_support(self):
        mf = tri(0, 1, 2)
        assert membership_degree(mf, -1.0) == 0.0
        assert membership_degree(mf, 2.0) == 0.0
        assert membership_degree(mf, 1.0) == 1.0

    @pytest.mark.parametrize("kind, params", [
        ("gaussian", (0.0, 0.0)),
        ("gaussian", (0.0, -1.0)),
        ("generalized-bell", (0.0, 2.0, 0.0)),
        ("generalized-bell", (1.0, -2.0, 0.0)),
        ("triangular", (2.0, 1.0, 0.0)),
        ("triangular", (1.0, 1.0, 1.0)),
    ])
    def test_invalid_parameters_rejected(self, kind, params):
        with pytest.raises(ValueError):
            MembershipFunction(kind, params, "bad")

    def test_degree_range_random(self):
        rng = np.random.default_rng(7)
        x = rng.normal(scale=10, size=100_000)
        for mf in (
            gauss(rng.normal(), rng.uniform(0.01, 3)),
            MembershipFunction(MFKind.BELL, (rng.uniform(0.1, 2), rng.uniform(0.2, 4), rng.normal()), "b"),
            tri(-1.0, 0.3, 2.0),
        ):
            d = mf.degree(x)
            assert d.min() >= 0.0 and d.max() <= 1.0

    @given(st.sampled_from(["gaussian", "generalized-bell", "triangular"]),
           st.floats(-5, 5), st.floats(0.05, 3), st.floats(0.2, 4), st.floats(-50, 50))
    def test_degree_matches_oracle(self, kind, c, w, b, x):
        params = {"gaussian": (c, w), "generalized-bell": (w, b, c), "triangular": (c - w, c, c + w)}[kind]
        mf = MembershipFunction(kind, params, "t")
        d = membership_degree(mf, x)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(oracles.mf_degree(kind, params, x), abs=1e-12)


class TestFireAndInfer:
    def setup_method(self):
        v1 = LinguisticVariable("a", (0, 2), (tri(0, 1, 2, "mid"), tri(-2, 0, 2, "low")))
        v2 = LinguisticVariable("b", (0, 2), (tri(0, 1, 2, "mid"), tri(0, 2, 4, "high")))
        self.flu = FuzzyLogicUnit((v1, v2), (TskRule((0, 0), (0, 0, 1.0)), TskRule((1, 1), (0, 0, 3.0))))

    def test_all_degrees_one(self):
        assert fire_strength(self.flu.rules[0], self.flu, [1.0, 1.0]) == 1.0

    def test_annihilator(self):
        assert fire_strength(self.flu.rules[0], self.flu, [0.0, 1.0]) == 0.0

    def test_product(self):
        # degrees 0.5 (a at 0.5 in mid) and 0.4 (b at 0.4 in mid)
        w = fire_strength(self.flu.rules[0], self.flu, [0.5, 0.4])
        assert w == pytest.approx(0.5 * 0.4, abs=1e-15)

    def test_arity_mismatch(self):
        with pytest.raises(ArityError):
            fire_strength(self.flu.rules[0], self.flu, [1.0])
        with pytest.raises(ArityError):
            infer(self.flu, [1.0, 1.0, 1.0])

    def test_single_rule_constant(self):
        v = make_variable("x", (0, 1), 2, "triangular")
        flu = FuzzyLogicUnit((v,), (TskRule((0,), (0.0, 5.0)),))
        assert infer(flu, [0.3]) == 5.0

    def test_single_rule_constant_is_flat(self):
        v = make_variable("x", (-1, 1), 3, "gaussian")
        flu = FuzzyLogicUnit((v,), (TskRule((1,), (0.0, 2.5)),))
        xs = np.linspace(-1, 1, 1000)[:, None]
        np.testing.assert_allclose(flu.predict(xs), 2.5, rtol=1e-15, atol=0)

    def test_equal_strength_midpoint(self):
        v = LinguisticVariable("x", (0, 1), (gauss(0.5, 0.2, "a"), gauss(0.5, 0.2, "b")))
        flu = FuzzyLogicUnit((v,), (TskRule((0,), (0.0, 0.0)), TskRule((1,), (0.0, 10.0))))
        assert infer(flu, [0.4]) == 5.0

    def test_zero_firing(self):
        v = make_variable("x", (0, 1), 2, "triangular")
        flu = grid_flu([v])
        with pytest.raises(ZeroFiringError):
            infer(flu, [5.0])
        assert infer(flu, [5.0], clamp=True) == 0.0

    def test_additive_target_at_centres(self):
        # consequents p = (1, 1), r = 0 reproduce x1 + x2 everywhere
        vs = [make_variable(f"x{i}", (-1, 1), 3, "gaussian") for i in (1, 2)]
        flu = grid_flu(vs, consequents=(1.0, 1.0, 0.0))
        doc = fuzzy.flu_to_dict(flu)
        for c1 in (-1.0, 0.0, 1.0):
            for c2 in (-1.0, 0.0, 1.0):
                assert infer(flu, [c1, c2]) == pytest.approx(c1 + c2, abs=1e-8)
                assert infer(flu, [c1, c2]) == pytest.approx(oracles.flu_output(doc, [c1, c2]), abs=1e-12)

    def test_batch_matches_oracle(self):
        rng = np.random.default_rng(3)
        vs = [make_variable(f"x{i}", (0, 1), 3) for i in range(3)]
        flu = grid_flu(vs).with_consequents(rng.normal(size=(27, 4)))
        doc = fuzzy.flu_to_dict(flu)
        X = rng.uniform(0, 1, (25, 3))
        got = flu.predict(X)
        want = [oracles.flu_output(doc, x) for x in X]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


class TestGridPartition:
    def test_two_triangles(self):
        terms = grid_partition((0, 1), 2, "triangular")
        assert [t.params for t in terms] == [(-1.0, 0.0, 1.0), (0.0, 1.0, 2.0)]
        assert terms[0].degree(0.5) == 0.5

    def test_three_gaussians(self):
        terms = grid_partition((0, 1), 3, "gaussian")
        assert [t.params[0] for t in terms] == [0.0, 0.5, 1.0]
        # solve exp(-d^2 / 2 s^2) = 0.5 at d = 0.25
        for t in terms:
            assert t.params[1] == pytest.approx(0.21233045007200477, rel=1e-14)
        assert terms[0].degree(0.25) == pytest.approx(0.5)

    def test_five_centres(self):
        terms = grid_partition((-2, 2), 5)
        assert [t.center for t in terms] == [-2.0, -1.0, 0.0, 1.0, 2.0]

    @pytest.mark.parametrize("kind", list(MFKind))
    def test_neighbours_cross_half(self, kind):
        terms = grid_partition((1, 4), 4, kind)
        for a, b in zip(terms, terms[1:]):
            mid = 0.5 * (a.center + b.center)
            assert a.degree(mid) == pytest.approx(0.5)
            assert b.degree(mid) == pytest.approx(0.5)

    def test_m_too_small(self):
        with pytest.raises(PartitionError):
            grid_partition((0, 1), 1)

    def test_reflected_universe_is_exact(self):
        a = grid_partition((0.1037, 0.4032), 3)
        b = grid_partition((-0.4032, -0.1037), 3)
        assert [t.center for t in a] == [-t.center for t in reversed(b)]


class TestRuleCounts:
    @pytest.mark.parametrize("n, m, expected", [(2, 3, 9), (1, 5, 5), (7, 3, 2187)])
    def test_flat(self, n, m, expected):
        assert flat_rule_count(n, m) == expected

    def test_flat_against_repeated_multiplication(self):
        for n in range(1, 12):
            p = 1
            for _ in range(n):
                p *= 3
            assert flat_rule_count(n, 3) == p

    def test_overflow(self):
        with pytest.raises(CountOverflowError):
            flat_rule_count(64, 2)
        assert flat_rule_count(62, 2) == 2**62


class TestUnitStructure:
    def test_grid_completeness(self):
        vs = [make_variable("a", (0, 1), 2), make_variable("b", (0, 1), 3), make_variable("c", (0, 1), 4)]
        flu = grid_flu(vs)
        assert flu.n_rules == 24
        assert flu.is_grid_complete()
        assert sorted(r.antecedent for r in flu.rules) == oracles.grid_combinations([2, 3, 4])

    def test_rule_with_bad_term_index(self):
        v = make_variable("a", (0, 1), 2)
        with pytest.raises(IndexError):
            FuzzyLogicUnit((v,), (TskRule((2,), (0.0, 0.0)),))

    def test_rule_arity(self):
        v = make_variable("a", (0, 1), 2)
        with pytest.raises(ArityError):
            FuzzyLogicUnit((v,), (TskRule((0, 0), (0.0, 0.0, 0.0)),))

    def test_variable_invariants(self):
        with pytest.raises(PartitionError):
            LinguisticVariable("v", (1, 1), grid_partition((0, 1), 2))
        with pytest.raises(PartitionError):
            LinguisticVariable("v", (0, 1), (gauss(0, 1, "a"), gauss(1, 1, "a")))
        with pytest.raises(PartitionError):
            LinguisticVariable("v", (0, 1), (tri(5, 6, 7),))

    def test_output_bounded_by_consequents(self):
        rng = np.random.default_rng(11)
        vs = [make_variable(f"x{i}", (-1, 1), 3) for i in range(2)]
        flu = grid_flu(vs).with_consequents(rng.normal(size=(9, 3)))
        X = rng.uniform(-1, 1, (500, 2))
        F = flu.rule_outputs(X)
        y = flu.predict(X)
        assert np.all(y >= F.min(axis=1) - 1e-12)
        assert np.all(y <= F.max(axis=1) + 1e-12)

    @pytest.mark.parametrize("kind", ["gaussian", "generalized-bell"])
    def test_continuity(self, kind):
        rng = np.random.default_rng(5)
        vs = [make_variable(f"x{i}", (0, 1), 3, kind) for i in range(2)]
        flu = grid_flu(vs).with_consequents(rng.normal(size=(9, 3)))
        X = rng.uniform(0, 1, (200, 2))
        slopes = []
        for h in (1e-3, 1e-5, 1e-7):
            d = np.abs(flu.predict(X + h) - flu.predict(X))
            slopes.append(d.max() / h)
            assert d.max() < 100 * h
        assert max(slopes) < 100

    def test_immutable(self):
        flu = grid_flu([make_variable("a", (0, 1), 2)])
        with pytest.raises(Exception):
            flu.rules = ()
        with pytest.raises(ValueError):
            flu.consequents[0, 0] = 1.0


class TestSerialization:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(2)
        vs = [make_variable("a", (0.1, 0.7), 3), make_variable("b", (-1 / 3, 2 / 3), 2, "gaussian")]
        flu = grid_flu(vs).with_consequents(rng.normal(size=(6, 3)) / 7)
        text = fuzzy.dumps(flu)
        back = fuzzy.loads(text)
        assert np.array_equal(back.consequents, flu.consequents)
        assert np.array_equal(back.premise_vector(), flu.premise_vector())
        assert fuzzy.dumps(back) == text

    def test_document_fields(self):
        doc = json.loads(fuzzy.dumps(grid_flu([make_variable("a", (0, 1), 2, "triangular")])))
        assert set(doc) == {"inputs", "rules"}
        assert set(doc["inputs"][0]) == {"name", "universe", "terms"}
        assert set(doc["inputs"][0]["terms"][0]) == {"kind", "params", "label"}
        assert set(doc["rules"][0]) == {"antecedent", "consequent"}


class TestReflect:
    def test_reflected_unit_is_mirror_image(self):
        rng = np.random.default_rng(9)
        vs = [make_variable("a", (0.1, 0.5), 3), make_variable("b", (0.4, 0.45), 3)]
        flu = grid_flu(vs).with_consequents(rng.normal(size=(9, 3)))
        ref = fuzzy.reflect_flu(flu, [True, False], True)
        X = np.column_stack([rng.uniform(0.1, 0.5, 50), rng.uniform(0.4, 0.45, 50)])
        Xr = X * [-1.0, 1.0]
        assert np.array_equal(ref.predict(Xr), -flu.predict(X))
