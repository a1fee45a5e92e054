import math

import numpy as np
import pytest

from sliceshare.model import ValidationError
from sliceshare.engines import solve_alpha_scs
from sliceshare.analysis import (alignment_index, utility, factorize,
                                 protection_report, envy_report,
                                 surrogate_report)
from sliceshare.gen import (random_instance, random_scwa_weights,
                            random_feasible_rates)
from conftest import make_instance

Q3 = (0.25, 0.25, 0.5)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 7.0])
def test_alignment_of_identical_vectors_is_one(alpha):
    y = (0.2, 0.3, 0.5)
    assert alignment_index(y, y, alpha) == pytest.approx(1.0, abs=1e-12)


def test_alignment_frozen_values():
    x, y = (0.5, 0.5), (0.25, 0.75)
    assert alignment_index(x, y, 2.0) == pytest.approx(math.sqrt(4/3), abs=1e-12)
    assert alignment_index(x, y, 1.0) == pytest.approx((4/3) ** -0.5, abs=1e-12)


def test_alignment_input_checks():
    with pytest.raises(ValidationError, match="length"):
        alignment_index((0.5, 0.5), (0.3, 0.3, 0.4), 1.0)
    with pytest.raises(ValidationError, match="sum"):
        alignment_index((0.5, 0.6), (0.5, 0.5), 1.0)
    with pytest.raises(ValidationError, match="positive"):
        alignment_index((1.0, 0.0), (0.5, 0.5), 1.0)


def test_utility_worked_example(three_user):
    rep = utility(three_user, (0.4, 1/3, 2/3), Q3, 1.0)
    u1 = 0.25 * math.log(1.6) + 0.25 * math.log(4/3)
    u2 = 0.5 * math.log(4/3)
    assert rep.per_slice["s1"] == pytest.approx(u1, abs=1e-12)
    assert rep.per_slice["s2"] == pytest.approx(u2, abs=1e-12)
    assert rep.total == pytest.approx(u1 + u2, abs=1e-12)
    assert rep.combined == pytest.approx(math.exp(u1 + u2), abs=1e-12)


def test_utility_zero_rate_is_minus_infinity(three_user):
    rep = utility(three_user, (0.0, 1/3, 2/3), Q3, 1.0)
    assert rep.per_slice["s1"] == -math.inf
    assert rep.total == -math.inf


def test_factorize_frozen_fixture():
    inst = make_instance(
        ["r1"], [("s1", 0.5), ("s2", 0.5)],
        [("c1", "s1", {"r1": 1.0}), ("c2", "s2", {"r1": 1.0})])
    rep = factorize(inst, (0.25, 0.75), (0.5, 0.5), 2.0)
    assert rep.total_rate == pytest.approx(1.0, abs=1e-12)
    assert rep.efficiency == pytest.approx(-1.0, abs=1e-12)
    assert rep.inter_alignment == pytest.approx(math.sqrt(4/3), abs=1e-12)
    assert rep.intra_alignment == pytest.approx(1.0, abs=1e-12)
    assert rep.mix_weights["s1"] == pytest.approx(0.75, abs=1e-12)
    assert rep.mix_weights["s2"] == pytest.approx(0.25, abs=1e-12)
    assert rep.direct == pytest.approx(-4/3, abs=1e-12)
    assert rep.rel_error < 1e-14


def test_factorize_aligned_allocation_has_unit_factors(three_user):
    q = np.array(Q3)
    rates = 0.8 * q  # proportional, strictly inside the region
    rep = factorize(three_user, rates, Q3, 1.7)
    assert rep.inter_alignment == pytest.approx(1.0, abs=1e-12)
    assert rep.intra_alignment == pytest.approx(1.0, abs=1e-12)
    assert rep.rel_error < 1e-12


def test_factorize_identity_random():
    rng = np.random.default_rng(19)
    for i in range(50):
        inst = random_instance(rng)
        q = random_scwa_weights(rng, inst)
        rates = random_feasible_rates(rng, inst, q)
        alpha = (0.5, 1.0, 2.0, 1.0 + 2e-7)[i % 4]
        rep = factorize(inst, rates, q, alpha)
        assert rep.rel_error <= 1e-8
        assert sum(rep.mix_weights.values()) == pytest.approx(1.0, abs=1e-12)


def test_factorize_rejects_non_scwa_weights(three_user):
    with pytest.raises(ValidationError, match="share"):
        factorize(three_user, (0.1, 0.1, 0.1), (0.3, 0.3, 0.5), 1.0)
    with pytest.raises(ValidationError, match="positive"):
        factorize(three_user, (0.0, 0.1, 0.1), Q3, 1.0)


def test_protection_bound_alpha_one(three_user):
    reports = protection_report(three_user, Q3, 1.0)
    assert {r.slice_id for r in reports} == {"s1", "s2"}
    for rep in reports:
        assert rep.kind == "protection"
        assert rep.bound == pytest.approx(0.0, abs=1e-8)
        assert rep.holds(tol=1e-9)
        assert rep.slack == rep.bound - rep.gap


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_protection_bound_general_alpha(alpha):
    rng = np.random.default_rng(29)
    for _ in range(10):
        inst = random_instance(rng)
        q = random_scwa_weights(rng, inst)
        for rep in protection_report(inst, q, alpha):
            assert rep.holds(tol=1e-6)


def test_envy_bound_is_share_difference_at_alpha_one(three_user):
    rep = envy_report(three_user, Q3, 1.0, "s1", "s2")
    assert rep.kind == "envy"
    assert rep.bound == pytest.approx(0.0, abs=1e-9)  # equal shares
    assert rep.holds(tol=1e-6)
    skew = make_instance(
        ["r1"], [("s1", 0.3), ("s2", 0.7)],
        [("c1", "s1", {"r1": 1.0}), ("c2", "s2", {"r1": 1.0})])
    rep = envy_report(skew, (0.3, 0.7), 1.0, "s1", "s2")
    assert rep.bound == pytest.approx(0.4, abs=1e-9)
    assert rep.holds(tol=1e-9)


def test_envy_gap_minus_infinity_on_disjoint_resources():
    inst = make_instance(
        ["r1", "r2"], [("s1", 0.5), ("s2", 0.5)],
        [("c1", "s1", {"r1": 1.0}), ("c2", "s2", {"r2": 1.0})])
    rep = envy_report(inst, (0.5, 0.5), 1.0, "s1", "s2")
    # the other slice leaves r1 untouched, so the swap starves c1 entirely
    assert rep.gap == -math.inf
    assert rep.holds()


def test_surrogate_refuses_small_demands(three_user):
    with pytest.raises(ValidationError, match="u2.*r1|r1.*u2"):
        surrogate_report(three_user, Q3)


def test_surrogate_bound_and_unit_fixture(single_resource):
    rep = surrogate_report(single_resource, (0.5, 0.5))
    assert rep.kind == "surrogate"
    assert rep.gap == pytest.approx(0.0, abs=1e-9)  # PF = max-min here
    inst = make_instance(
        ["r1", "r2"], [("s1", 0.6), ("s2", 0.4)],
        [("c1", "s1", {"r1": 1.5, "r2": 1.0}), ("c2", "s2", {"r1": 1.0, "r2": 2.0})])
    rep = surrogate_report(inst, (0.6, 0.4))
    assert rep.gap >= -1e-9
    assert rep.bound == pytest.approx(0.6 * 2.5 + 0.4 * 3.0 - 1.0, abs=1e-12)
    assert rep.bound_cap == pytest.approx(2.0, abs=1e-12)
    assert rep.gap <= rep.bound + 1e-6
