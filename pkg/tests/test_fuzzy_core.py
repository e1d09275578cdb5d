import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzymob.errors import ConfigError, DomainError, NoActivationError
from fuzzymob.fuzzy_core import (
    FuzzyRule,
    center_average_defuzzify,
    fuzzy_pipeline,
    fuzzy_system_eval,
    infer,
    place_membership,
    singleton_fuzzify,
    time_membership,
)

hours = st.floats(0.0, 24.0, allow_nan=False)
coord = st.floats(0.0, 10000.0, allow_nan=False)


@pytest.mark.parametrize(
    "t, a, expected",
    [
        (8, 8, 1.0),
        (10, 8, 0.449329),  # exp(-0.8)
        (12, 17, 0.006738),  # exp(-5.0)
    ],
)
def test_time_membership_examples(t, a, expected):
    assert time_membership(t, a) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize(
    "p, expected",
    [
        ((7500, 6500), 1.0),
        ((7600, 6500), 0.367879),  # exp(-1.0)
        ((7500, 6550), 0.778801),  # exp(-0.25)
    ],
)
def test_place_membership_examples(p, expected):
    assert place_membership(p, (7500, 6500)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_memberships_reject_non_finite(bad):
    with pytest.raises(DomainError):
        time_membership(bad, 8)
    with pytest.raises(DomainError):
        place_membership((bad, 0), (0, 0))


def test_singleton():
    s = singleton_fuzzify(8)
    assert s.membership(8) == 1.0
    assert s.membership(8.001) == 0.0
    assert s.membership(8) * time_membership(8, 8) == 1.0


@pytest.mark.parametrize(
    "acts, expected",
    [
        ([(5.0, 0.7)], 5.0),
        ([(2.0, 1.0), (4.0, 1.0)], 3.0),
        ([(0.0, 1.0), (10.0, 3.0)], 7.5),
    ],
)
def test_defuzzify_examples(acts, expected):
    assert center_average_defuzzify(acts) == pytest.approx(expected)


def test_defuzzify_all_zero():
    with pytest.raises(NoActivationError):
        center_average_defuzzify([(1.0, 0.0), (2.0, 0.0)])


def _rules(*specs):
    return [FuzzyRule(lb, site, c) for lb, site, c in specs]


def test_system_single_rule():
    rules = _rules(("Morning", "A", (3000.0, 4000.0)))
    out = fuzzy_system_eval(13.0, (100.0, 200.0), rules, {"Morning": 8.0}, {"A": (150.0, 220.0)})
    assert out == pytest.approx((3000.0, 4000.0))


def test_system_symmetric_weights():
    rules = _rules(("L", "A", (0.0, 0.0)), ("L", "A", (1000.0, 0.0)))
    assert fuzzy_system_eval(8.0, (0, 0), rules, {"L": 8.0}, {"A": (0.0, 0.0)}) == pytest.approx((500.0, 0.0))


def test_system_two_rules_weighted():
    # t=10: label A (a=8) -> exp(-0.8), label B (a=11) -> exp(-0.2); both places at p
    rules = _rules(("A", "S", (0.0, 0.0)), ("B", "S", (8000.0, 6000.0)))
    tc, sc = {"A": 8.0, "B": 11.0}, {"S": (500.0, 500.0)}
    w1, w2 = math.exp(-0.8), math.exp(-0.2)
    expected = (8000 * w2 / (w1 + w2), 6000 * w2 / (w1 + w2))
    assert fuzzy_system_eval(10.0, (500.0, 500.0), rules, tc, sc) == pytest.approx(expected, abs=1e-9)
    assert fuzzy_pipeline(10.0, (500.0, 500.0), rules, tc, sc) == pytest.approx(expected, abs=1e-9)


def test_system_empty_rules():
    with pytest.raises(ConfigError):
        fuzzy_system_eval(8.0, (0, 0), [], {}, {})


def test_system_underflow():
    rules = _rules(("L", "A", (0.0, 0.0)))
    with pytest.raises(NoActivationError):
        fuzzy_system_eval(8.0, (1e6, 1e6), rules, {"L": 8.0}, {"A": (0.0, 0.0)})


def test_infer_weights_are_antecedent_products():
    rules = _rules(("L", "A", (1.0, 1.0)))
    acts = infer(singleton_fuzzify(10.0), (singleton_fuzzify(7600.0), singleton_fuzzify(6500.0)), rules,
                 {"L": 8.0}, {"A": (7500.0, 6500.0)})
    assert acts[0].weight == pytest.approx(math.exp(-0.8) * math.exp(-1.0), rel=1e-12)


@given(t=hours, a=hours)
def test_time_membership_bounds(t, a):
    mu = time_membership(t, a)
    assert 0.0 < mu <= 1.0
    if abs(t - a) >= 1e-6:
        assert mu < 1.0


@given(a=hours, delta=st.floats(0, 12))
def test_time_membership_symmetric(a, delta):
    assert time_membership(a + delta, a) == pytest.approx(time_membership(a - delta, a), rel=1e-9)


@given(x=coord, y=coord, ang=st.floats(0, 2 * math.pi), r=st.floats(0, 500))
def test_place_membership_radial(x, y, ang, r):
    p1 = (x + r * math.cos(ang), y + r * math.sin(ang))
    p2 = (x + r, y)
    assert place_membership(p1, (x, y)) == pytest.approx(place_membership(p2, (x, y)), rel=1e-9)
    assert 0.0 < place_membership(p1, (x, y)) <= 1.0


weights = st.lists(
    st.tuples(st.floats(-1e4, 1e4), st.floats(1e-6, 10.0)), min_size=1, max_size=12
)


@given(acts=weights, c=st.floats(1e-3, 1e3))
def test_defuzzify_scale_invariant(acts, c):
    base = center_average_defuzzify(acts)
    scaled = center_average_defuzzify([(y, w * c) for y, w in acts])
    assert scaled == pytest.approx(base, abs=1e-12 * max(1.0, max(abs(y) for y, _ in acts)))


@given(acts=weights)
def test_defuzzify_convex(acts):
    ys = [y for y, _ in acts]
    out = center_average_defuzzify(acts)
    span = max(ys) - min(ys)
    assert min(ys) - 1e-9 * (1 + span) <= out <= max(ys) + 1e-9 * (1 + span)


@settings(max_examples=200)
@given(a=hours, t=hours, step=st.floats(0.0, 1.0))
def test_moving_toward_center_never_lowers_weight(a, t, step):
    closer = t + (a - t) * step
    assert time_membership(closer, a) >= time_membership(t, a)


def test_closed_form_matches_pipeline_small_random():
    rng = np.random.default_rng(7)
    sc = {f"S{i}": tuple(rng.uniform(0, 10000, 2)) for i in range(4)}
    tc = {"Morning": 8.0, "Noon": 12.0, "Evening": 17.0}
    rules = [FuzzyRule(lb, s, sc[rng.choice(list(sc))]) for lb in tc for s in sc]
    for _ in range(100):
        name = rng.choice(list(sc))
        p = tuple(np.asarray(sc[name]) + rng.normal(0, 60, 2))
        t = rng.uniform(0, 24)
        a = fuzzy_system_eval(t, p, rules, tc, sc)
        b = fuzzy_pipeline(t, p, rules, tc, sc)
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) < 1e-9
