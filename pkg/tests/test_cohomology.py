"""Exact intersection calculus and the predicted volume polynomial."""

import math
import warnings
from fractions import Fraction

import pytest

from vortexline.cohomology import (
    CohClass,
    PiPolynomial,
    certify_intersection_rule,
    chern_vertical,
    cup,
    cup_power,
    dh_slope_class,
    eta,
    family_class,
    integrate_top,
    one_two_bracket_identities,
    parse_pi_rational,
    predicted_volume,
    theta,
    vortex_class,
)
from vortexline.symmetric_oracle import (
    diagonal_class,
    eta_pull,
    incidence_pull,
    oracle_eta_theta_integral,
    push_last,
    slot_class,
    tensor_add,
    tensor_mul,
    tensor_scale,
    theta_pull,
)


def pi_val(coeff, power=1):
    return PiPolynomial.pi(power, coeff)


class TestPiArithmetic:
    def test_ring_operations(self):
        two_pi = pi_val(2)
        assert two_pi + two_pi == pi_val(4)
        assert two_pi * two_pi == pi_val(4, 2)
        assert (two_pi**3) == pi_val(8, 3)
        assert two_pi - two_pi == PiPolynomial()
        assert (-two_pi) + two_pi == PiPolynomial()

    def test_mixed_terms(self):
        p = pi_val(3) + PiPolynomial(2)
        q = p * p
        assert q == PiPolynomial(4) + pi_val(12) + pi_val(9, 2)
        assert q.to_float() == pytest.approx((3 * math.pi + 2) ** 2, rel=1e-15)

    def test_float_boundary(self):
        assert pi_val(Fraction(21, 10)).to_float() == pytest.approx(2.1 * math.pi, rel=1e-15)
        assert PiPolynomial().to_float() == 0.0

    def test_repr_reparses(self):
        for p in (pi_val(8), pi_val(-3, 2), PiPolynomial(Fraction(3, 4))):
            assert parse_pi_rational(repr(p)) == p


class TestParsing:
    @pytest.mark.parametrize(
        "text,coeff,power",
        [
            ("8pi", 8, 1),
            ("2.1pi", Fraction(21, 10), 1),
            ("-pi", -1, 1),
            ("3/4pi^2", Fraction(3, 4), 2),
            ("pi^3", 1, 3),
            ("5", 5, 0),
            ("1.5", Fraction(3, 2), 0),
        ],
    )
    def test_valid_forms(self, text, coeff, power):
        assert parse_pi_rational(text) == PiPolynomial.pi(power, coeff)

    @pytest.mark.parametrize("text", ["", "pi pi", "2x", "pi^-1", "1/0", "^2"])
    def test_rejects_garbage(self, text):
        with pytest.raises(ValueError):
            parse_pi_rational(text)


class TestOracle:
    # brute-force pairing values on small symmetric powers
    FROZEN = {
        (1, 0, 0): 1,
        (1, 1, 0): 1,
        (1, 1, 1): 1,
        (2, 1, 0): 1,
        (2, 1, 1): 1,
        (2, 1, 2): 0,
        (2, 2, 2): 2,
        (3, 2, 2): 2,
        (3, 2, 3): 0,
        (3, 3, 3): 6,
    }

    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_pairing_table(self, key):
        r, g, k = key
        assert oracle_eta_theta_integral(r, g, k) == Fraction(self.FROZEN[key])

    def test_certification_gate(self):
        certify_intersection_rule()
        certify_intersection_rule()  # idempotent

    @pytest.mark.parametrize("r", [1, 2, 3])
    @pytest.mark.parametrize("g", [0, 1, 2])
    def test_incidence_square_pushforward(self, r, g):
        # the squared incidence divisor pushes down to 2 r eta - 2 theta,
        # as an identity of full tensor classes
        inc = incidence_pull(r, g)
        pushed = push_last(tensor_mul(inc, inc))
        expected = tensor_add(
            tensor_scale(eta_pull(r, g), 2 * r), tensor_scale(theta_pull(r, g), -2)
        )
        assert tensor_add(pushed, tensor_scale(expected, -1)) == {}

    @pytest.mark.parametrize("g", [0, 1, 2, 3])
    def test_diagonal_self_intersection(self, g):
        d = diagonal_class(g)
        pushed = push_last(tensor_mul(d, d))
        expected = tensor_scale(slot_class(1, 0, ("e",)), 2 - 2 * g)
        assert tensor_add(pushed, tensor_scale(expected, -1)) == {}


class TestClasses:
    def test_vortex_class_assembly(self):
        cls = vortex_class("8pi", 1, 1)
        assert cls.terms[(1, 0)] == pi_val(12, 2)
        assert cls.terms[(0, 1)] == pi_val(4, 2)

    def test_degenerate_class_is_pure_theta(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for r in (1, 2, 3):
                cls = vortex_class(pi_val(2 * r), r, 1)
                assert cls.terms.get((1, 0), PiPolynomial()) == PiPolynomial()
                assert cls.terms[(0, 1)] == pi_val(4, 2)

    def test_warns_at_and_below_bound(self):
        with pytest.warns(UserWarning):
            vortex_class("2pi", 1, 1)
        with pytest.warns(UserWarning):
            vortex_class("1pi", 1, 1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            vortex_class("3pi", 1, 1)

    def test_ring_operations_and_grading_guard(self):
        a = eta(2, 1)
        b = theta(2, 1)
        c = cup(a + b, a - b)
        assert c == cup(a, a) - cup(b, b)
        with pytest.raises(ValueError):
            cup(eta(2, 1), eta(3, 1))

    def test_cup_power_zero_is_unit(self):
        unit = cup_power(eta(2, 1), 0)
        assert unit.terms[(0, 0)] == PiPolynomial(1)


class TestPredictions:
    def test_torus_one_vortex_volume_is_linear(self):
        for ta in ("3pi", "8pi", "20pi"):
            pv = predicted_volume(ta, 1, 1)
            assert pv.value == PiPolynomial.pi(1, 2) * parse_pi_rational(ta)

    def test_sphere_one_vortex_volume_has_offset(self):
        pv = predicted_volume("8pi", 1, 0)
        assert pv.value == pi_val(16, 2) - pi_val(4, 2)

    def test_two_vortex_torus_value(self):
        assert predicted_volume("8pi", 2, 1).value == pi_val(64, 4)

    def test_degenerate_limits(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert predicted_volume("2pi", 1, 1).value == pi_val(4, 2)
            assert predicted_volume("4pi", 2, 1).value == PiPolynomial()
            assert predicted_volume("4pi", 2, 2).value == pi_val(16, 4)

    @pytest.mark.parametrize("r", range(1, 7))
    @pytest.mark.parametrize("g", range(0, 5))
    def test_family_assembly_reduces_to_direct_class(self, r, g):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for tau, area in ((pi_val(8), 1), (pi_val(3), 2), (PiPolynomial(7), 1)):
                direct = vortex_class(tau * PiPolynomial(area), r, g)
                assembled = family_class(tau, area, r, g)
                assert assembled == direct

    def test_bracket_outputs(self):
        first, second = one_two_bracket_identities(3, 2, pi_val(5))
        assert first == eta(3, 2).scale(pi_val(5))
        assert second == eta(3, 2).scale(6) - theta(3, 2).scale(2)

    @pytest.mark.parametrize("g", [0, 1, 2, 3])
    def test_vertical_chern_number(self, g):
        val = integrate_top(chern_vertical(1, g))
        assert val.value == PiPolynomial(2 - 2 * g)

    def test_slope_class(self):
        for area in (1, 2, Fraction(3, 2)):
            cls = dh_slope_class(1, 1, area)
            assert cls.terms[(1, 0)] == PiPolynomial.pi(1, 2 * Fraction(area))
            assert integrate_top(cls).value == PiPolynomial.pi(1, 2 * Fraction(area))

    def test_positivity_above_bound(self):
        for r, g in ((1, 0), (1, 1), (2, 0), (2, 1)):
            for num in range(2 * r * 4 + 1, 2 * r * 4 + 20, 3):
                ta = PiPolynomial.pi(1, Fraction(num, 4))
                assert predicted_volume(ta, r, g).to_float() > 0.0

    def test_integrate_drops_lower_degree_terms(self):
        c = CohClass(2, 1, {(0, 0): pi_val(9), (1, 0): 3, (2, 0): 1})
        assert integrate_top(c).value == PiPolynomial(1)
